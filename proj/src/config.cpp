#include "fedsim/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace fedsim {
namespace {

struct Value {
  enum class Kind { integer, real, string, boolean, list };
  Kind kind = Kind::string;
  std::int64_t i = 0;
  double d = 0.0;
  bool b = false;
  std::string s;
  std::vector<Value> items;
};

[[noreturn]] void syntax_error(const std::string& msg, int line, int col) {
  std::ostringstream os;
  os << "config syntax error at " << line << ":" << col << ": " << msg;
  throw ConfigError(ConfigError::Kind::syntax, os.str(), line, col);
}

[[noreturn]] void semantic_error(const std::string& msg, int line = 0) {
  throw ConfigError(ConfigError::Kind::semantic, "config error: " + msg, line);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_bare_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' ||
         c == '+';
}

// Parses one scalar or list value; `col` is the 1-based column of `text[0]`.
Value parse_value(std::string_view text, int line, int col) {
  text = trim(text);
  if (text.empty()) syntax_error("missing value", line, col);

  if (text.front() == '"') {
    Value v;
    v.kind = Value::Kind::string;
    bool closed = false;
    for (std::size_t i = 1; i < text.size(); ++i) {
      char c = text[i];
      if (c == '\\') {
        if (i + 1 >= text.size()) syntax_error("dangling escape", line, col + static_cast<int>(i));
        char e = text[++i];
        if (e == '"' || e == '\\') {
          v.s.push_back(e);
        } else {
          syntax_error("unsupported escape", line, col + static_cast<int>(i));
        }
      } else if (c == '"') {
        if (trim(text.substr(i + 1)).empty()) {
          closed = true;
          break;
        }
        syntax_error("trailing characters after string", line, col + static_cast<int>(i) + 1);
      } else {
        v.s.push_back(c);
      }
    }
    if (!closed) syntax_error("unterminated string", line, col);
    return v;
  }

  if (text.front() == '[') {
    if (text.back() != ']') syntax_error("unterminated list", line, col);
    Value v;
    v.kind = Value::Kind::list;
    std::string_view inner = text.substr(1, text.size() - 2);
    std::size_t start = 0;
    int depth = 0;
    bool in_string = false;
    bool any = !trim(inner).empty();
    if (any) {
      for (std::size_t i = 0; i <= inner.size(); ++i) {
        const bool end = i == inner.size();
        char c = end ? ',' : inner[i];
        if (!end && c == '"') in_string = !in_string;
        if (!in_string && c == '[') ++depth;
        if (!in_string && c == ']') --depth;
        if (!in_string && depth == 0 && c == ',') {
          v.items.push_back(parse_value(inner.substr(start, i - start), line, col + 1 + static_cast<int>(start)));
          start = i + 1;
        }
      }
    }
    return v;
  }

  for (char c : text) {
    if (!is_bare_char(c)) syntax_error("unexpected character in value", line, col);
  }

  const std::string token(text);
  if (token == "true" || token == "false") {
    Value v;
    v.kind = Value::Kind::boolean;
    v.b = token == "true";
    return v;
  }

  char* end = nullptr;
  errno = 0;
  const long long as_int = std::strtoll(token.c_str(), &end, 10);
  if (end && *end == '\0' && errno == 0) {
    Value v;
    v.kind = Value::Kind::integer;
    v.i = as_int;
    v.d = static_cast<double>(as_int);
    return v;
  }
  errno = 0;
  const double as_real = std::strtod(token.c_str(), &end);
  if (end && *end == '\0' && errno == 0) {
    Value v;
    v.kind = Value::Kind::real;
    v.d = as_real;
    return v;
  }

  Value v;
  v.kind = Value::Kind::string;
  v.s = token;
  return v;
}

std::int64_t as_int(const Value& v, const std::string& key, int line) {
  if (v.kind != Value::Kind::integer) semantic_error("key '" + key + "' expects an integer", line);
  return v.i;
}

double as_real(const Value& v, const std::string& key, int line) {
  if (v.kind != Value::Kind::integer && v.kind != Value::Kind::real) {
    semantic_error("key '" + key + "' expects a number", line);
  }
  return v.d;
}

bool as_bool(const Value& v, const std::string& key, int line) {
  if (v.kind != Value::Kind::boolean) semantic_error("key '" + key + "' expects true/false", line);
  return v.b;
}

std::string as_string(const Value& v, const std::string& key, int line) {
  if (v.kind != Value::Kind::string) semantic_error("key '" + key + "' expects a string", line);
  return v.s;
}

std::vector<std::string> as_string_list(const Value& v, const std::string& key, int line) {
  if (v.kind != Value::Kind::list) semantic_error("key '" + key + "' expects a list", line);
  std::vector<std::string> out;
  for (const auto& item : v.items) out.push_back(as_string(item, key, line));
  return out;
}

std::vector<int> as_int_list(const Value& v, const std::string& key, int line) {
  if (v.kind != Value::Kind::list) semantic_error("key '" + key + "' expects a list", line);
  std::vector<int> out;
  for (const auto& item : v.items) out.push_back(static_cast<int>(as_int(item, key, line)));
  return out;
}

template <class Enum>
Enum parse_enum(const Value& v, const std::string& key, int line,
                const std::vector<std::pair<std::string, Enum>>& table) {
  const std::string s = as_string(v, key, line);
  for (const auto& [name, value] : table) {
    if (name == s) return value;
  }
  std::string valid;
  for (const auto& [name, value] : table) {
    if (!valid.empty()) valid += ", ";
    valid += name;
  }
  semantic_error("key '" + key + "' has invalid value '" + s + "' (one of: " + valid + ")", line);
}

const std::vector<std::pair<std::string, SplitType>> kSplitTypes = {
    {"iid", SplitType::iid}, {"dir", SplitType::dir}, {"shard", SplitType::shard}, {"hdir", SplitType::hdir}};
const std::vector<std::pair<std::string, AggregatorKind>> kAggregators = {
    {"fedavg", AggregatorKind::fedavg}, {"fedyogi", AggregatorKind::fedyogi}};
const std::vector<std::pair<std::string, ExchangeMode>> kExchanges = {
    {"full", ExchangeMode::full}, {"partial", ExchangeMode::partial}};
const std::vector<std::pair<std::string, WorkflowKind>> kWorkflows = {
    {"standard", WorkflowKind::standard},
    {"semi_server", WorkflowKind::semi_server},
    {"continual", WorkflowKind::continual},
    {"split", WorkflowKind::split},
    {"clustered", WorkflowKind::clustered}};
const std::vector<std::pair<std::string, TestMode>> kTestModes = {
    {"test_in_client", TestMode::test_in_client}, {"test_in_server", TestMode::test_in_server}};
const std::vector<std::pair<std::string, OptimizerType>> kOptimizers = {{"sgd", OptimizerType::sgd}};

const std::set<std::string> kSections = {"data",      "server", "client", "client.optimizer",
                                         "model",     "semi",   "continual", "drift",
                                         "clustered"};

void assign(TaskConfig& c, const std::string& section, const std::string& key, const Value& v,
            int line) {
  const std::string full = section.empty() ? key : section + "." + key;

  if (section.empty()) {
    if (key == "workflow") {
      c.workflow = parse_enum(v, full, line, kWorkflows);
    } else if (key == "num_clusters") {
      c.num_clusters = static_cast<int>(as_int(v, full, line));
    } else if (key == "test_mode") {
      c.test_mode = parse_enum(v, full, line, kTestModes);
    } else {
      semantic_error("unknown key '" + full + "'", line);
    }
    return;
  }

  if (section == "data") {
    if (key == "dataset") c.data.dataset = as_string(v, full, line);
    else if (key == "split_type") c.data.split_type = parse_enum(v, full, line, kSplitTypes);
    else if (key == "num_of_clients") c.data.num_of_clients = static_cast<int>(as_int(v, full, line));
    else if (key == "alpha") c.data.alpha = as_real(v, full, line);
    else if (key == "shards_per_client") c.data.shards_per_client = static_cast<int>(as_int(v, full, line));
    else if (key == "main_attribute") c.data.main_attribute = as_string(v, full, line);
    else if (key == "seed") c.data.seed = static_cast<std::uint64_t>(as_int(v, full, line));
    else if (key == "classes") c.data.classes = static_cast<int>(as_int(v, full, line));
    else if (key == "samples_per_class") c.data.samples_per_class = static_cast<int>(as_int(v, full, line));
    else if (key == "features") c.data.features = static_cast<int>(as_int(v, full, line));
    else if (key == "domains") c.data.domains = static_cast<int>(as_int(v, full, line));
    else semantic_error("unknown key '" + full + "'", line);
  } else if (section == "server") {
    if (key == "rounds") c.server.rounds = static_cast<int>(as_int(v, full, line));
    else if (key == "clients_per_round") c.server.clients_per_round = static_cast<int>(as_int(v, full, line));
    else if (key == "aggregator") c.server.aggregator = parse_enum(v, full, line, kAggregators);
    else if (key == "test_every") c.server.test_every = static_cast<int>(as_int(v, full, line));
    else if (key == "server_lr") c.server.server_lr = as_real(v, full, line);
    else if (key == "beta1") c.server.beta1 = as_real(v, full, line);
    else if (key == "beta2") c.server.beta2 = as_real(v, full, line);
    else if (key == "tau") c.server.tau = as_real(v, full, line);
    else if (key == "round_deadline") c.server.round_deadline = as_real(v, full, line);
    else semantic_error("unknown key '" + full + "'", line);
  } else if (section == "client") {
    if (key == "local_epoch") c.client.local_epoch = static_cast<int>(as_int(v, full, line));
    else if (key == "batch_size") c.client.batch_size = static_cast<int>(as_int(v, full, line));
    else if (key == "proximal_mu") c.client.proximal_mu = as_real(v, full, line);
    else semantic_error("unknown key '" + full + "'", line);
  } else if (section == "client.optimizer") {
    if (key == "type") c.client.optimizer.type = parse_enum(v, full, line, kOptimizers);
    else if (key == "lr") c.client.optimizer.lr = as_real(v, full, line);
    else if (key == "momentum") c.client.optimizer.momentum = as_real(v, full, line);
    else if (key == "weight_decay") c.client.optimizer.weight_decay = as_real(v, full, line);
    else semantic_error("unknown key '" + full + "'", line);
  } else if (section == "model") {
    if (key == "name") c.model.name = as_string(v, full, line);
    else if (key == "exchange") c.model.exchange = parse_enum(v, full, line, kExchanges);
    else if (key == "partial_blocks") c.model.partial_blocks = as_string_list(v, full, line);
    else if (key == "split_layer") c.model.split_layer = static_cast<int>(as_int(v, full, line));
    else if (key == "hidden_layers") c.model.hidden_layers = as_int_list(v, full, line);
    else semantic_error("unknown key '" + full + "'", line);
  } else if (section == "semi") {
    if (key == "pseudo_label_threshold") c.semi.pseudo_label_threshold = as_real(v, full, line);
    else if (key == "warmup_rounds") c.semi.warmup_rounds = static_cast<int>(as_int(v, full, line));
    else if (key == "server_labels_per_class") c.semi.server_labels_per_class = static_cast<int>(as_int(v, full, line));
    else if (key == "finetune_epochs") c.semi.finetune_epochs = static_cast<int>(as_int(v, full, line));
    else semantic_error("unknown key '" + full + "'", line);
  } else if (section == "continual") {
    if (key == "num_tasks") c.continual.num_tasks = static_cast<int>(as_int(v, full, line));
    else if (key == "rounds_per_task") c.continual.rounds_per_task = static_cast<int>(as_int(v, full, line));
    else if (key == "replay_fraction") c.continual.replay_fraction = as_real(v, full, line);
    else semantic_error("unknown key '" + full + "'", line);
  } else if (section == "drift") {
    if (key == "threshold") c.drift.threshold = as_real(v, full, line);
    else semantic_error("unknown key '" + full + "'", line);
  } else if (section == "clustered") {
    if (key == "finetune_eval") c.clustered.finetune_eval = as_bool(v, full, line);
    else semantic_error("unknown key '" + full + "'", line);
  } else {
    semantic_error("unknown section '" + section + "'", line);
  }
}

// Shortest decimal rendering that exactly round-trips the double.
std::string format_real(double v) {
  char buf[40];
  for (int precision : {15, 16, 17}) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace

std::string to_string(SplitType v) {
  switch (v) {
    case SplitType::iid: return "iid";
    case SplitType::dir: return "dir";
    case SplitType::shard: return "shard";
    case SplitType::hdir: return "hdir";
  }
  return "?";
}
std::string to_string(AggregatorKind v) {
  return v == AggregatorKind::fedavg ? "fedavg" : "fedyogi";
}
std::string to_string(ExchangeMode v) { return v == ExchangeMode::full ? "full" : "partial"; }
std::string to_string(WorkflowKind v) {
  switch (v) {
    case WorkflowKind::standard: return "standard";
    case WorkflowKind::semi_server: return "semi_server";
    case WorkflowKind::continual: return "continual";
    case WorkflowKind::split: return "split";
    case WorkflowKind::clustered: return "clustered";
  }
  return "?";
}
std::string to_string(TestMode v) {
  return v == TestMode::test_in_client ? "test_in_client" : "test_in_server";
}
std::string to_string(OptimizerType) { return "sgd"; }

TaskConfig parse_config(std::string_view source) {
  TaskConfig config;
  std::string section;
  std::set<std::string> seen_keys;

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= source.size()) {
    const std::size_t eol = source.find('\n', pos);
    std::string_view raw = source.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    ++line_no;

    // Strip comments, respecting quoted strings.
    bool in_string = false;
    std::size_t cut = raw.size();
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == '"' && (i == 0 || raw[i - 1] != '\\')) in_string = !in_string;
      if (raw[i] == '#' && !in_string) {
        cut = i;
        break;
      }
    }
    std::string_view body = trim(raw.substr(0, cut));

    if (!body.empty()) {
      if (body.front() == '[') {
        if (body.back() != ']') syntax_error("unterminated section header", line_no, 1);
        std::string name(trim(body.substr(1, body.size() - 2)));
        if (name.empty()) syntax_error("empty section name", line_no, 1);
        if (!kSections.count(name)) semantic_error("unknown section '" + name + "'", line_no);
        section = name;
      } else {
        const std::size_t eq = body.find('=');
        if (eq == std::string_view::npos) syntax_error("expected 'key = value'", line_no, 1);
        std::string key(trim(body.substr(0, eq)));
        if (key.empty()) syntax_error("empty key", line_no, 1);
        for (char ch : key) {
          if (!is_bare_char(ch)) syntax_error("invalid key character", line_no, 1);
        }
        const std::string full = section.empty() ? key : section + "." + key;
        if (!seen_keys.insert(full).second) {
          semantic_error("duplicate key '" + full + "'", line_no);
        }
        const int value_col = static_cast<int>(raw.find('=') + 2);
        const Value value = parse_value(body.substr(eq + 1), line_no, value_col);
        assign(config, section, key, value, line_no);
      }
    }

    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }

  validate_config(config);
  return config;
}

void validate_config(const TaskConfig& c) {
  auto fail = [](const std::string& invariant) { semantic_error("invariant violated: " + invariant); };

  if (c.data.num_of_clients < 1) fail("num_of_clients >= 1");
  if (c.server.clients_per_round) {
    if (*c.server.clients_per_round < 1) fail("clients_per_round >= 1");
    if (*c.server.clients_per_round > c.data.num_of_clients) {
      fail("clients_per_round <= num_of_clients");
    }
  }
  if (c.server.rounds < 1) fail("rounds >= 1");
  if (c.server.test_every < 1) fail("test_every >= 1");
  if (c.client.local_epoch < 1) fail("local_epoch >= 1");
  if (c.client.batch_size < 1) fail("batch_size >= 1");
  if (!(c.data.alpha > 0)) fail("alpha > 0");
  if (c.data.shards_per_client < 1) fail("shards_per_client >= 1");
  if (c.data.classes < 2) fail("classes >= 2");
  if (c.data.samples_per_class < 1) fail("samples_per_class >= 1");
  if (c.data.features < 1) fail("features >= 1");
  if (c.data.domains < 1) fail("domains >= 1");
  if (!(c.client.optimizer.lr > 0)) fail("optimizer.lr > 0");
  if (c.client.optimizer.momentum < 0 || c.client.optimizer.momentum >= 1) {
    fail("optimizer.momentum in [0, 1)");
  }
  if (c.client.optimizer.weight_decay < 0) fail("optimizer.weight_decay >= 0");
  if (c.client.proximal_mu < 0) fail("proximal_mu >= 0");

  const bool partial = c.model.exchange == ExchangeMode::partial;
  if (partial && c.model.partial_blocks.empty()) {
    fail("partial_blocks nonempty iff exchange = partial");
  }
  if (!partial && !c.model.partial_blocks.empty()) {
    fail("partial_blocks nonempty iff exchange = partial");
  }
  const bool split = c.workflow == WorkflowKind::split;
  if (split && !c.model.split_layer) fail("split_layer set iff workflow = split");
  if (!split && c.model.split_layer) fail("split_layer set iff workflow = split");
  if (c.model.split_layer && *c.model.split_layer < 1) fail("split_layer >= 1");
  for (int width : c.model.hidden_layers) {
    if (width < 1) fail("hidden_layers entries >= 1");
  }

  if (c.num_clusters < 1) fail("num_clusters >= 1");
  if (!(c.server.server_lr > 0)) fail("server_lr > 0");
  if (c.server.beta1 < 0 || c.server.beta1 >= 1) fail("beta1 in [0, 1)");
  if (c.server.beta2 < 0 || c.server.beta2 >= 1) fail("beta2 in [0, 1)");
  if (!(c.server.tau > 0)) fail("tau > 0");
  if (c.server.round_deadline < 0) fail("round_deadline >= 0");

  if (c.semi.pseudo_label_threshold < 0 || c.semi.pseudo_label_threshold > 1) {
    fail("pseudo_label_threshold in [0, 1]");
  }
  if (c.semi.warmup_rounds < 0) fail("warmup_rounds >= 0");
  if (c.semi.server_labels_per_class < 1) fail("server_labels_per_class >= 1");
  if (c.semi.finetune_epochs < 1) fail("finetune_epochs >= 1");

  if (c.continual.num_tasks < 1) fail("num_tasks >= 1");
  if (c.continual.num_tasks > c.data.classes) fail("num_tasks <= classes");
  if (c.continual.rounds_per_task < 0) fail("rounds_per_task >= 0");
  if (c.continual.replay_fraction < 0 || c.continual.replay_fraction > 1) {
    fail("replay_fraction in [0, 1]");
  }

  if (!(c.drift.threshold > 0) || c.drift.threshold > std::log(2.0) + 1e-12) {
    fail("drift.threshold in (0, ln 2]");
  }
}

std::string serialize_config(const TaskConfig& c) {
  std::ostringstream os;
  auto kv = [&](const char* key, const std::string& v) { os << key << " = " << v << "\n"; };
  auto kvs = [&](const char* key, const std::string& v) { os << key << " = \"" << v << "\"\n"; };
  auto kvi = [&](const char* key, long long v) { os << key << " = " << v << "\n"; };
  auto kvr = [&](const char* key, double v) { os << key << " = " << format_real(v) << "\n"; };

  kv("workflow", to_string(c.workflow));
  kvi("num_clusters", c.num_clusters);
  kv("test_mode", to_string(c.test_mode));

  os << "\n[data]\n";
  kvs("dataset", c.data.dataset);
  kv("split_type", to_string(c.data.split_type));
  kvi("num_of_clients", c.data.num_of_clients);
  kvr("alpha", c.data.alpha);
  kvi("shards_per_client", c.data.shards_per_client);
  kvs("main_attribute", c.data.main_attribute);
  kvi("seed", static_cast<long long>(c.data.seed));
  kvi("classes", c.data.classes);
  kvi("samples_per_class", c.data.samples_per_class);
  kvi("features", c.data.features);
  kvi("domains", c.data.domains);

  os << "\n[server]\n";
  kvi("rounds", c.server.rounds);
  if (c.server.clients_per_round) kvi("clients_per_round", *c.server.clients_per_round);
  kv("aggregator", to_string(c.server.aggregator));
  kvi("test_every", c.server.test_every);
  kvr("server_lr", c.server.server_lr);
  kvr("beta1", c.server.beta1);
  kvr("beta2", c.server.beta2);
  kvr("tau", c.server.tau);
  kvr("round_deadline", c.server.round_deadline);

  os << "\n[client]\n";
  kvi("local_epoch", c.client.local_epoch);
  kvi("batch_size", c.client.batch_size);
  kvr("proximal_mu", c.client.proximal_mu);

  os << "\n[client.optimizer]\n";
  kv("type", to_string(c.client.optimizer.type));
  kvr("lr", c.client.optimizer.lr);
  kvr("momentum", c.client.optimizer.momentum);
  kvr("weight_decay", c.client.optimizer.weight_decay);

  os << "\n[model]\n";
  kvs("name", c.model.name);
  kv("exchange", to_string(c.model.exchange));
  os << "partial_blocks = [";
  for (std::size_t i = 0; i < c.model.partial_blocks.size(); ++i) {
    os << (i ? ", " : "") << '"' << c.model.partial_blocks[i] << '"';
  }
  os << "]\n";
  if (c.model.split_layer) kvi("split_layer", *c.model.split_layer);
  os << "hidden_layers = [";
  for (std::size_t i = 0; i < c.model.hidden_layers.size(); ++i) {
    os << (i ? ", " : "") << c.model.hidden_layers[i];
  }
  os << "]\n";

  os << "\n[semi]\n";
  kvr("pseudo_label_threshold", c.semi.pseudo_label_threshold);
  kvi("warmup_rounds", c.semi.warmup_rounds);
  kvi("server_labels_per_class", c.semi.server_labels_per_class);
  kvi("finetune_epochs", c.semi.finetune_epochs);

  os << "\n[continual]\n";
  kvi("num_tasks", c.continual.num_tasks);
  kvi("rounds_per_task", c.continual.rounds_per_task);
  kvr("replay_fraction", c.continual.replay_fraction);

  os << "\n[drift]\n";
  kvr("threshold", c.drift.threshold);

  os << "\n[clustered]\n";
  kv("finetune_eval", c.clustered.finetune_eval ? "true" : "false");

  return os.str();
}

}  // namespace fedsim

#include "fedsim/message.hpp"

#include "fedsim/wire.hpp"

namespace fedsim {
namespace {

void write_matrix(ByteWriter& w, const FeatureMatrix& m) {
  w.u64(static_cast<std::uint64_t>(m.rows()));
  w.u64(static_cast<std::uint64_t>(m.cols()));
  w.f32_array(std::span<const float>(m.data(), static_cast<std::size_t>(m.size())));
}

FeatureMatrix read_matrix(ByteReader& r) {
  const std::uint64_t rows = r.u64();
  const std::uint64_t cols = r.u64();
  FeatureMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f32();
  return m;
}

void write_directives(ByteWriter& w, const DirectiveMap& map) {
  w.u32(static_cast<std::uint32_t>(map.size()));
  for (const auto& [key, value] : map) {
    w.str(key);
    w.blob(value);
  }
}

DirectiveMap read_directives(ByteReader& r) {
  DirectiveMap map;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string key = r.str();
    map[std::move(key)] = r.blob();
  }
  return map;
}

bool is_valid_kind(std::uint8_t kind) { return kind <= static_cast<std::uint8_t>(MsgKind::Stop); }

}  // namespace

const char* to_string(MsgKind kind) {
  switch (kind) {
    case MsgKind::Register: return "REGISTER";
    case MsgKind::Plan: return "PLAN";
    case MsgKind::Upload: return "UPLOAD";
    case MsgKind::EvalResult: return "EVAL_RESULT";
    case MsgKind::Activations: return "ACTIVATIONS";
    case MsgKind::ActGrads: return "ACT_GRADS";
    case MsgKind::DriftNotice: return "DRIFT_NOTICE";
    case MsgKind::Stop: return "STOP";
  }
  return "?";
}

std::vector<std::uint8_t> message_encode(const Message& message) {
  if ((message.kind == MsgKind::Register || message.kind == MsgKind::Stop) &&
      message.round_index != 0) {
    throw std::invalid_argument("message: REGISTER/STOP must carry round_index 0");
  }
  if (message.kind == MsgKind::Stop) {
    if (!message.body.empty()) throw std::invalid_argument("message: STOP body must be empty");
    return frame_encode(static_cast<std::uint8_t>(message.kind), {});
  }
  ByteWriter w;
  w.u64(message.task_id);
  w.u64(message.round_index);
  w.bytes(message.body);
  return frame_encode(static_cast<std::uint8_t>(message.kind), w.data());
}

Message message_decode(std::span<const std::uint8_t> bytes) {
  const RawFrame frame = frame_decode(bytes);
  if (!is_valid_kind(frame.kind)) {
    throw WireError(WireFault::bad_kind, "unknown message kind " + std::to_string(frame.kind));
  }
  Message message;
  message.kind = static_cast<MsgKind>(frame.kind);
  if (message.kind == MsgKind::Stop) {
    if (!frame.payload.empty()) {
      throw WireError(WireFault::truncated, "STOP payload must be empty");
    }
    return message;
  }
  ByteReader r(frame.payload);
  message.task_id = r.u64();
  message.round_index = r.u64();
  auto rest = r.take(r.remaining());
  message.body.assign(rest.begin(), rest.end());
  if (message.kind == MsgKind::Register && message.round_index != 0) {
    throw WireError(WireFault::truncated, "REGISTER must carry round_index 0");
  }
  return message;
}

std::vector<std::uint8_t> encode_body(const RegisterBody& body) {
  ByteWriter w;
  w.u32(body.client_id);
  w.str(body.address);
  return w.take();
}

RegisterBody decode_register(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  RegisterBody body;
  body.client_id = r.u32();
  body.address = r.str();
  r.expect_done();
  return body;
}

std::vector<std::uint8_t> encode_body(const PlanBody& body) {
  ByteWriter w;
  write_directives(w, body.directives);
  w.u32(static_cast<std::uint32_t>(body.models.size()));
  for (const auto& model : body.models) w.blob(encode_parameter_set(model));
  return w.take();
}

PlanBody decode_plan(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  PlanBody body;
  body.directives = read_directives(r);
  const std::uint32_t models = r.u32();
  for (std::uint32_t i = 0; i < models; ++i) {
    body.models.push_back(decode_parameter_set(r.blob()));
  }
  r.expect_done();
  return body;
}

std::vector<std::uint8_t> encode_body(const UploadBody& body) {
  ByteWriter w;
  w.u32(body.client_id);
  w.i64(body.num_samples);
  w.f64(body.train_loss);
  w.u8(body.cluster_id ? 1 : 0);
  if (body.cluster_id) w.u32(static_cast<std::uint32_t>(*body.cluster_id));
  w.u32(static_cast<std::uint32_t>(body.metrics.size()));
  for (const auto& metric : body.metrics) {
    w.str(metric.name);
    w.f64(metric.value);
    w.f64(metric.wall_time);
  }
  w.blob(encode_parameter_set(body.parameters));
  return w.take();
}

UploadBody decode_upload(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  UploadBody body;
  body.client_id = r.u32();
  body.num_samples = r.i64();
  body.train_loss = r.f64();
  if (r.u8() != 0) body.cluster_id = static_cast<int>(r.u32());
  const std::uint32_t metrics = r.u32();
  for (std::uint32_t i = 0; i < metrics; ++i) {
    MetricRecord record;
    record.name = r.str();
    record.value = r.f64();
    record.wall_time = r.f64();
    body.metrics.push_back(std::move(record));
  }
  body.parameters = decode_parameter_set(r.blob());
  r.expect_done();
  return body;
}

std::vector<std::uint8_t> encode_body(const EvalResultBody& body) {
  ByteWriter w;
  w.u32(body.client_id);
  w.f64(body.accuracy);
  w.f64(body.loss);
  w.u64(body.n_test);
  return w.take();
}

EvalResultBody decode_eval_result(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  EvalResultBody body;
  body.client_id = r.u32();
  body.accuracy = r.f64();
  body.loss = r.f64();
  body.n_test = r.u64();
  r.expect_done();
  return body;
}

std::vector<std::uint8_t> encode_body(const ActivationsBody& body) {
  ByteWriter w;
  w.u32(body.client_id);
  write_matrix(w, body.activations);
  w.u32(static_cast<std::uint32_t>(body.labels.size()));
  for (int label : body.labels) w.i32(label);
  return w.take();
}

ActivationsBody decode_activations(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  ActivationsBody body;
  body.client_id = r.u32();
  body.activations = read_matrix(r);
  const std::uint32_t labels = r.u32();
  body.labels.resize(labels);
  for (auto& label : body.labels) label = r.i32();
  r.expect_done();
  return body;
}

std::vector<std::uint8_t> encode_body(const ActGradsBody& body) {
  ByteWriter w;
  w.u32(body.client_id);
  write_matrix(w, body.activation_grads);
  w.f64(body.loss);
  return w.take();
}

ActGradsBody decode_act_grads(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  ActGradsBody body;
  body.client_id = r.u32();
  body.activation_grads = read_matrix(r);
  body.loss = r.f64();
  r.expect_done();
  return body;
}

std::vector<std::uint8_t> encode_body(const DriftNoticeBody& body) {
  ByteWriter w;
  w.u32(body.client_id);
  w.f64(body.divergence);
  return w.take();
}

DriftNoticeBody decode_drift_notice(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  DriftNoticeBody body;
  body.client_id = r.u32();
  body.divergence = r.f64();
  r.expect_done();
  return body;
}

void dir_put_str(DirectiveMap& map, const std::string& key, const std::string& value) {
  map[key] = std::vector<std::uint8_t>(value.begin(), value.end());
}

void dir_put_i64(DirectiveMap& map, const std::string& key, std::int64_t value) {
  ByteWriter w;
  w.i64(value);
  map[key] = w.take();
}

void dir_put_f64(DirectiveMap& map, const std::string& key, double value) {
  ByteWriter w;
  w.f64(value);
  map[key] = w.take();
}

void dir_put_i64_list(DirectiveMap& map, const std::string& key,
                      const std::vector<std::int64_t>& values) {
  ByteWriter w;
  w.u64(values.size());
  for (std::int64_t v : values) w.i64(v);
  map[key] = w.take();
}

void dir_put_i32_list(DirectiveMap& map, const std::string& key, const std::vector<int>& values) {
  ByteWriter w;
  w.u64(values.size());
  for (int v : values) w.i32(v);
  map[key] = w.take();
}

void dir_put_matrix(DirectiveMap& map, const std::string& key, const FeatureMatrix& matrix) {
  ByteWriter w;
  write_matrix(w, matrix);
  map[key] = w.take();
}

std::optional<std::string> dir_str(const DirectiveMap& map, const std::string& key) {
  auto it = map.find(key);
  if (it == map.end()) return std::nullopt;
  return std::string(it->second.begin(), it->second.end());
}

std::optional<std::int64_t> dir_i64(const DirectiveMap& map, const std::string& key) {
  auto it = map.find(key);
  if (it == map.end()) return std::nullopt;
  ByteReader r(it->second);
  const std::int64_t v = r.i64();
  r.expect_done();
  return v;
}

std::optional<double> dir_f64(const DirectiveMap& map, const std::string& key) {
  auto it = map.find(key);
  if (it == map.end()) return std::nullopt;
  ByteReader r(it->second);
  const double v = r.f64();
  r.expect_done();
  return v;
}

std::optional<std::vector<std::int64_t>> dir_i64_list(const DirectiveMap& map,
                                                      const std::string& key) {
  auto it = map.find(key);
  if (it == map.end()) return std::nullopt;
  ByteReader r(it->second);
  std::vector<std::int64_t> values(r.u64());
  for (auto& v : values) v = r.i64();
  r.expect_done();
  return values;
}

std::optional<std::vector<int>> dir_i32_list(const DirectiveMap& map, const std::string& key) {
  auto it = map.find(key);
  if (it == map.end()) return std::nullopt;
  ByteReader r(it->second);
  std::vector<int> values(r.u64());
  for (auto& v : values) v = r.i32();
  r.expect_done();
  return values;
}

std::optional<FeatureMatrix> dir_matrix(const DirectiveMap& map, const std::string& key) {
  auto it = map.find(key);
  if (it == map.end()) return std::nullopt;
  ByteReader r(it->second);
  FeatureMatrix m = read_matrix(r);
  r.expect_done();
  return m;
}

}  // namespace fedsim

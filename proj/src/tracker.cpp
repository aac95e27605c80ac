#include "fedsim/tracker.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fedsim {
namespace {

double steady_now() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool lower_is_better(const std::string& name) { return name.find("loss") != std::string::npos; }

void append_line(const std::string& path, const std::string& line) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to metrics file: " + path);
  out << line;
  if (!out) throw std::runtime_error("metrics write failed: " + path);
}

}  // namespace

void Tracker::open_file(const std::string& path) {
  std::lock_guard<std::mutex> lock(mutex_);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open metrics file: " + path);
  path_ = path;
}

double Tracker::clock_seconds() const {
  std::lock_guard<std::mutex> lock(mutex_);
  if (epoch_ == 0.0) epoch_ = steady_now();
  return steady_now() - epoch_;
}

void Tracker::record(MetricRecord record) {
  if (!std::isfinite(record.value)) {
    throw std::invalid_argument("tracker: metric value must be finite (" + record.name + ")");
  }
  for (const std::string* field : {&record.scope, &record.name}) {
    if (field->empty() || field->find_first_of("\t\n") != std::string::npos) {
      throw std::invalid_argument("tracker: scope/name must be nonempty without tabs or newlines");
    }
  }
  std::lock_guard<std::mutex> lock(mutex_);
  if (epoch_ == 0.0) epoch_ = steady_now();
  if (!path_.empty()) append_line(path_, render_record(record));
  records_.push_back(std::move(record));
}

std::string Tracker::render_record(const MetricRecord& r) {
  std::ostringstream os;
  os << "task=" << r.task_id << "\tround=" << r.round_index << "\tscope=" << r.scope
     << "\tname=" << r.name << "\tvalue=" << format_double(r.value)
     << "\twall=" << format_double(r.wall_time) << "\n";
  return os.str();
}

std::vector<MetricRecord> Tracker::records(std::uint64_t task_id) const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::vector<MetricRecord> out;
  for (const auto& record : records_) {
    if (record.task_id == task_id) out.push_back(record);
  }
  return out;
}

RunSummary Tracker::summarize_records(const std::vector<MetricRecord>& records) {
  RunSummary summary;
  double wall_min = 0.0;
  double wall_max = 0.0;
  for (const auto& record : records) {
    auto& stats = summary.metrics[{record.scope, record.name}];
    const bool better = stats.count == 0 ||
                        (lower_is_better(record.name) ? record.value < stats.best
                                                      : record.value > stats.best);
    if (better) {
      stats.best = record.value;
      stats.best_round = record.round_index;
    }
    stats.final_value = record.value;
    stats.final_round = record.round_index;
    ++stats.count;

    if (record.name.rfind("comm_bytes", 0) == 0) {
      summary.total_bytes += static_cast<std::uint64_t>(record.value);
    }
    if (summary.record_count == 0) {
      wall_min = wall_max = record.wall_time;
    } else {
      wall_min = std::min(wall_min, record.wall_time);
      wall_max = std::max(wall_max, record.wall_time);
    }
    ++summary.record_count;
  }
  summary.wall_span_seconds = summary.record_count ? wall_max - wall_min : 0.0;
  return summary;
}

RunSummary Tracker::summarize(std::uint64_t task_id) const {
  return summarize_records(records(task_id));
}

void Tracker::export_to(std::uint64_t task_id, const std::string& path) const {
  const auto task_records = records(task_id);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open export file: " + path);
  for (const auto& record : task_records) out << render_record(record);
  if (!out) throw std::runtime_error("export write failed: " + path);
}

std::vector<MetricRecord> Tracker::import_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics file: " + path);
  std::vector<MetricRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    MetricRecord record;
    std::istringstream fields(line);
    std::string field;
    int index = 0;
    while (std::getline(fields, field, '\t')) {
      const auto eq = field.find('=');
      if (eq == std::string::npos) {
        throw std::runtime_error("metrics parse error at line " + std::to_string(line_no));
      }
      const std::string key = field.substr(0, eq);
      const std::string value = field.substr(eq + 1);
      if (key == "task") record.task_id = std::stoull(value);
      else if (key == "round") record.round_index = std::stoll(value);
      else if (key == "scope") record.scope = value;
      else if (key == "name") record.name = value;
      else if (key == "value") record.value = std::strtod(value.c_str(), nullptr);
      else if (key == "wall") record.wall_time = std::strtod(value.c_str(), nullptr);
      else throw std::runtime_error("metrics parse error: unknown field '" + key + "'");
      ++index;
    }
    if (index != 6) {
      throw std::runtime_error("metrics parse error at line " + std::to_string(line_no) +
                               ": expected 6 fields");
    }
    out.push_back(std::move(record));
  }
  return out;
}

}  // namespace fedsim

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/dataset.hpp"
#include "fedsim/frame.hpp"
#include "fedsim/round_types.hpp"

namespace fedsim {

enum class MsgKind : std::uint8_t {
  Register = 0,
  Plan = 1,
  Upload = 2,
  EvalResult = 3,
  Activations = 4,
  ActGrads = 5,
  DriftNotice = 6,
  Stop = 7,
};

const char* to_string(MsgKind kind);

// Envelope on the wire. The frame payload is [task_id u64][round_index u64]
// [body], except Stop whose payload is empty. Register and Stop always carry
// round_index 0. The body schema is fixed per kind (the *Body structs
// below).
struct Message {
  MsgKind kind = MsgKind::Stop;
  std::uint64_t task_id = 0;
  std::uint64_t round_index = 0;
  std::vector<std::uint8_t> body;

  bool operator==(const Message&) const = default;
};

std::vector<std::uint8_t> message_encode(const Message& message);
Message message_decode(std::span<const std::uint8_t> bytes);

// --- body schemas -----------------------------------------------------------

struct RegisterBody {
  std::uint32_t client_id = 0;
  std::string address;
};

struct PlanBody {
  DirectiveMap directives;
  std::vector<ParameterSet> models;
};

struct UploadBody {
  std::uint32_t client_id = 0;
  std::int64_t num_samples = 0;
  double train_loss = 0.0;
  std::optional<int> cluster_id;
  // name/value/wall triples; the server stamps task, round and scope.
  std::vector<MetricRecord> metrics;
  ParameterSet parameters;
};

struct EvalResultBody {
  std::uint32_t client_id = 0;
  double accuracy = 0.0;
  double loss = 0.0;
  std::uint64_t n_test = 0;
};

struct ActivationsBody {
  std::uint32_t client_id = 0;
  FeatureMatrix activations;
  std::vector<int> labels;
};

struct ActGradsBody {
  std::uint32_t client_id = 0;
  FeatureMatrix activation_grads;
  double loss = 0.0;
};

struct DriftNoticeBody {
  std::uint32_t client_id = 0;
  double divergence = 0.0;
};

std::vector<std::uint8_t> encode_body(const RegisterBody&);
std::vector<std::uint8_t> encode_body(const PlanBody&);
std::vector<std::uint8_t> encode_body(const UploadBody&);
std::vector<std::uint8_t> encode_body(const EvalResultBody&);
std::vector<std::uint8_t> encode_body(const ActivationsBody&);
std::vector<std::uint8_t> encode_body(const ActGradsBody&);
std::vector<std::uint8_t> encode_body(const DriftNoticeBody&);

RegisterBody decode_register(std::span<const std::uint8_t> body);
PlanBody decode_plan(std::span<const std::uint8_t> body);
UploadBody decode_upload(std::span<const std::uint8_t> body);
EvalResultBody decode_eval_result(std::span<const std::uint8_t> body);
ActivationsBody decode_activations(std::span<const std::uint8_t> body);
ActGradsBody decode_act_grads(std::span<const std::uint8_t> body);
DriftNoticeBody decode_drift_notice(std::span<const std::uint8_t> body);

// --- directive helpers ------------------------------------------------------

void dir_put_str(DirectiveMap& map, const std::string& key, const std::string& value);
void dir_put_i64(DirectiveMap& map, const std::string& key, std::int64_t value);
void dir_put_f64(DirectiveMap& map, const std::string& key, double value);
void dir_put_i64_list(DirectiveMap& map, const std::string& key, const std::vector<std::int64_t>& values);
void dir_put_i32_list(DirectiveMap& map, const std::string& key, const std::vector<int>& values);
void dir_put_matrix(DirectiveMap& map, const std::string& key, const FeatureMatrix& matrix);

std::optional<std::string> dir_str(const DirectiveMap& map, const std::string& key);
std::optional<std::int64_t> dir_i64(const DirectiveMap& map, const std::string& key);
std::optional<double> dir_f64(const DirectiveMap& map, const std::string& key);
std::optional<std::vector<std::int64_t>> dir_i64_list(const DirectiveMap& map, const std::string& key);
std::optional<std::vector<int>> dir_i32_list(const DirectiveMap& map, const std::string& key);
std::optional<FeatureMatrix> dir_matrix(const DirectiveMap& map, const std::string& key);

}  // namespace fedsim

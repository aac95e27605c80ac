#pragma once

#include <cstdint>

namespace fedsim {

// Directive keys shared by the round driver and the client runtime.
namespace dirkey {
inline constexpr const char* kPhase = "phase";  // "train" or "eval"
inline constexpr const char* kConfig = "config";
inline constexpr const char* kTrainX = "train_x";
inline constexpr const char* kTrainY = "train_y";
inline constexpr const char* kTestX = "test_x";
inline constexpr const char* kTestY = "test_y";
inline constexpr const char* kModelKind = "model_kind";  // 0 linear, 1 mlp
inline constexpr const char* kModelWidths = "model_widths";
inline constexpr const char* kClientComponent = "client_component";
inline constexpr const char* kTaskIndex = "task_index";
inline constexpr const char* kTaskClasses = "task_classes";
inline constexpr const char* kFinetune = "finetune";
inline constexpr const char* kNumClasses = "n_classes";
}  // namespace dirkey

// Substream salts for seed derivation. Client-side values must match what a
// remote process would derive from the same config, so they live here.
namespace salt {
inline constexpr std::uint64_t kTrain = 0x10;
inline constexpr std::uint64_t kSelect = 0x11;
inline constexpr std::uint64_t kReplay = 0x12;
inline constexpr std::uint64_t kFinetune = 0x13;
inline constexpr std::uint64_t kCluster = 0x14;
inline constexpr std::uint64_t kServerTrain = 0x15;
inline constexpr std::uint64_t kTestPartition = 0x16;
inline constexpr std::uint64_t kSemiSplit = 0x17;
}  // namespace salt

}  // namespace fedsim

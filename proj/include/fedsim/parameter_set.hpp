#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fedsim {

// One named tensor: a shape plus its flat float32 storage. Flattening is
// row-major with respect to `shape`.
struct ParameterBlock {
  std::string name;
  std::vector<std::int64_t> shape;
  Eigen::VectorXf values;

  std::int64_t shape_product() const;
};

// Ordered collection of uniquely named blocks; the unit that is distributed,
// trained, uploaded, aggregated and checkpointed. Immutable after
// construction; build a new set to change values.
class ParameterSet {
 public:
  ParameterSet() = default;
  explicit ParameterSet(std::vector<ParameterBlock> blocks);

  const std::vector<ParameterBlock>& blocks() const { return blocks_; }
  std::size_t block_count() const { return blocks_.size(); }
  bool empty() const { return blocks_.empty(); }

  bool has_block(std::string_view name) const;
  const ParameterBlock& block(std::string_view name) const;
  const ParameterBlock& block(std::size_t index) const { return blocks_.at(index); }

  std::int64_t value_count() const;
  // Footprint of the raw value storage, the figure reported as the model
  // memory metric.
  std::uint64_t byte_footprint() const;

  // New set containing exactly `names`, in this set's block order.
  ParameterSet restricted_to(std::span<const std::string> names) const;

  bool operator==(const ParameterSet& other) const;

 private:
  std::vector<ParameterBlock> blocks_;
};

// True iff names, order and shapes all match element-wise.
bool congruent(const ParameterSet& a, const ParameterSet& b);

struct LinearTerm {
  double coef;
  const ParameterSet* set;
};

// Element-wise sum of coef * set over pairwise congruent inputs. Accumulates
// in double, stores float32.
ParameterSet linear_combine(std::span<const LinearTerm> terms);
ParameterSet linear_combine(std::initializer_list<LinearTerm> terms);

// Binary codec: 5-byte header ("FSPS", version), block directory, then the
// raw little-endian float32 values of every block in order. Bit-exact
// round-trip; also the on-disk checkpoint format.
std::vector<std::uint8_t> encode_parameter_set(const ParameterSet& set);
ParameterSet decode_parameter_set(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::string& path, const ParameterSet& set);
ParameterSet load_checkpoint(const std::string& path);

}  // namespace fedsim

#include "fedsim/parameter_set.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "fedsim/wire.hpp"

namespace fedsim {
namespace {

constexpr char kMagic[4] = {'F', 'S', 'P', 'S'};
constexpr std::uint8_t kVersion = 1;

void check_finite(const ParameterBlock& block) {
  if (!block.values.allFinite()) {
    throw std::invalid_argument("ParameterSet: non-finite values in block '" + block.name + "'");
  }
}

}  // namespace

std::int64_t ParameterBlock::shape_product() const {
  std::int64_t prod = 1;
  for (std::int64_t d : shape) prod *= d;
  return prod;
}

ParameterSet::ParameterSet(std::vector<ParameterBlock> blocks) : blocks_(std::move(blocks)) {
  std::set<std::string_view> names;
  for (const auto& block : blocks_) {
    if (block.shape.empty()) {
      throw std::invalid_argument("ParameterSet: block '" + block.name + "' has empty shape");
    }
    for (std::int64_t d : block.shape) {
      if (d <= 0) throw std::invalid_argument("ParameterSet: non-positive dimension in '" + block.name + "'");
    }
    if (block.shape_product() != block.values.size()) {
      throw std::invalid_argument("ParameterSet: shape/value mismatch in block '" + block.name + "'");
    }
    if (!names.insert(block.name).second) {
      throw std::invalid_argument("ParameterSet: duplicate block name '" + block.name + "'");
    }
    check_finite(block);
  }
}

bool ParameterSet::has_block(std::string_view name) const {
  for (const auto& block : blocks_) {
    if (block.name == name) return true;
  }
  return false;
}

const ParameterBlock& ParameterSet::block(std::string_view name) const {
  for (const auto& block : blocks_) {
    if (block.name == name) return block;
  }
  throw std::out_of_range("ParameterSet: no block named '" + std::string(name) + "'");
}

std::int64_t ParameterSet::value_count() const {
  std::int64_t n = 0;
  for (const auto& block : blocks_) n += block.values.size();
  return n;
}

std::uint64_t ParameterSet::byte_footprint() const {
  return static_cast<std::uint64_t>(value_count()) * sizeof(float);
}

ParameterSet ParameterSet::restricted_to(std::span<const std::string> names) const {
  std::vector<ParameterBlock> kept;
  for (const auto& block : blocks_) {
    for (const auto& name : names) {
      if (block.name == name) {
        kept.push_back(block);
        break;
      }
    }
  }
  if (kept.size() != names.size()) {
    throw std::invalid_argument("ParameterSet: restriction names missing from set");
  }
  return ParameterSet(std::move(kept));
}

bool ParameterSet::operator==(const ParameterSet& other) const {
  if (blocks_.size() != other.blocks_.size()) return false;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& a = blocks_[i];
    const auto& b = other.blocks_[i];
    if (a.name != b.name || a.shape != b.shape) return false;
    if (a.values.size() != b.values.size()) return false;
    for (Eigen::Index j = 0; j < a.values.size(); ++j) {
      if (a.values[j] != b.values[j]) return false;
    }
  }
  return true;
}

bool congruent(const ParameterSet& a, const ParameterSet& b) {
  if (a.block_count() != b.block_count()) return false;
  for (std::size_t i = 0; i < a.block_count(); ++i) {
    if (a.block(i).name != b.block(i).name) return false;
    if (a.block(i).shape != b.block(i).shape) return false;
  }
  return true;
}

ParameterSet linear_combine(std::span<const LinearTerm> terms) {
  if (terms.empty()) throw std::invalid_argument("linear_combine: no terms");
  const ParameterSet& first = *terms.front().set;
  for (const auto& term : terms) {
    if (!congruent(first, *term.set)) {
      throw std::invalid_argument("linear_combine: incongruent parameter sets");
    }
  }
  std::vector<ParameterBlock> out;
  out.reserve(first.block_count());
  for (std::size_t b = 0; b < first.block_count(); ++b) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(first.block(b).values.size());
    for (const auto& term : terms) {
      acc += term.coef * term.set->block(b).values.cast<double>();
    }
    out.push_back({first.block(b).name, first.block(b).shape, acc.cast<float>()});
  }
  return ParameterSet(std::move(out));
}

ParameterSet linear_combine(std::initializer_list<LinearTerm> terms) {
  return linear_combine(std::span<const LinearTerm>(terms.begin(), terms.size()));
}

std::vector<std::uint8_t> encode_parameter_set(const ParameterSet& set) {
  ByteWriter w;
  w.bytes(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(kMagic), 4));
  w.u8(kVersion);
  w.u32(static_cast<std::uint32_t>(set.block_count()));
  for (const auto& block : set.blocks()) {
    w.str(block.name);
    w.u32(static_cast<std::uint32_t>(block.shape.size()));
    for (std::int64_t d : block.shape) w.u64(static_cast<std::uint64_t>(d));
  }
  for (const auto& block : set.blocks()) {
    w.f32_array(std::span<const float>(block.values.data(), static_cast<std::size_t>(block.values.size())));
  }
  return w.take();
}

ParameterSet decode_parameter_set(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto magic = r.take(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw std::invalid_argument("parameter set: bad magic");
  }
  if (r.u8() != kVersion) throw std::invalid_argument("parameter set: unsupported version");
  const std::uint32_t count = r.u32();
  std::vector<ParameterBlock> blocks(count);
  for (auto& block : blocks) {
    block.name = r.str();
    const std::uint32_t ndim = r.u32();
    block.shape.resize(ndim);
    for (auto& d : block.shape) d = static_cast<std::int64_t>(r.u64());
  }
  for (auto& block : blocks) {
    const std::int64_t n = block.shape_product();
    block.values.resize(n);
    for (std::int64_t i = 0; i < n; ++i) block.values[i] = r.f32();
  }
  r.expect_done();
  return ParameterSet(std::move(blocks));
}

void save_checkpoint(const std::string& path, const ParameterSet& set) {
  const auto bytes = encode_parameter_set(set);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint file for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

ParameterSet load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_parameter_set(bytes);
}

}  // namespace fedsim

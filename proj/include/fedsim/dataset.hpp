#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace fedsim {

using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Tabular sample collection with labels, categorical attributes and an
// optional per-sample domain id.
struct Dataset {
  enum class Split { train, test };

  FeatureMatrix features;  // n_samples x n_features
  std::vector<int> labels;  // in [0, num_classes)
  int num_classes = 0;
  std::vector<std::string> attribute_names;
  std::vector<int> attribute_cardinality;          // per attribute
  std::vector<std::vector<int>> attribute_values;  // [attribute][sample]
  std::vector<int> domain_ids;                     // empty or length n_samples
  Split split = Split::train;

  std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
  std::int64_t attribute_count() const { return static_cast<std::int64_t>(attribute_names.size()); }
  int attribute_index(const std::string& name) const;  // -1 if absent

  void validate() const;
};

// Distance between consecutive domain shift vectors; domain d is translated
// by (1 + d / n_features) * kDomainShift along axis (d mod n_features).
inline constexpr float kDomainShift = 2.0f;

// Gaussian class blobs on a radius-4 circle in the first two feature
// dimensions (a line if n_features == 1), unit noise everywhere, per-domain
// affine shifts, and three categorical attributes (cardinalities 4/3/5) so
// the hierarchical split is exercisable. Returns a train/test pair; the test
// half has max(1, n_per_class / 5) samples per class. Deterministic in
// `seed`.
std::pair<Dataset, Dataset> generate_blobs(int n_classes, int n_per_class, int n_features,
                                           int n_domains, std::uint64_t seed);

}  // namespace fedsim

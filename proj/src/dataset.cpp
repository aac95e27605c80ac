#include "fedsim/dataset.hpp"

#include <cmath>
#include <stdexcept>

#include "fedsim/rng.hpp"

namespace fedsim {
namespace {

constexpr std::uint64_t kTrainSalt = 0x7261696eULL;
constexpr std::uint64_t kTestSalt = 0x74657374ULL;

const std::vector<std::vector<double>> kAttributePriors = {
    {0.4, 0.3, 0.2, 0.1},
    {0.5, 0.3, 0.2},
    {0.3, 0.25, 0.2, 0.15, 0.1},
};

int draw_categorical(Rng& rng, const std::vector<double>& probs) {
  double u = rng.uniform();
  for (std::size_t k = 0; k < probs.size(); ++k) {
    u -= probs[k];
    if (u < 0) return static_cast<int>(k);
  }
  return static_cast<int>(probs.size()) - 1;
}

Eigen::VectorXf class_mean(int cls, int n_classes, int n_features) {
  constexpr float radius = 4.0f;
  Eigen::VectorXf mean = Eigen::VectorXf::Zero(n_features);
  if (n_features == 1) {
    const float t = n_classes > 1 ? static_cast<float>(cls) / static_cast<float>(n_classes - 1) : 0.5f;
    mean[0] = radius * (2.0f * t - 1.0f);
  } else {
    const float theta = 2.0f * static_cast<float>(M_PI) * static_cast<float>(cls) /
                        static_cast<float>(n_classes);
    mean[0] = radius * std::cos(theta);
    mean[1] = radius * std::sin(theta);
  }
  return mean;
}

Eigen::VectorXf domain_shift(int domain, int n_features) {
  Eigen::VectorXf shift = Eigen::VectorXf::Zero(n_features);
  shift[domain % n_features] = kDomainShift * (1.0f + static_cast<float>(domain / n_features));
  return shift;
}

Dataset make_split(int n_classes, int n_per_class, int n_features, int n_domains,
                   std::uint64_t seed, Dataset::Split split) {
  const std::int64_t n = static_cast<std::int64_t>(n_classes) * n_per_class;
  Dataset d;
  d.split = split;
  d.num_classes = n_classes;
  d.features.resize(n, n_features);
  d.labels.resize(n);
  d.domain_ids.resize(n);
  d.attribute_names = {"attr0", "attr1", "attr2"};
  for (const auto& prior : kAttributePriors) {
    d.attribute_cardinality.push_back(static_cast<int>(prior.size()));
    d.attribute_values.emplace_back(n);
  }

  Rng rng(seed);
  std::int64_t row = 0;
  for (int cls = 0; cls < n_classes; ++cls) {
    const Eigen::VectorXf mean = class_mean(cls, n_classes, n_features);
    for (int s = 0; s < n_per_class; ++s, ++row) {
      const int domain = n_domains > 1 ? static_cast<int>(rng.below(n_domains)) : 0;
      const Eigen::VectorXf shift =
          n_domains > 1 ? domain_shift(domain, n_features) : Eigen::VectorXf::Zero(n_features);
      for (int f = 0; f < n_features; ++f) {
        d.features(row, f) = mean[f] + shift[f] + static_cast<float>(rng.normal());
      }
      d.labels[row] = cls;
      d.domain_ids[row] = domain;
      for (std::size_t a = 0; a < kAttributePriors.size(); ++a) {
        d.attribute_values[a][row] = draw_categorical(rng, kAttributePriors[a]);
      }
    }
  }

  // Mix the class-major layout so contiguous chunks are not class-sorted.
  auto perm = rng.permutation(n);
  Dataset shuffled = d;
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t src = perm[i];
    shuffled.features.row(i) = d.features.row(src);
    shuffled.labels[i] = d.labels[src];
    shuffled.domain_ids[i] = d.domain_ids[src];
    for (std::size_t a = 0; a < d.attribute_values.size(); ++a) {
      shuffled.attribute_values[a][i] = d.attribute_values[a][src];
    }
  }
  shuffled.validate();
  return shuffled;
}

}  // namespace

int Dataset::attribute_index(const std::string& name) const {
  for (std::size_t a = 0; a < attribute_names.size(); ++a) {
    if (attribute_names[a] == name) return static_cast<int>(a);
  }
  return -1;
}

void Dataset::validate() const {
  const std::int64_t n = size();
  if (features.rows() != n) throw std::invalid_argument("Dataset: feature rows != label count");
  if (num_classes < 2) throw std::invalid_argument("Dataset: num_classes must be >= 2");
  for (int label : labels) {
    if (label < 0 || label >= num_classes) throw std::invalid_argument("Dataset: label out of range");
  }
  if (attribute_values.size() != attribute_names.size() ||
      attribute_cardinality.size() != attribute_names.size()) {
    throw std::invalid_argument("Dataset: attribute table size mismatch");
  }
  for (std::size_t a = 0; a < attribute_values.size(); ++a) {
    if (static_cast<std::int64_t>(attribute_values[a].size()) != n) {
      throw std::invalid_argument("Dataset: attribute column length mismatch");
    }
    for (int v : attribute_values[a]) {
      if (v < 0 || v >= attribute_cardinality[a]) {
        throw std::invalid_argument("Dataset: attribute value out of range");
      }
    }
  }
  if (!domain_ids.empty() && static_cast<std::int64_t>(domain_ids.size()) != n) {
    throw std::invalid_argument("Dataset: domain column length mismatch");
  }
}

std::pair<Dataset, Dataset> generate_blobs(int n_classes, int n_per_class, int n_features,
                                           int n_domains, std::uint64_t seed) {
  if (n_classes < 2 || n_per_class < 1 || n_features < 1 || n_domains < 1) {
    throw std::invalid_argument("generate_blobs: all counts must be positive (classes >= 2)");
  }
  Dataset train = make_split(n_classes, n_per_class, n_features, n_domains,
                             derive_seed(seed, kTrainSalt), Dataset::Split::train);
  Dataset test = make_split(n_classes, std::max(1, n_per_class / 5), n_features, n_domains,
                            derive_seed(seed, kTestSalt), Dataset::Split::test);
  return {std::move(train), std::move(test)};
}

}  // namespace fedsim

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedsim/dataset.hpp"
#include "fedsim/partition.hpp"

namespace fedsim {

namespace detail {
double js_divergence_impl(const double* p, const double* q, Eigen::Index n);
}

// Jensen-Shannon divergence with natural log, so the range is [0, ln 2].
// Inputs must be equal-length probability vectors (each summing to 1 within
// 1e-9); 0 * log(0/x) is treated as 0.
template <class DerivedP, class DerivedQ>
double js_divergence(const Eigen::DenseBase<DerivedP>& p, const Eigen::DenseBase<DerivedQ>& q) {
  const Eigen::VectorXd pv = p.derived().template cast<double>();
  const Eigen::VectorXd qv = q.derived().template cast<double>();
  return detail::js_divergence_impl(pv.data(), qv.data(), pv.size());
}

double js_divergence(const std::vector<double>& p, const std::vector<double>& q);

struct HeterogeneityReport {
  std::string basis;  // "label" or an attribute name
  Eigen::MatrixXd pairwise_js;  // symmetric, zero diagonal, entries in [0, ln 2]
  std::vector<std::int64_t> client_sample_counts;
  double quantity_imbalance_ratio = 1.0;  // max count / min count
  double mean_pairwise_js = 0.0;          // mean over off-diagonal pairs
  int empty_client_repairs = 0;
};

// Pairwise JS over per-client normalized histograms of the chosen basis
// ("label" or an attribute name). Errors on empty clients.
HeterogeneityReport heterogeneity_report(const Partition& partition, const Dataset& d,
                                         const std::string& attribute_or_label);

std::string render_heterogeneity(const HeterogeneityReport& report);
void save_heterogeneity(const std::string& path, const HeterogeneityReport& report);

}  // namespace fedsim

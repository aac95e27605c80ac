#pragma once

#include <Eigen/Core>

namespace fedsim {

// Client-side distribution monitor: a normalized reference histogram and a
// flag threshold in (0, ln 2].
struct DriftState {
  Eigen::VectorXd reference;
  double threshold = 0.2;
};

struct DriftResult {
  bool drifted = false;
  double divergence = 0.0;
};

// Flags iff js_divergence(reference, current) exceeds the threshold. Both
// histograms must be normalized.
DriftResult detect_drift(const DriftState& state, const Eigen::VectorXd& current);

}  // namespace fedsim

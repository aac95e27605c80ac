#include "fedsim/heterogeneity.hpp"

#include <fstream>
#include <sstream>

namespace fedsim {

namespace detail {

double js_divergence_impl(const double* p, const double* q, Eigen::Index n) {
  double sum_p = 0.0;
  double sum_q = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (p[i] < 0 || q[i] < 0) throw std::invalid_argument("js_divergence: negative entry");
    sum_p += p[i];
    sum_q += q[i];
  }
  if (std::abs(sum_p - 1.0) > 1e-9 || std::abs(sum_q - 1.0) > 1e-9) {
    throw std::invalid_argument("js_divergence: inputs must sum to 1");
  }
  double kl_p = 0.0;
  double kl_q = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0) kl_p += p[i] * std::log(p[i] / m);
    if (q[i] > 0) kl_q += q[i] * std::log(q[i] / m);
  }
  const double js = 0.5 * kl_p + 0.5 * kl_q;
  return js < 0 ? 0.0 : js;  // clip float dust at the identity
}

}  // namespace detail

double js_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("js_divergence: length mismatch");
  return detail::js_divergence_impl(p.data(), q.data(), static_cast<Eigen::Index>(p.size()));
}

HeterogeneityReport heterogeneity_report(const Partition& partition, const Dataset& d,
                                         const std::string& attribute_or_label) {
  const int m = static_cast<int>(partition.clients.size());
  int attr = -1;
  if (attribute_or_label != "label") {
    attr = d.attribute_index(attribute_or_label);
    if (attr < 0) {
      throw std::invalid_argument("heterogeneity_report: no attribute '" + attribute_or_label + "'");
    }
  }

  HeterogeneityReport report;
  report.basis = attribute_or_label;
  report.empty_client_repairs = partition.empty_client_repairs;
  report.pairwise_js = Eigen::MatrixXd::Zero(m, m);

  std::vector<Eigen::VectorXd> distributions;
  for (const auto& client : partition.clients) {
    const std::int64_t count = static_cast<std::int64_t>(client.sample_indices.size());
    if (count == 0) {
      throw std::invalid_argument("heterogeneity_report: client " +
                                  std::to_string(client.client_id) + " is empty");
    }
    report.client_sample_counts.push_back(count);
    const auto& histogram = attr < 0 ? client.label_histogram : client.attribute_histograms[attr];
    Eigen::VectorXd dist(histogram.size());
    for (std::size_t k = 0; k < histogram.size(); ++k) {
      dist[static_cast<Eigen::Index>(k)] = static_cast<double>(histogram[k]) / static_cast<double>(count);
    }
    distributions.push_back(std::move(dist));
  }

  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      const double js = js_divergence(distributions[i], distributions[j]);
      report.pairwise_js(i, j) = js;
      report.pairwise_js(j, i) = js;
      total += js;
    }
  }
  if (m > 1) report.mean_pairwise_js = total / (0.5 * m * (m - 1));

  const auto [min_it, max_it] =
      std::minmax_element(report.client_sample_counts.begin(), report.client_sample_counts.end());
  report.quantity_imbalance_ratio = static_cast<double>(*max_it) / static_cast<double>(*min_it);
  return report;
}

std::string render_heterogeneity(const HeterogeneityReport& report) {
  std::ostringstream os;
  os.precision(12);
  const int m = static_cast<int>(report.pairwise_js.rows());
  os << "basis = " << report.basis << "\n";
  os << "num_clients = " << m << "\n";
  os << "mean_pairwise_js = " << report.mean_pairwise_js << "\n";
  os << "quantity_imbalance_ratio = " << report.quantity_imbalance_ratio << "\n";
  os << "empty_client_repairs = " << report.empty_client_repairs << "\n";
  os << "client_sample_counts =";
  for (std::int64_t count : report.client_sample_counts) os << ' ' << count;
  os << "\npairwise_js:\n";
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      os << report.pairwise_js(i, j) << (j + 1 == m ? '\n' : ' ');
    }
  }
  return os.str();
}

void save_heterogeneity(const std::string& path, const HeterogeneityReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open heterogeneity file for writing: " + path);
  out << render_heterogeneity(report);
  if (!out) throw std::runtime_error("heterogeneity write failed: " + path);
}

}  // namespace fedsim

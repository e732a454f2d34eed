#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "psqrnn/model.hpp"
#include "psqrnn/panel.hpp"

namespace psqrnn::testing {

// Central finite differences of a scalar function of a vector.
inline Eigen::VectorXd finite_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                         const Eigen::VectorXd& x, double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x, xm = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    xp(k) = x(k) + h;
    xm(k) = x(k) - h;
    g(k) = (f(xp) - f(xm)) / (2.0 * h);
    xp(k) = x(k);
    xm(k) = x(k);
  }
  return g;
}

// Largest componentwise error relative to max(1, |fd|).
inline double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k)
    worst = std::max(worst, std::abs(a(k) - b(k)) / std::max(1.0, std::abs(b(k))));
  return worst;
}

inline PanelDataset random_panel(std::mt19937_64& rng, std::size_t N, std::size_t T,
                                 std::size_t q, std::size_t p) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < N; ++i) ids.push_back("id" + std::to_string(i));
  std::vector<int> periods;
  for (std::size_t t = 0; t < T; ++t) periods.push_back(2000 + int(t));
  PanelDataset d = PanelDataset::zeros(ids, periods, q, p);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (Eigen::Index r = 0; r < d.y.size(); ++r) d.y.data()[r] = nd(rng);
  for (Eigen::Index r = 0; r < d.z.size(); ++r) d.z.data()[r] = nd(rng);
  for (Eigen::Index r = 0; r < d.x.size(); ++r) d.x.data()[r] = nd(rng);
  return d;
}

inline ModelParameters random_parameters(std::mt19937_64& rng, const ModelSpec& spec,
                                         double scale = 0.7) {
  ModelParameters p = ModelParameters::zeros(spec);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (Eigen::Index k = 0; k < p.beta.size(); ++k) p.beta(k) = u(rng);
  if (uses_linear(spec.kind))
    for (Eigen::Index k = 0; k < p.alpha.size(); ++k) p.alpha(k) = u(rng);
  for (auto& w : p.net.weights)
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = u(rng);
  for (auto& b : p.net.biases)
    for (Eigen::Index k = 0; k < b.size(); ++k) b.data()[k] = u(rng);
  return p;
}

// Sample tau-quantiles in the argmin sense: the closed interval of minimisers
// of the empirical check loss, found by sorting.
struct QuantileInterval {
  double lo = 0.0;
  double hi = 0.0;
  double distance(double v) const { return v < lo ? lo - v : (v > hi ? v - hi : 0.0); }
};

inline QuantileInterval sample_quantile_interval(std::vector<double> ys, double tau) {
  std::sort(ys.begin(), ys.end());
  const double n = static_cast<double>(ys.size());
  const double pos = n * tau;
  const auto k = static_cast<std::size_t>(std::ceil(pos - 1e-12));  // 1-based order statistic
  if (std::abs(pos - std::round(pos)) < 1e-9) {
    const auto m = static_cast<std::size_t>(std::round(pos));
    return {ys[m - 1], ys[std::min(m, ys.size() - 1)]};
  }
  return {ys[k - 1], ys[k - 1]};
}

}  // namespace psqrnn::testing

#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "psqrnn/errors.hpp"

namespace psqrnn {

// Quantile levels tau_k with their composite weights w_k.
class TauGrid {
 public:
  TauGrid() = default;

  TauGrid(std::vector<double> taus, std::vector<double> weights)
      : taus_(std::move(taus)), weights_(std::move(weights)) {
    if (taus_.empty()) throw ConfigurationError("tau grid is empty");
    if (taus_.size() != weights_.size())
      throw ConfigurationError("tau grid: taus and weights differ in length");
    double total = 0.0;
    for (std::size_t k = 0; k < taus_.size(); ++k) {
      if (!(taus_[k] > 0.0 && taus_[k] < 1.0))
        throw ConfigurationError("tau grid: tau " + std::to_string(taus_[k]) +
                                 " outside (0,1)");
      if (k > 0 && !(taus_[k] > taus_[k - 1]))
        throw ConfigurationError("tau grid: taus must be strictly increasing");
      if (!(weights_[k] > 0.0)) throw ConfigurationError("tau grid: weights must be positive");
      total += weights_[k];
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigurationError("tau grid: weights must sum to 1");
  }

  // Equal weights 1/K.
  static TauGrid uniform(std::vector<double> taus) {
    const double w = taus.empty() ? 0.0 : 1.0 / static_cast<double>(taus.size());
    std::vector<double> weights(taus.size(), w);
    return TauGrid(std::move(taus), std::move(weights));
  }

  static TauGrid single(double tau) { return TauGrid({tau}, {1.0}); }

  // tau_k = start + step * k for k = 0..count-1 with equal weights.
  static TauGrid arithmetic(double start, double step, std::size_t count) {
    std::vector<double> taus(count);
    for (std::size_t k = 0; k < count; ++k) taus[k] = start + step * static_cast<double>(k);
    return uniform(std::move(taus));
  }

  // K equally spaced interior levels k/(K+1), k = 1..K.
  static TauGrid equally_spaced(std::size_t count) {
    std::vector<double> taus(count);
    for (std::size_t k = 0; k < count; ++k)
      taus[k] = static_cast<double>(k + 1) / static_cast<double>(count + 1);
    return uniform(std::move(taus));
  }

  std::size_t size() const noexcept { return taus_.size(); }
  bool empty() const noexcept { return taus_.empty(); }
  double tau(std::size_t k) const { return taus_.at(k); }
  double weight(std::size_t k) const { return weights_.at(k); }
  const std::vector<double>& taus() const noexcept { return taus_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

 private:
  std::vector<double> taus_;
  std::vector<double> weights_;
};

class SmoothingThreshold {
 public:
  explicit SmoothingThreshold(double epsilon) : epsilon_(epsilon) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
      throw DomainError("smoothing threshold must be a positive finite number");
  }
  double value() const noexcept { return epsilon_; }

 private:
  double epsilon_;
};

namespace detail {
inline void check_tau(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw DomainError("quantile level must lie in (0,1)");
}
}  // namespace detail

// Check loss u * (tau - 1{u < 0}).
inline double pinball(double u, double tau) {
  detail::check_tau(tau);
  return u < 0.0 ? (tau - 1.0) * u : tau * u;
}

inline double huber(double u, SmoothingThreshold epsilon) {
  const double eps = epsilon.value();
  const double a = std::abs(u);
  return a <= eps ? u * u / (2.0 * eps) : a - eps / 2.0;
}

inline double huber_deriv(double u, SmoothingThreshold epsilon) {
  const double eps = epsilon.value();
  if (u > eps) return 1.0;
  if (u < -eps) return -1.0;
  return u / eps;
}

// Huber-smoothed check loss. The negative branch is weighted by (1 - tau) so
// that the loss stays nonnegative and tracks pinball() within
// max(tau, 1 - tau) * eps / 2.
inline double smoothed_pinball(double u, double tau, SmoothingThreshold epsilon) {
  detail::check_tau(tau);
  const double h = huber(u, epsilon);
  return u >= 0.0 ? tau * h : (1.0 - tau) * h;
}

inline double smoothed_pinball_deriv(double u, double tau, SmoothingThreshold epsilon) {
  detail::check_tau(tau);
  const double eps = epsilon.value();
  if (u > eps) return tau;
  if (u < -eps) return -(1.0 - tau);
  return u >= 0.0 ? tau * u / eps : (1.0 - tau) * u / eps;
}

}  // namespace psqrnn

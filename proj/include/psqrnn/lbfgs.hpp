#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <vector>

namespace psqrnn::optim {

enum class StopReason { GradientTolerance, Stalled, MaxIterations, NonFinite };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::GradientTolerance: return "gradient";
    case StopReason::Stalled: return "stalled";
    case StopReason::MaxIterations: return "max_iters";
    case StopReason::NonFinite: return "non_finite";
  }
  return "unknown";
}

// Returns f(x) and writes grad f(x) into the second argument.
using ValueAndGradient = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct Options {
  std::size_t max_iters = 500;
  double grad_tol = 1e-6;
  std::size_t memory = 10;
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  std::size_t max_backtracks = 60;
  bool record_history = false;
};

struct Result {
  Eigen::VectorXd x;
  double value = 0.0;
  std::size_t iterations = 0;
  StopReason reason = StopReason::MaxIterations;
  std::vector<double> history;  // objective after each accepted step, starting at x0
};

// Limited-memory BFGS with a backtracking line search that enforces the
// Armijo sufficient-decrease condition, so accepted iterates never increase f.
inline Result lbfgs(const ValueAndGradient& fg, Eigen::VectorXd x0, const Options& opt) {
  Result res;
  res.x = std::move(x0);
  const Eigen::Index n = res.x.size();
  Eigen::VectorXd g(n), g_new(n), x_new(n), d(n);
  double f = fg(res.x, g);
  res.value = f;
  if (opt.record_history) res.history.push_back(f);
  if (!std::isfinite(f)) {
    res.reason = StopReason::NonFinite;
    return res;
  }
  if (n == 0) {
    res.reason = StopReason::GradientTolerance;
    return res;
  }

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  std::vector<double> alpha_buf;

  for (std::size_t it = 0; it < opt.max_iters; ++it) {
    if (g.norm() <= opt.grad_tol) {
      res.reason = StopReason::GradientTolerance;
      return res;
    }

    // two-loop recursion
    d = -g;
    const std::size_t m = s_hist.size();
    alpha_buf.assign(m, 0.0);
    for (std::size_t j = m; j-- > 0;) {
      alpha_buf[j] = rho_hist[j] * s_hist[j].dot(d);
      d -= alpha_buf[j] * y_hist[j];
    }
    if (m > 0) d *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t j = 0; j < m; ++j) {
      const double b = rho_hist[j] * y_hist[j].dot(d);
      d += (alpha_buf[j] - b) * s_hist[j];
    }

    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -g;
      slope = -g.squaredNorm();
    }
    double step = s_hist.empty() ? std::min(1.0, 1.0 / std::sqrt(-slope)) : 1.0;

    bool accepted = false;
    double f_new = f;
    for (std::size_t k = 0; k < opt.max_backtracks; ++k) {
      x_new = res.x + step * d;
      f_new = fg(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= f + opt.armijo_c1 * step * slope) {
        accepted = true;
        break;
      }
      step *= opt.backtrack;
    }
    if (!accepted || !(f_new < f)) {
      if (!s_hist.empty()) {
        // retry from steepest descent before giving up
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
        continue;
      }
      res.reason = StopReason::Stalled;
      res.iterations = it;
      return res;
    }

    Eigen::VectorXd s = x_new - res.x;
    Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (s_hist.size() == opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      rho_hist.push_back(1.0 / sy);
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
    }
    res.x.swap(x_new);
    g.swap(g_new);
    f = f_new;
    res.value = f;
    res.iterations = it + 1;
    if (opt.record_history) res.history.push_back(f);
  }
  res.reason = g.norm() <= opt.grad_tol ? StopReason::GradientTolerance : StopReason::MaxIterations;
  return res;
}

// Fixed-step gradient descent. No line search, so descent is not guaranteed.
inline Result gradient_descent(const ValueAndGradient& fg, Eigen::VectorXd x0, double step,
                               const Options& opt) {
  Result res;
  res.x = std::move(x0);
  Eigen::VectorXd g(res.x.size());
  double f = fg(res.x, g);
  res.value = f;
  if (opt.record_history) res.history.push_back(f);
  for (std::size_t it = 0; it < opt.max_iters; ++it) {
    if (!std::isfinite(f)) {
      res.reason = StopReason::NonFinite;
      return res;
    }
    if (g.norm() <= opt.grad_tol) {
      res.reason = StopReason::GradientTolerance;
      return res;
    }
    res.x -= step * g;
    f = fg(res.x, g);
    res.value = f;
    res.iterations = it + 1;
    if (opt.record_history) res.history.push_back(f);
  }
  res.reason = !std::isfinite(f)               ? StopReason::NonFinite
               : g.norm() <= opt.grad_tol ? StopReason::GradientTolerance
                                          : StopReason::MaxIterations;
  return res;
}

}  // namespace psqrnn::optim

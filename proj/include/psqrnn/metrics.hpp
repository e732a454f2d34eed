#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>

#include "psqrnn/errors.hpp"

namespace psqrnn {

// Mean absolute percentage error (1/n) sum |(y - yhat) / y|.
inline double mape(const Eigen::Ref<const Eigen::VectorXd>& actual,
                   const Eigen::Ref<const Eigen::VectorXd>& predicted) {
  if (actual.size() != predicted.size()) throw ShapeError("mape: length mismatch");
  if (actual.size() == 0) throw ShapeError("mape: empty input");
  double s = 0.0;
  for (Eigen::Index k = 0; k < actual.size(); ++k) {
    if (actual(k) == 0.0) throw DomainError("mape: actual value is zero");
    s += std::abs((actual(k) - predicted(k)) / actual(k));
  }
  return s / static_cast<double>(actual.size());
}

// sqrt(sum (y - yhat)^2) / sqrt(sum y^2).
inline double rrmse(const Eigen::Ref<const Eigen::VectorXd>& actual,
                    const Eigen::Ref<const Eigen::VectorXd>& predicted) {
  if (actual.size() != predicted.size()) throw ShapeError("rrmse: length mismatch");
  if (actual.size() == 0) throw ShapeError("rrmse: empty input");
  const double denom = actual.squaredNorm();
  if (!(denom > 0.0)) throw DomainError("rrmse: all actual values are zero");
  return std::sqrt((actual - predicted).squaredNorm()) / std::sqrt(denom);
}

struct ForecastReport {
  Eigen::MatrixXd predictions;             // N x H
  std::optional<Eigen::MatrixXd> actuals;  // N x H
  Eigen::VectorXd mape_by_individual, rrmse_by_individual;
  Eigen::VectorXd mape_by_period, rrmse_by_period;
  double total_mape = 0.0;
  double total_rrmse = 0.0;
  // population (denominator N) moments of the per-individual vectors
  double mape_mean = 0.0, mape_sd = 0.0;
  double rrmse_mean = 0.0, rrmse_sd = 0.0;

  bool has_metrics() const noexcept { return actuals.has_value(); }
};

namespace detail {
inline std::pair<double, double> mean_sd(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  const double var = (v.array() - mean).square().mean();
  return {mean, std::sqrt(var)};
}
}  // namespace detail

inline ForecastReport report(const Eigen::MatrixXd& actuals, const Eigen::MatrixXd& predictions) {
  if (actuals.rows() != predictions.rows() || actuals.cols() != predictions.cols())
    throw ShapeError("report: actuals and predictions differ in shape");
  if (actuals.size() == 0) throw ShapeError("report: empty matrices");
  ForecastReport r;
  r.predictions = predictions;
  r.actuals = actuals;
  const Eigen::Index n = actuals.rows(), h = actuals.cols();
  r.mape_by_individual.resize(n);
  r.rrmse_by_individual.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r.mape_by_individual(i) = mape(actuals.row(i).transpose(), predictions.row(i).transpose());
    r.rrmse_by_individual(i) = rrmse(actuals.row(i).transpose(), predictions.row(i).transpose());
  }
  r.mape_by_period.resize(h);
  r.rrmse_by_period.resize(h);
  for (Eigen::Index t = 0; t < h; ++t) {
    r.mape_by_period(t) = mape(actuals.col(t), predictions.col(t));
    r.rrmse_by_period(t) = rrmse(actuals.col(t), predictions.col(t));
  }
  const Eigen::VectorXd flat_a = actuals.reshaped();
  const Eigen::VectorXd flat_p = predictions.reshaped();
  r.total_mape = mape(flat_a, flat_p);
  r.total_rrmse = rrmse(flat_a, flat_p);
  std::tie(r.mape_mean, r.mape_sd) = detail::mean_sd(r.mape_by_individual);
  std::tie(r.rrmse_mean, r.rrmse_sd) = detail::mean_sd(r.rrmse_by_individual);
  return r;
}

// Prediction-only report (future horizons without ground truth).
inline ForecastReport report(const Eigen::MatrixXd& predictions) {
  ForecastReport r;
  r.predictions = predictions;
  return r;
}

}  // namespace psqrnn

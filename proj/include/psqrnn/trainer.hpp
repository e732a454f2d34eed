#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "psqrnn/errors.hpp"
#include "psqrnn/lbfgs.hpp"
#include "psqrnn/model.hpp"

namespace psqrnn {

// Geometric smoothing schedule eps_start * factor^j, clamped at eps_end.
struct AnnealSchedule {
  double eps_start = std::ldexp(1.0, -8);
  double eps_end = std::ldexp(1.0, -32);
  double factor = std::ldexp(1.0, -4);

  static AnnealSchedule constant(double eps) { return {eps, eps, 0.5}; }

  void validate() const {
    if (!(eps_start > 0.0) || !(eps_end > 0.0) || !std::isfinite(eps_start))
      throw ConfigurationError("anneal schedule: epsilons must be positive");
    if (eps_end > eps_start) throw ConfigurationError("anneal schedule: eps_end exceeds eps_start");
    if (!(factor > 0.0 && factor < 1.0))
      throw ConfigurationError("anneal schedule: factor must lie in (0,1)");
  }
};

inline std::vector<double> epsilon_sequence(const AnnealSchedule& schedule) {
  schedule.validate();
  std::vector<double> out;
  double eps = schedule.eps_start;
  // relative slack so exact powers of two land on eps_end despite rounding
  const double stop = schedule.eps_end * (1.0 + 1e-12);
  while (eps > stop) {
    out.push_back(eps);
    eps *= schedule.factor;
  }
  out.push_back(schedule.eps_end);
  return out;
}

enum class OptimizerKind { QuasiNewton, GradientDescent };

inline std::string_view to_string(OptimizerKind k) {
  return k == OptimizerKind::QuasiNewton ? "lbfgs" : "gd";
}

inline OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "lbfgs") return OptimizerKind::QuasiNewton;
  if (name == "gd") return OptimizerKind::GradientDescent;
  throw ConfigurationError("unknown optimizer '" + std::string(name) + "'");
}

struct TrainConfig {
  AnnealSchedule schedule;
  std::size_t restarts = 5;
  std::size_t max_iters_per_stage = 500;
  double grad_tol = 1e-6;
  std::uint64_t seed = 1;
  OptimizerKind optimizer = OptimizerKind::QuasiNewton;
  double gd_step = 0.05;  // only used by the gradient-descent fallback
  bool record_history = false;

  void validate() const {
    schedule.validate();
    if (restarts < 1) throw ConfigurationError("restarts must be >= 1");
    if (max_iters_per_stage < 1) throw ConfigurationError("max_iters_per_stage must be >= 1");
    if (!(grad_tol > 0.0)) throw ConfigurationError("grad_tol must be positive");
    if (!(gd_step > 0.0)) throw ConfigurationError("gd_step must be positive");
  }
};

struct StageTrace {
  double epsilon = 0.0;
  std::size_t iterations = 0;
  double objective = 0.0;
  std::string stop_reason;
  std::vector<double> history;  // filled when TrainConfig::record_history is set
};

struct FitResult {
  ModelSpec spec;
  TauGrid grid;
  PenaltyConfig penalties;
  ModelParameters params;
  double final_objective = 0.0;
  double final_epsilon = 0.0;
  std::size_t restart_index = 0;
  std::vector<double> restart_objectives;
  std::vector<StageTrace> stage_trace;
  bool converged = false;
};

namespace detail {

inline FitResult fit_one_restart(const PanelDataset& data, const ModelSpec& spec,
                                 const TauGrid& grid, const PenaltyConfig& penalties,
                                 const TrainConfig& config, std::size_t restart) {
  ModelParameters init = ModelParameters::zeros(spec);
  if (uses_network(spec.kind)) init.net = init_parameters(spec.network, config.seed + restart);
  Eigen::VectorXd x = pack(init, spec);

  FitResult out;
  out.spec = spec;
  out.grid = grid;
  out.penalties = penalties;
  out.restart_index = restart;

  const auto eps_values = epsilon_sequence(config.schedule);
  optim::Options opt;
  opt.max_iters = config.max_iters_per_stage;
  opt.grad_tol = config.grad_tol;
  opt.record_history = config.record_history;

  for (std::size_t stage = 0; stage < eps_values.size(); ++stage) {
    const SmoothingThreshold eps(eps_values[stage]);
    auto fg = [&](const Eigen::VectorXd& v, Eigen::VectorXd& g) {
      const auto eval =
          evaluate_objective_gradient(unpack(v, spec), spec, data, grid, penalties, eps);
      g = pack(eval.grad, spec);
      return eval.value;
    };
    const optim::Result r = config.optimizer == OptimizerKind::QuasiNewton
                                ? optim::lbfgs(fg, x, opt)
                                : optim::gradient_descent(fg, x, config.gd_step, opt);
    if (r.reason == optim::StopReason::NonFinite || !std::isfinite(r.value))
      throw TrainingError("objective became non-finite", stage, r.iterations);
    x = r.x;
    out.stage_trace.push_back(
        {eps_values[stage], r.iterations, r.value, optim::to_string(r.reason), r.history});
    out.converged = r.reason != optim::StopReason::MaxIterations;
  }

  out.params = unpack(x, spec);
  out.final_epsilon = eps_values.back();
  out.final_objective = evaluate_objective(out.params, spec, data, grid, penalties,
                                           SmoothingThreshold(out.final_epsilon))
                            .total();
  if (!std::isfinite(out.final_objective))
    throw TrainingError("final objective is not finite", eps_values.size() - 1, 0);
  return out;
}

}  // namespace detail

// Minimises the smoothed objective over an annealing schedule, repeated over
// `config.restarts` random network initialisations (seed + r). beta and alpha
// start at zero; the restart with the lowest final objective wins, ties going
// to the lower restart index.
inline FitResult fit(const PanelDataset& data, const ModelSpec& spec, const TauGrid& grid,
                     const PenaltyConfig& penalties, const TrainConfig& config) {
  if (data.N() < 1 || data.T() < 1) throw DataError("dataset must have N >= 1 and T >= 1");
  config.validate();
  detail::check_inputs(ModelParameters::zeros(spec), spec, data, grid, penalties);

  // Without a network every restart starts from the same zero point.
  const std::size_t runs = uses_network(spec.kind) ? config.restarts : 1;
  FitResult best;
  std::vector<double> objectives;
  for (std::size_t r = 0; r < runs; ++r) {
    FitResult candidate = detail::fit_one_restart(data, spec, grid, penalties, config, r);
    objectives.push_back(candidate.final_objective);
    if (r == 0 || candidate.final_objective < best.final_objective) best = std::move(candidate);
  }
  best.restart_objectives = std::move(objectives);
  return best;
}

inline std::vector<FitResult> fit_per_tau(const PanelDataset& data, const ModelSpec& spec,
                                          const std::vector<double>& taus,
                                          const PenaltyConfig& penalties,
                                          const TrainConfig& config) {
  std::vector<FitResult> out;
  out.reserve(taus.size());
  for (double tau : taus) out.push_back(fit(data, spec, TauGrid::single(tau), penalties, config));
  return out;
}

}  // namespace psqrnn

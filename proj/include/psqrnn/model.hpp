#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>

#include "psqrnn/errors.hpp"
#include "psqrnn/loss.hpp"
#include "psqrnn/network.hpp"
#include "psqrnn/panel.hpp"

namespace psqrnn {

// PSQRNN: z'beta + ANN(x) + alpha_i. LinearPanelQR drops the network, QRNN
// drops the linear part and the fixed effects.
enum class ModelKind { PSQRNN, LinearPanelQR, QRNN };

inline std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::PSQRNN: return "psqrnn";
    case ModelKind::LinearPanelQR: return "linear";
    case ModelKind::QRNN: return "qrnn";
  }
  throw ConfigurationError("unknown model kind");
}

inline ModelKind parse_model_kind(std::string_view name) {
  if (name == "psqrnn") return ModelKind::PSQRNN;
  if (name == "linear") return ModelKind::LinearPanelQR;
  if (name == "qrnn") return ModelKind::QRNN;
  throw ConfigurationError("unknown model kind '" + std::string(name) + "'");
}

inline bool uses_network(ModelKind kind) { return kind != ModelKind::LinearPanelQR; }
inline bool uses_linear(ModelKind kind) { return kind != ModelKind::QRNN; }

// Structural description of a model: kind plus dimensions. The network spec
// is empty for LinearPanelQR.
struct ModelSpec {
  ModelKind kind = ModelKind::PSQRNN;
  NetworkSpec network;
  std::size_t q = 0;
  std::size_t n_individuals = 0;

  static ModelSpec make(ModelKind kind, NetworkSpec network, std::size_t q, std::size_t n) {
    ModelSpec s;
    s.kind = kind;
    s.network = uses_network(kind) ? std::move(network) : NetworkSpec{};
    s.q = uses_linear(kind) ? q : 0;
    s.n_individuals = n;
    if (uses_network(kind)) s.network.validate();
    return s;
  }

  static ModelSpec for_dataset(ModelKind kind, const std::vector<std::size_t>& hidden,
                               const PanelDataset& data, Activation act = Activation::ELU) {
    NetworkSpec net;
    net.input_dim = data.p();
    net.hidden_sizes = hidden;
    net.activation = act;
    return make(kind, std::move(net), data.q(), data.N());
  }
};

struct ModelParameters {
  Eigen::VectorXd beta;
  Eigen::VectorXd alpha;
  NetworkParameters net;

  static ModelParameters zeros(const ModelSpec& spec) {
    ModelParameters p;
    p.beta = Eigen::VectorXd::Zero(Eigen::Index(spec.q));
    p.alpha = Eigen::VectorXd::Zero(Eigen::Index(spec.n_individuals));
    p.net = NetworkParameters::zeros(spec.network);
    return p;
  }

  bool operator==(const ModelParameters& o) const {
    return beta.size() == o.beta.size() && beta == o.beta && alpha.size() == o.alpha.size() &&
           alpha == o.alpha && net == o.net;
  }
};

struct PenaltyConfig {
  double lambda1 = 0.0;
  double lambda2 = 0.0;

  void validate() const {
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0))
      throw ConfigurationError("penalties must be nonnegative");
  }
};

namespace detail {

inline void check_params(const ModelParameters& params, const ModelSpec& spec) {
  if (params.beta.size() != Eigen::Index(spec.q))
    throw ShapeError("beta has length " + std::to_string(params.beta.size()) + ", expected " +
                     std::to_string(spec.q));
  if (params.alpha.size() != Eigen::Index(spec.n_individuals))
    throw ShapeError("alpha has length " + std::to_string(params.alpha.size()) + ", expected " +
                     std::to_string(spec.n_individuals));
  detail::check_shapes(params.net, spec.network);
}

inline void check_dataset(const ModelSpec& spec, const PanelDataset& data) {
  if (data.N() != spec.n_individuals)
    throw ShapeError("dataset has " + std::to_string(data.N()) + " individuals, model expects " +
                     std::to_string(spec.n_individuals));
  if (uses_linear(spec.kind) && data.q() != spec.q)
    throw ShapeError("dataset has " + std::to_string(data.q()) +
                     " parametric covariates, model expects " + std::to_string(spec.q));
  if (uses_network(spec.kind) && data.p() != spec.network.input_dim)
    throw ShapeError("dataset has " + std::to_string(data.p()) +
                     " network covariates, model expects " + std::to_string(spec.network.input_dim));
}

}  // namespace detail

inline double predict(const ModelParameters& params, const ModelSpec& spec,
                      const Eigen::Ref<const Eigen::VectorXd>& z,
                      const Eigen::Ref<const Eigen::VectorXd>& x, std::size_t individual) {
  detail::check_params(params, spec);
  if (individual >= spec.n_individuals)
    throw LookupError("individual index " + std::to_string(individual) + " out of range");
  double out = 0.0;
  if (uses_linear(spec.kind)) {
    if (z.size() != Eigen::Index(spec.q)) throw ShapeError("parametric covariate length mismatch");
    out += z.dot(params.beta) + params.alpha(Eigen::Index(individual));
  }
  if (uses_network(spec.kind)) out += forward(params.net, spec.network, x);
  return out;
}

// Predictions for every cell of the panel, row = i * T + t.
inline Eigen::VectorXd predict_panel(const ModelParameters& params, const ModelSpec& spec,
                                     const PanelDataset& data) {
  detail::check_params(params, spec);
  detail::check_dataset(spec, data);
  const Eigen::Index nt = Eigen::Index(data.cells());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(nt);
  if (uses_linear(spec.kind)) {
    if (spec.q > 0) out.noalias() += data.z * params.beta;
    for (std::size_t i = 0; i < data.N(); ++i)
      out.segment(data.row(i, 0), Eigen::Index(data.T())).array() += params.alpha(Eigen::Index(i));
  }
  if (uses_network(spec.kind)) out += NetworkTape(params.net, spec.network, data.x).output();
  return out;
}

namespace detail {

// Composite smoothed check loss and its derivative with respect to each
// residual, both already scaled by 1/(K N T).
struct LossTerm {
  double value = 0.0;
  Eigen::VectorXd dresidual;
};

inline LossTerm composite_loss(const Eigen::Ref<const Eigen::VectorXd>& residual,
                               const TauGrid& grid, SmoothingThreshold eps, bool with_gradient) {
  const double scale =
      1.0 / (static_cast<double>(grid.size()) * static_cast<double>(residual.size()));
  LossTerm out;
  if (with_gradient) out.dresidual = Eigen::VectorXd::Zero(residual.size());
  for (Eigen::Index c = 0; c < residual.size(); ++c) {
    const double u = residual(c);
    double v = 0.0, d = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      v += grid.weight(k) * smoothed_pinball(u, grid.tau(k), eps);
      if (with_gradient) d += grid.weight(k) * smoothed_pinball_deriv(u, grid.tau(k), eps);
    }
    out.value += v;
    if (with_gradient) out.dresidual(c) = scale * d;
  }
  out.value *= scale;
  return out;
}

inline void check_inputs(const ModelParameters& params, const ModelSpec& spec,
                         const PanelDataset& data, const TauGrid& grid,
                         const PenaltyConfig& penalties) {
  if (grid.empty()) throw ConfigurationError("tau grid is empty");
  if (data.has_missing()) throw DataError("dataset has missing cells; impute before fitting");
  penalties.validate();
  check_params(params, spec);
  check_dataset(spec, data);
}

inline Eigen::VectorXd residuals(const ModelParameters& params, const ModelSpec& spec,
                                 const PanelDataset& data) {
  const Eigen::VectorXd pred = predict_panel(params, spec, data);
  Eigen::VectorXd r(pred.size());
  for (std::size_t i = 0; i < data.N(); ++i)
    for (std::size_t t = 0; t < data.T(); ++t)
      r(data.row(i, t)) = data.y(Eigen::Index(i), Eigen::Index(t)) - pred(data.row(i, t));
  return r;
}

inline double hidden_weight_sq(const NetworkParameters& net) {
  double s = 0.0;
  for (std::size_t l = 0; l + 1 < net.weights.size(); ++l) s += net.weights[l].squaredNorm();
  return s;
}

}  // namespace detail

// First term of the objective alone: (1/KNT) sum_k sum_i sum_t w_k rho^eps.
inline double loss_term(const ModelParameters& params, const ModelSpec& spec,
                        const PanelDataset& data, const TauGrid& grid, SmoothingThreshold eps) {
  detail::check_inputs(params, spec, data, grid, PenaltyConfig{});
  return detail::composite_loss(detail::residuals(params, spec, data), grid, eps, false).value;
}

struct ObjectiveValue {
  double loss = 0.0;
  double alpha_penalty = 0.0;
  double weight_penalty = 0.0;
  double total() const noexcept { return loss + alpha_penalty + weight_penalty; }
};

// Unchecked evaluation; may return non-finite values.
inline ObjectiveValue evaluate_objective(const ModelParameters& params, const ModelSpec& spec,
                                         const PanelDataset& data, const TauGrid& grid,
                                         const PenaltyConfig& penalties, SmoothingThreshold eps) {
  ObjectiveValue v;
  v.loss = detail::composite_loss(detail::residuals(params, spec, data), grid, eps, false).value;
  if (uses_linear(spec.kind) && penalties.lambda1 > 0.0) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < params.alpha.size(); ++i) s += huber(params.alpha(i), eps);
    v.alpha_penalty = penalties.lambda1 * s / static_cast<double>(spec.n_individuals);
  }
  const std::size_t n_l = spec.network.hidden_weight_count();
  if (uses_network(spec.kind) && penalties.lambda2 > 0.0 && n_l > 0)
    v.weight_penalty =
        penalties.lambda2 * detail::hidden_weight_sq(params.net) / static_cast<double>(n_l);
  return v;
}

inline double objective(const ModelParameters& params, const ModelSpec& spec,
                        const PanelDataset& data, const TauGrid& grid,
                        const PenaltyConfig& penalties, SmoothingThreshold eps) {
  detail::check_inputs(params, spec, data, grid, penalties);
  const double v = evaluate_objective(params, spec, data, grid, penalties, eps).total();
  if (!std::isfinite(v)) throw DomainError("objective is not finite");
  return v;
}

// Objective value together with its gradient. Components frozen by the model
// kind (beta and alpha for QRNN, the network for LinearPanelQR) are zero.
struct ObjectiveGradient {
  double value = 0.0;
  ModelParameters grad;
};

inline ObjectiveGradient evaluate_objective_gradient(const ModelParameters& params,
                                                     const ModelSpec& spec,
                                                     const PanelDataset& data, const TauGrid& grid,
                                                     const PenaltyConfig& penalties,
                                                     SmoothingThreshold eps) {
  ObjectiveGradient out;
  out.grad = ModelParameters::zeros(spec);

  const Eigen::Index nt = Eigen::Index(data.cells());
  Eigen::VectorXd pred = Eigen::VectorXd::Zero(nt);
  if (uses_linear(spec.kind)) {
    if (spec.q > 0) pred.noalias() += data.z * params.beta;
    for (std::size_t i = 0; i < data.N(); ++i)
      pred.segment(data.row(i, 0), Eigen::Index(data.T())).array() += params.alpha(Eigen::Index(i));
  }
  NetworkTape tape;
  if (uses_network(spec.kind)) {
    tape = NetworkTape(params.net, spec.network, data.x);
    pred += tape.output();
  }
  Eigen::VectorXd r(nt);
  for (std::size_t i = 0; i < data.N(); ++i)
    for (std::size_t t = 0; t < data.T(); ++t)
      r(data.row(i, t)) = data.y(Eigen::Index(i), Eigen::Index(t)) - pred(data.row(i, t));

  const auto term = detail::composite_loss(r, grid, eps, true);
  out.value = term.value;
  // d loss / d prediction = -d loss / d residual
  const Eigen::VectorXd dpred = -term.dresidual;

  if (uses_linear(spec.kind)) {
    if (spec.q > 0) out.grad.beta.noalias() = data.z.transpose() * dpred;
    const double n = static_cast<double>(spec.n_individuals);
    for (std::size_t i = 0; i < data.N(); ++i) {
      const auto ii = Eigen::Index(i);
      out.grad.alpha(ii) = dpred.segment(data.row(i, 0), Eigen::Index(data.T())).sum();
      if (penalties.lambda1 > 0.0) {
        out.value += penalties.lambda1 * huber(params.alpha(ii), eps) / n;
        out.grad.alpha(ii) += penalties.lambda1 * huber_deriv(params.alpha(ii), eps) / n;
      }
    }
  }
  if (uses_network(spec.kind)) {
    tape.backward(dpred, out.grad.net);
    const std::size_t n_l = spec.network.hidden_weight_count();
    if (penalties.lambda2 > 0.0 && n_l > 0) {
      const double c = penalties.lambda2 / static_cast<double>(n_l);
      out.value += c * detail::hidden_weight_sq(params.net);
      for (std::size_t l = 0; l + 1 < params.net.weights.size(); ++l)
        out.grad.net.weights[l] += 2.0 * c * params.net.weights[l];
    }
  }
  return out;
}

inline ModelParameters objective_gradient(const ModelParameters& params, const ModelSpec& spec,
                                          const PanelDataset& data, const TauGrid& grid,
                                          const PenaltyConfig& penalties, SmoothingThreshold eps) {
  detail::check_inputs(params, spec, data, grid, penalties);
  auto g = evaluate_objective_gradient(params, spec, data, grid, penalties, eps);
  if (!std::isfinite(g.value)) throw DomainError("objective is not finite");
  return std::move(g.grad);
}

// Free parameters as one vector, in the order beta, alpha, network (only the
// blocks the model kind uses).
inline Eigen::VectorXd pack(const ModelParameters& params, const ModelSpec& spec) {
  Eigen::Index n = 0;
  if (uses_linear(spec.kind)) n += params.beta.size() + params.alpha.size();
  Eigen::VectorXd net;
  if (uses_network(spec.kind)) {
    net = flatten(params.net);
    n += net.size();
  }
  Eigen::VectorXd out(n);
  Eigen::Index at = 0;
  if (uses_linear(spec.kind)) {
    out.segment(at, params.beta.size()) = params.beta;
    at += params.beta.size();
    out.segment(at, params.alpha.size()) = params.alpha;
    at += params.alpha.size();
  }
  if (uses_network(spec.kind)) out.segment(at, net.size()) = net;
  return out;
}

inline ModelParameters unpack(const Eigen::Ref<const Eigen::VectorXd>& flat,
                              const ModelSpec& spec) {
  ModelParameters p = ModelParameters::zeros(spec);
  Eigen::Index at = 0;
  if (uses_linear(spec.kind)) {
    const auto q = Eigen::Index(spec.q), n = Eigen::Index(spec.n_individuals);
    if (flat.size() < q + n) throw ShapeError("packed parameter vector too short");
    p.beta = flat.segment(at, q);
    at += q;
    p.alpha = flat.segment(at, n);
    at += n;
  }
  if (uses_network(spec.kind)) {
    p.net = unflatten(flat.segment(at, flat.size() - at), spec.network);
    at = flat.size();
  }
  if (at != flat.size()) throw ShapeError("packed parameter vector has trailing entries");
  return p;
}

struct ShrinkReport {
  double sum_abs_alpha = 0.0;
  double max_abs_alpha = 0.0;
  double sum_sq_weights = 0.0;
};

// Fixed-effect magnitudes and the total squared network weight (all layers).
inline ShrinkReport shrink_report(const ModelParameters& params) {
  ShrinkReport r;
  if (params.alpha.size() > 0) {
    r.sum_abs_alpha = params.alpha.cwiseAbs().sum();
    r.max_abs_alpha = params.alpha.cwiseAbs().maxCoeff();
  }
  for (const auto& w : params.net.weights) r.sum_sq_weights += w.squaredNorm();
  return r;
}

}  // namespace psqrnn

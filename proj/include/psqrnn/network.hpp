#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "psqrnn/errors.hpp"

namespace psqrnn {

enum class Activation { ELU, Sigmoid, Tanh, Softplus, ReLU };

inline std::string_view to_string(Activation kind) {
  switch (kind) {
    case Activation::ELU: return "elu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
    case Activation::Softplus: return "softplus";
    case Activation::ReLU: return "relu";
  }
  throw ConfigurationError("unsupported activation");
}

inline Activation parse_activation(std::string_view name) {
  if (name == "elu") return Activation::ELU;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "tanh") return Activation::Tanh;
  if (name == "softplus") return Activation::Softplus;
  if (name == "relu") return Activation::ReLU;
  throw ConfigurationError("unsupported activation '" + std::string(name) + "'");
}

inline double activate(double x, Activation kind, double alpha = 1.0) {
  switch (kind) {
    case Activation::ELU: return x >= 0.0 ? x : alpha * std::expm1(x);
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::Tanh: return std::tanh(x);
    case Activation::Softplus: return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
    case Activation::ReLU: return x > 0.0 ? x : 0.0;
  }
  throw ConfigurationError("unsupported activation");
}

// Derivative in terms of the pre-activation x and the activation value y.
inline double activate_deriv(double x, double y, Activation kind, double alpha = 1.0) {
  switch (kind) {
    case Activation::ELU: return x >= 0.0 ? 1.0 : y + alpha;
    case Activation::Sigmoid: return y * (1.0 - y);
    case Activation::Tanh: return 1.0 - y * y;
    case Activation::Softplus: return 1.0 / (1.0 + std::exp(-x));
    case Activation::ReLU: return x > 0.0 ? 1.0 : 0.0;
  }
  throw ConfigurationError("unsupported activation");
}

struct NetworkSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_sizes;
  Activation activation = Activation::ELU;
  double elu_alpha = 1.0;

  std::size_t depth() const noexcept { return hidden_sizes.size(); }
  bool empty() const noexcept { return hidden_sizes.empty(); }

  // Width of layer l, with layer 0 the input and layer L+1 the scalar output.
  std::size_t width(std::size_t l) const {
    if (l == 0) return input_dim;
    if (l <= hidden_sizes.size()) return hidden_sizes[l - 1];
    return 1;
  }

  // Number of hidden-side weights sum_{l=1..L} n_{l-1} n_l.
  std::size_t hidden_weight_count() const {
    std::size_t n = 0;
    for (std::size_t l = 1; l <= depth(); ++l) n += width(l - 1) * width(l);
    return n;
  }

  void validate() const {
    if (hidden_sizes.empty()) throw ConfigurationError("network needs at least one hidden layer");
    if (input_dim < 1) throw ConfigurationError("network input dimension must be >= 1");
    for (auto n : hidden_sizes)
      if (n < 1) throw ConfigurationError("hidden layer sizes must be >= 1");
    if (!(elu_alpha > 0.0)) throw ConfigurationError("ELU alpha must be positive");
  }
};

// weights[l] is W^(l+1) with shape n_l x n_{l+1}; the last entry is the
// output column W^(L+1). biases[l] belongs to hidden layer l+1; the output has
// no bias because the fixed effects act as intercepts.
struct NetworkParameters {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  bool empty() const noexcept { return weights.empty(); }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
    for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
    return n;
  }

  static NetworkParameters zeros(const NetworkSpec& spec) {
    NetworkParameters p;
    if (spec.empty()) return p;
    const std::size_t L = spec.depth();
    for (std::size_t l = 1; l <= L + 1; ++l)
      p.weights.push_back(Eigen::MatrixXd::Zero(Eigen::Index(spec.width(l - 1)),
                                                Eigen::Index(spec.width(l))));
    for (std::size_t l = 1; l <= L; ++l)
      p.biases.push_back(Eigen::VectorXd::Zero(Eigen::Index(spec.width(l))));
    return p;
  }

  bool matches(const NetworkSpec& spec) const {
    if (spec.empty()) return weights.empty() && biases.empty();
    const std::size_t L = spec.depth();
    if (weights.size() != L + 1 || biases.size() != L) return false;
    for (std::size_t l = 1; l <= L + 1; ++l) {
      if (weights[l - 1].rows() != Eigen::Index(spec.width(l - 1)) ||
          weights[l - 1].cols() != Eigen::Index(spec.width(l)))
        return false;
      if (l <= L && biases[l - 1].size() != Eigen::Index(spec.width(l))) return false;
    }
    return true;
  }

  bool operator==(const NetworkParameters& other) const {
    if (weights.size() != other.weights.size() || biases.size() != other.biases.size()) return false;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (weights[l].rows() != other.weights[l].rows() ||
          weights[l].cols() != other.weights[l].cols() || weights[l] != other.weights[l])
        return false;
    }
    for (std::size_t l = 0; l < biases.size(); ++l) {
      if (biases[l].size() != other.biases[l].size() || biases[l] != other.biases[l]) return false;
    }
    return true;
  }
};

namespace detail {
inline void check_shapes(const NetworkParameters& params, const NetworkSpec& spec) {
  if (!params.matches(spec)) throw ShapeError("network parameters do not match the network spec");
}
}  // namespace detail

// Batched forward pass. Each row of `inputs` is one observation; the
// pre-activations and activations of every hidden layer are kept so the
// backward pass can reuse them.
class NetworkTape {
 public:
  NetworkTape() = default;

  NetworkTape(const NetworkParameters& params, const NetworkSpec& spec,
              const Eigen::Ref<const Eigen::MatrixXd>& inputs)
      : spec_(&spec), params_(&params) {
    detail::check_shapes(params, spec);
    if (inputs.cols() != Eigen::Index(spec.input_dim))
      throw ShapeError("network input has " + std::to_string(inputs.cols()) + " columns, expected " +
                       std::to_string(spec.input_dim));
    const std::size_t L = spec.depth();
    activations_.reserve(L + 1);
    pre_.reserve(L);
    activations_.emplace_back(inputs);
    for (std::size_t l = 0; l < L; ++l) {
      Eigen::MatrixXd h = activations_.back() * params.weights[l];
      h.rowwise() += params.biases[l].transpose();
      Eigen::MatrixXd g = h.unaryExpr(
          [&spec](double v) { return activate(v, spec.activation, spec.elu_alpha); });
      pre_.push_back(std::move(h));
      activations_.push_back(std::move(g));
    }
    output_ = activations_.back() * params.weights[L].col(0);
  }

  const Eigen::VectorXd& output() const noexcept { return output_; }

  // Accumulates sum_r upstream[r] * d output[r] / d theta into `grad`.
  // When `input_grad` is non-null it receives d(sum_r upstream[r] output[r])/d input
  // row by row.
  void backward(const Eigen::Ref<const Eigen::VectorXd>& upstream, NetworkParameters& grad,
                Eigen::MatrixXd* input_grad = nullptr) const {
    const NetworkSpec& spec = *spec_;
    const NetworkParameters& params = *params_;
    const std::size_t L = spec.depth();
    if (upstream.size() != output_.size()) throw ShapeError("upstream gradient length mismatch");
    grad.weights[L].col(0).noalias() += activations_[L].transpose() * upstream;
    Eigen::MatrixXd delta = upstream * params.weights[L].col(0).transpose();
    for (std::size_t l = L; l-- > 0;) {
      const Eigen::MatrixXd& h = pre_[l];
      const Eigen::MatrixXd& g = activations_[l + 1];
      for (Eigen::Index j = 0; j < delta.cols(); ++j)
        for (Eigen::Index r = 0; r < delta.rows(); ++r)
          delta(r, j) *= activate_deriv(h(r, j), g(r, j), spec.activation, spec.elu_alpha);
      grad.weights[l].noalias() += activations_[l].transpose() * delta;
      grad.biases[l].noalias() += delta.colwise().sum().transpose();
      if (l > 0 || input_grad != nullptr) {
        Eigen::MatrixXd prev = delta * params.weights[l].transpose();
        if (l == 0) {
          *input_grad = std::move(prev);
        } else {
          delta = std::move(prev);
        }
      }
    }
  }

 private:
  const NetworkSpec* spec_ = nullptr;
  const NetworkParameters* params_ = nullptr;
  std::vector<Eigen::MatrixXd> activations_;
  std::vector<Eigen::MatrixXd> pre_;
  Eigen::VectorXd output_;
};

inline double forward(const NetworkParameters& params, const NetworkSpec& spec,
                      const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != Eigen::Index(spec.input_dim))
    throw ShapeError("network input length mismatch");
  const Eigen::MatrixXd row = x.transpose();
  return NetworkTape(params, spec, row).output()(0);
}

struct NetworkGradient {
  double value = 0.0;
  NetworkParameters params;
  Eigen::VectorXd input;
};

inline NetworkGradient backward(const NetworkParameters& params, const NetworkSpec& spec,
                                const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != Eigen::Index(spec.input_dim))
    throw ShapeError("network input length mismatch");
  const Eigen::MatrixXd row = x.transpose();
  NetworkTape tape(params, spec, row);
  NetworkGradient out;
  out.value = tape.output()(0);
  out.params = NetworkParameters::zeros(spec);
  Eigen::MatrixXd input_grad;
  tape.backward(Eigen::VectorXd::Ones(1), out.params, &input_grad);
  out.input = input_grad.row(0).transpose();
  return out;
}

// Fan-based uniform initialisation on [-r, r], r = sqrt(6 / (fan_in + fan_out)),
// with zero biases.
inline NetworkParameters init_parameters(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  NetworkParameters p = NetworkParameters::zeros(spec);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 1; l <= spec.depth() + 1; ++l) {
    const double fan = static_cast<double>(spec.width(l - 1) + spec.width(l));
    std::uniform_real_distribution<double> draw(-std::sqrt(6.0 / fan), std::sqrt(6.0 / fan));
    Eigen::MatrixXd& w = p.weights[l - 1];
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = draw(rng);
  }
  return p;
}

// Layer-major: W^(1), b^(1), ..., W^(L), b^(L), W^(L+1); matrices column-major.
inline Eigen::VectorXd flatten(const NetworkParameters& params) {
  Eigen::VectorXd out(Eigen::Index(params.size()));
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    const auto& w = params.weights[l];
    out.segment(at, w.size()) = Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
    at += w.size();
    if (l < params.biases.size()) {
      out.segment(at, params.biases[l].size()) = params.biases[l];
      at += params.biases[l].size();
    }
  }
  return out;
}

inline NetworkParameters unflatten(const Eigen::Ref<const Eigen::VectorXd>& flat,
                                   const NetworkSpec& spec) {
  NetworkParameters p = NetworkParameters::zeros(spec);
  if (flat.size() != Eigen::Index(p.size()))
    throw ShapeError("flattened network has length " + std::to_string(flat.size()) +
                     ", expected " + std::to_string(p.size()));
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    auto& w = p.weights[l];
    Eigen::Map<Eigen::VectorXd>(w.data(), w.size()) = flat.segment(at, w.size());
    at += w.size();
    if (l < p.biases.size()) {
      p.biases[l] = flat.segment(at, p.biases[l].size());
      at += p.biases[l].size();
    }
  }
  return p;
}

}  // namespace psqrnn

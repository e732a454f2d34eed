#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <string>
#include <vector>

#include "psqrnn/errors.hpp"

namespace psqrnn {

using MissingMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Balanced panel of N individuals observed over T consecutive periods.
// Covariate matrices hold one row per cell, ordered individual-major
// (row = i * T + t). The missing mask has one column per variable slot:
// response first, then the q parametric and the p network covariates.
struct PanelDataset {
  std::vector<std::string> individuals;
  std::vector<int> periods;
  std::string response_name = "y";
  std::vector<std::string> z_names;
  std::vector<std::string> x_names;
  Eigen::MatrixXd y;  // N x T
  Eigen::MatrixXd z;  // NT x q
  Eigen::MatrixXd x;  // NT x p
  MissingMask missing;

  std::size_t N() const noexcept { return individuals.size(); }
  std::size_t T() const noexcept { return periods.size(); }
  std::size_t q() const noexcept { return static_cast<std::size_t>(z.cols()); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(x.cols()); }
  std::size_t cells() const noexcept { return N() * T(); }
  Eigen::Index row(std::size_t i, std::size_t t) const noexcept {
    return static_cast<Eigen::Index>(i * T() + t);
  }

  bool has_missing() const { return missing.size() > 0 && missing.any(); }

  std::size_t variable_count() const noexcept { return 1 + q() + p(); }

  std::string variable_name(std::size_t slot) const {
    if (slot == 0) return response_name;
    if (slot <= q()) return z_names.at(slot - 1);
    return x_names.at(slot - 1 - q());
  }

  std::size_t individual_index(const std::string& id) const {
    for (std::size_t i = 0; i < individuals.size(); ++i)
      if (individuals[i] == id) return i;
    throw LookupError("unknown individual '" + id + "'");
  }

  // Empty panel with all cells zero and observed.
  static PanelDataset zeros(std::vector<std::string> ids, std::vector<int> periods, std::size_t q,
                            std::size_t p) {
    PanelDataset d;
    d.individuals = std::move(ids);
    d.periods = std::move(periods);
    const auto n = static_cast<Eigen::Index>(d.N()), t = static_cast<Eigen::Index>(d.T());
    d.y = Eigen::MatrixXd::Zero(n, t);
    d.z = Eigen::MatrixXd::Zero(n * t, static_cast<Eigen::Index>(q));
    d.x = Eigen::MatrixXd::Zero(n * t, static_cast<Eigen::Index>(p));
    d.missing = MissingMask::Constant(n * t, static_cast<Eigen::Index>(1 + q + p), false);
    for (std::size_t j = 0; j < q; ++j) d.z_names.push_back("z" + std::to_string(j + 1));
    for (std::size_t j = 0; j < p; ++j) d.x_names.push_back("x" + std::to_string(j + 1));
    return d;
  }

  void validate() const {
    if (N() < 1 || T() < 1) throw DataError("panel needs at least one individual and one period");
    for (std::size_t t = 1; t < T(); ++t)
      if (periods[t] != periods[t - 1] + 1)
        throw DataError("periods must be strictly increasing consecutive integers");
    const auto nt = static_cast<Eigen::Index>(cells());
    if (y.rows() != Eigen::Index(N()) || y.cols() != Eigen::Index(T()))
      throw ShapeError("response matrix must be N x T");
    if (z.rows() != nt || x.rows() != nt) throw ShapeError("covariate matrices must have N*T rows");
    if (z_names.size() != q() || x_names.size() != p())
      throw ShapeError("covariate names do not match covariate columns");
    if (missing.rows() != nt || missing.cols() != Eigen::Index(variable_count()))
      throw ShapeError("missing mask must be NT x (1+q+p)");
  }

  bool operator==(const PanelDataset& o) const {
    return individuals == o.individuals && periods == o.periods &&
           response_name == o.response_name && z_names == o.z_names && x_names == o.x_names &&
           y.rows() == o.y.rows() && y.cols() == o.y.cols() && z.cols() == o.z.cols() &&
           x.cols() == o.x.cols() && z.rows() == o.z.rows() && x.rows() == o.x.rows() &&
           missing.rows() == o.missing.rows() && missing.cols() == o.missing.cols() &&
           (missing == o.missing).all() && same_observed(o);
  }

 private:
  // Masked cells compare equal regardless of their placeholder values.
  bool same_observed(const PanelDataset& o) const {
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      const auto i = static_cast<std::size_t>(r) / T(), t = static_cast<std::size_t>(r) % T();
      if (!missing(r, 0) && y(Eigen::Index(i), Eigen::Index(t)) != o.y(Eigen::Index(i), Eigen::Index(t)))
        return false;
      for (Eigen::Index j = 0; j < z.cols(); ++j)
        if (!missing(r, 1 + j) && z(r, j) != o.z(r, j)) return false;
      for (Eigen::Index j = 0; j < x.cols(); ++j)
        if (!missing(r, 1 + z.cols() + j) && x(r, j) != o.x(r, j)) return false;
    }
    return true;
  }
};

}  // namespace psqrnn

#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "psqrnn/errors.hpp"
#include "psqrnn/trainer.hpp"

namespace psqrnn {

struct BicInput {
  double avg_loss = 0.0;
  std::size_t N = 0, T = 0;
  std::size_t p = 0, q = 0;
  std::size_t n1 = 0;
  std::optional<std::size_t> n2;
};

namespace detail {
inline double bic_penalty_scale(const BicInput& in) {
  if (!(in.avg_loss > 0.0) || !std::isfinite(in.avg_loss))
    throw DomainError("BIC: average loss must be positive");
  if (in.N < 1 || in.T < 1 || in.n1 < 1) throw DomainError("BIC: dimensions must be >= 1");
  const double nt = static_cast<double>(in.N * in.T);
  return 0.5 * std::log(nt) / nt;
}
}  // namespace detail

// One hidden layer: ln(loss) + (1/2)(ln NT / NT)[(p+2) n1 + q + N].
inline double bic1(const BicInput& in) {
  if (in.n2) throw DomainError("bic1 applies to one hidden layer; n2 must be absent");
  const double scale = detail::bic_penalty_scale(in);
  const double count = static_cast<double>((in.p + 2) * in.n1 + in.q + in.N);
  return std::log(in.avg_loss) + scale * count;
}

// Two hidden layers: ln(loss) + (1/2)(ln NT / NT)[(p+1) n1 + n2 (n1+2) + q + N].
inline double bic2(const BicInput& in) {
  if (!in.n2 || *in.n2 < 1) throw DomainError("bic2 needs n2 >= 1");
  const double scale = detail::bic_penalty_scale(in);
  const double count =
      static_cast<double>((in.p + 1) * in.n1 + *in.n2 * (in.n1 + 2) + in.q + in.N);
  return std::log(in.avg_loss) + scale * count;
}

struct SearchGrid {
  std::vector<std::size_t> n1_values;
  std::vector<std::size_t> n2_values;  // used only for two-layer templates
  std::vector<double> lambda1_values;
  std::vector<double> lambda2_values;
};

struct GridPoint {
  std::size_t n1 = 0;
  std::optional<std::size_t> n2;
  double lambda1 = 0.0;
  double lambda2 = 0.0;

  auto key() const { return std::make_tuple(n1, n2.value_or(0), lambda1, lambda2); }
};

struct GridRow {
  GridPoint point;
  double avg_loss = std::numeric_limits<double>::quiet_NaN();
  double bic = std::numeric_limits<double>::quiet_NaN();
  std::string status = "ok";
};

struct GridSearchResult {
  GridPoint best;
  FitResult best_fit;
  std::vector<GridRow> table;
};

// Index of the minimum-BIC successful row; ties go to the lexicographically
// smallest (n1, n2, lambda1, lambda2).
inline std::optional<std::size_t> argmin_bic(const std::vector<GridRow>& table) {
  std::optional<std::size_t> best;
  for (std::size_t r = 0; r < table.size(); ++r) {
    if (table[r].status != "ok") continue;
    if (!best || table[r].bic < table[*best].bic ||
        (table[r].bic == table[*best].bic && table[r].point.key() < table[*best].point.key()))
      best = r;
  }
  return best;
}

// Exhaustive search over hidden sizes and penalties. Every point is fitted
// with the same TrainConfig; the BIC uses the smoothed loss term at the final
// annealing epsilon (penalties excluded). A failed fit is recorded in the
// table and skipped.
inline GridSearchResult grid_search(const PanelDataset& data, ModelKind kind, const TauGrid& grid,
                                    const SearchGrid& search, const NetworkSpec& net_template,
                                    const TrainConfig& config) {
  if (kind == ModelKind::LinearPanelQR)
    throw ConfigurationError("grid search selects network sizes; use psqrnn or qrnn");
  const std::size_t L = net_template.depth();
  if (L < 1 || L > 2) throw ConfigurationError("grid search supports one or two hidden layers");
  if (search.n1_values.empty() || search.lambda1_values.empty() || search.lambda2_values.empty())
    throw ConfigurationError("grid search lists must be nonempty");
  std::vector<std::size_t> n2_values;
  if (L == 2) {
    n2_values = search.n2_values.empty() ? std::vector<std::size_t>{net_template.hidden_sizes[1]}
                                         : search.n2_values;
  }

  std::vector<GridPoint> points;
  for (auto n1 : search.n1_values) {
    if (L == 1) {
      for (double l1 : search.lambda1_values)
        for (double l2 : search.lambda2_values) points.push_back({n1, std::nullopt, l1, l2});
    } else {
      for (auto n2 : n2_values)
        for (double l1 : search.lambda1_values)
          for (double l2 : search.lambda2_values) points.push_back({n1, n2, l1, l2});
    }
  }

  GridSearchResult out;
  std::vector<FitResult> fits(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) {
    const GridPoint& pt = points[k];
    GridRow row;
    row.point = pt;
    try {
      NetworkSpec net = net_template;
      net.input_dim = data.p();
      net.hidden_sizes = L == 1 ? std::vector<std::size_t>{pt.n1}
                                : std::vector<std::size_t>{pt.n1, *pt.n2};
      const ModelSpec spec = ModelSpec::make(kind, net, data.q(), data.N());
      fits[k] = fit(data, spec, grid, PenaltyConfig{pt.lambda1, pt.lambda2}, config);
      row.avg_loss =
          loss_term(fits[k].params, spec, data, grid, SmoothingThreshold(fits[k].final_epsilon));
      BicInput in{row.avg_loss, data.N(), data.T(), data.p(), data.q(), pt.n1, pt.n2};
      row.bic = L == 1 ? bic1(in) : bic2(in);
    } catch (const Error& e) {
      row.status = std::string("failed: ") + e.what();
    }
    out.table.push_back(std::move(row));
  }
  const auto best = argmin_bic(out.table);
  if (!best) throw SearchError("grid search: every grid point failed");
  out.best = out.table[*best].point;
  out.best_fit = std::move(fits[*best]);
  return out;
}

}  // namespace psqrnn

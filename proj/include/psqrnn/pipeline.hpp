#pragma once

#include <tuple>

#include "psqrnn/metrics.hpp"
#include "psqrnn/paneldata.hpp"
#include "psqrnn/trainer.hpp"

namespace psqrnn {

// Train and test panels of one scenario, on the data scale and scaled with
// statistics from the training rows.
struct ScenarioData {
  ScenarioSplit split;
  PanelDataset train, test;
  PanelDataset train_scaled, test_scaled;
  StandardizationState state;
};

inline PanelDataset complete_panel(const PanelDataset& d, bool impute) {
  if (!d.has_missing()) return d;
  if (!impute) throw DataError("panel has missing cells and imputation is disabled");
  return impute_mean(d);
}

inline ScenarioData prepare_scenario(const PanelDataset& panel, int scenario, bool scale) {
  ScenarioData s;
  s.split = scenario_split(panel, scenario);
  s.train = materialize(panel, s.split, SplitPart::Train);
  s.test = materialize(panel, s.split, SplitPart::Test);
  if (scale) {
    std::tie(s.train_scaled, s.state) = standardize(s.train, all_cells(s.train));
  } else {
    s.train_scaled = s.train;
    s.state = StandardizationState::identity(s.train.q(), s.train.p());
  }
  s.test_scaled = apply_standardization(s.test, s.state);
  return s;
}

// Data-scale predictions as an N x T matrix over every cell of `scaled`.
inline Eigen::MatrixXd forecast(const FitResult& fit, const PanelDataset& scaled,
                                const StandardizationState& state) {
  const Eigen::VectorXd flat =
      destandardize_response(predict_panel(fit.params, fit.spec, scaled), state);
  Eigen::MatrixXd out(Eigen::Index(scaled.N()), Eigen::Index(scaled.T()));
  for (std::size_t i = 0; i < scaled.N(); ++i)
    for (std::size_t t = 0; t < scaled.T(); ++t)
      out(Eigen::Index(i), Eigen::Index(t)) = flat(scaled.row(i, t));
  return out;
}

}  // namespace psqrnn

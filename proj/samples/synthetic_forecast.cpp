// Fits PSQRNN and the linear panel baseline on a synthetic 30 x 20 panel and
// compares their Scenario 1 forecasts.
#include <cstdio>

#include "psqrnn/pipeline.hpp"

using namespace psqrnn;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;
  const SyntheticPanel sp = generate_synthetic(SyntheticConfig{}, seed);
  const ScenarioData s = prepare_scenario(sp.data, 1, true);
  const TauGrid grid = TauGrid::equally_spaced(9);
  const PenaltyConfig pen{0.005, 0.01};
  TrainConfig tc;
  tc.restarts = 2;
  tc.seed = seed;

  for (ModelKind kind : {ModelKind::PSQRNN, ModelKind::LinearPanelQR}) {
    const ModelSpec spec = ModelSpec::for_dataset(kind, {10, 5}, s.train_scaled);
    const FitResult f = fit(s.train_scaled, spec, grid, pen, tc);
    const ForecastReport r = report(s.test.y, forecast(f, s.test_scaled, s.state));
    std::printf("%-7s MAPE %.4f  RRMSE %.4f  objective %.6f\n", std::string(to_string(kind)).c_str(),
                r.total_mape, r.total_rrmse, f.final_objective);
    const Eigen::VectorXd beta = destandardize_beta(f.params.beta, s.state);
    std::printf("        beta");
    for (Eigen::Index j = 0; j < beta.size(); ++j) std::printf(" %.3f", beta(j));
    std::printf("  (true");
    for (Eigen::Index j = 0; j < sp.truth.beta.size(); ++j) std::printf(" %.3f", sp.truth.beta(j));
    std::printf(")\n");
  }
  return 0;
}

#include <gtest/gtest.h>

#include <cmath>

#include "psqrnn/paneldata.hpp"
#include "psqrnn/selection.hpp"

using namespace psqrnn;

TEST(Bic1, HandArithmetic) {
  // ln(0.1) + 0.5 * (ln 10 / 10) * ((3+2)*2 + 2 + 2) = -2.302585 + 1.611810
  EXPECT_NEAR(bic1({0.1, 2, 5, 3, 2, 2, std::nullopt}), -0.690775, 1e-6);
}

TEST(Bic1, UnitLossLeavesPenaltyOnly) {
  const double expected = 0.5 * std::log(12.0) / 12.0 * ((4 + 2) * 3 + 1 + 3);
  EXPECT_DOUBLE_EQ(bic1({1.0, 3, 4, 4, 1, 3, std::nullopt}), expected);
}

TEST(Bic1, DoublingLossAddsLnTwo) {
  const BicInput a{0.37, 5, 7, 2, 3, 4, std::nullopt};
  BicInput b = a;
  b.avg_loss *= 2.0;
  EXPECT_NEAR(bic1(b) - bic1(a), std::log(2.0), 1e-15);
}

TEST(Bic2, HandArithmetic) {
  // count = (3+1)*2 + 2*(2+2) + 2 + 2 = 20, so the penalty is exactly ln 10
  EXPECT_NEAR(bic2({0.1, 2, 5, 3, 2, 2, 2}), 0.0, 1e-6);
  EXPECT_DOUBLE_EQ(bic2({1.0, 2, 5, 3, 2, 2, 2}), std::log(10.0));
}

TEST(Bic, Preconditions) {
  EXPECT_THROW(bic2({0.1, 2, 5, 3, 2, 2, 0}), DomainError);
  EXPECT_THROW(bic2({0.1, 2, 5, 3, 2, 2, std::nullopt}), DomainError);
  EXPECT_THROW(bic1({0.1, 2, 5, 3, 2, 2, 3}), DomainError);
  EXPECT_THROW(bic1({0.0, 2, 5, 3, 2, 2, std::nullopt}), DomainError);
  EXPECT_THROW(bic1({-1.0, 2, 5, 3, 2, 2, std::nullopt}), DomainError);
}

TEST(Bic, StrictlyIncreasingInLoss) {
  double prev = -std::numeric_limits<double>::infinity();
  for (double loss : {1e-4, 1e-2, 0.5, 1.0, 3.0}) {
    const double v = bic2({loss, 3, 6, 2, 1, 3, 2});
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(ArgminBic, TieBreaksLexicographically) {
  std::vector<GridRow> table(3);
  table[0].point = {3, std::nullopt, 0.1, 0.1};
  table[0].bic = 1.0;
  table[1].point = {2, std::nullopt, 0.5, 0.1};
  table[1].bic = 1.0;
  table[2].point = {1, std::nullopt, 0.1, 0.1};
  table[2].bic = 0.5;
  table[2].status = "failed: x";
  EXPECT_EQ(argmin_bic(table), 1u);
}

namespace {

PanelDataset small_panel() {
  SyntheticConfig c;
  c.N = 3;
  c.T = 8;
  c.q = 1;
  c.p = 2;
  c.alpha_center = 0.0;
  return generate_synthetic(c, 17).data;
}

TrainConfig quick() {
  TrainConfig c;
  c.restarts = 1;
  c.max_iters_per_stage = 60;
  c.schedule = {0.0625, std::ldexp(1.0, -12), 0.0625};
  return c;
}

NetworkSpec one_layer() {
  NetworkSpec s;
  s.hidden_sizes = {2};
  return s;
}

}  // namespace

TEST(GridSearch, SinglePointIsSelected) {
  SearchGrid g{{2}, {}, {0.01}, {0.02}};
  const auto r = grid_search(small_panel(), ModelKind::PSQRNN, TauGrid::single(0.5), g,
                             one_layer(), quick());
  ASSERT_EQ(r.table.size(), 1u);
  EXPECT_EQ(r.best.n1, 2u);
  EXPECT_EQ(r.table[0].status, "ok");
  EXPECT_DOUBLE_EQ(r.best.lambda2, 0.02);
}

TEST(GridSearch, TwoByTwoReturnsTableMinimum) {
  const auto data = small_panel();
  SearchGrid g{{1, 3}, {}, {0.0, 0.5}, {0.01}};
  const auto r =
      grid_search(data, ModelKind::PSQRNN, TauGrid::uniform({0.25, 0.5, 0.75}), g, one_layer(), quick());
  ASSERT_EQ(r.table.size(), 4u);
  std::size_t best = 0;
  for (std::size_t k = 1; k < r.table.size(); ++k)
    if (r.table[k].bic < r.table[best].bic) best = k;
  EXPECT_EQ(r.best.key(), r.table[best].point.key());
  // BIC column recomputed from the avg_loss column
  for (const auto& row : r.table) {
    const double expect =
        bic1({row.avg_loss, data.N(), data.T(), data.p(), data.q(), row.point.n1, std::nullopt});
    EXPECT_DOUBLE_EQ(row.bic, expect);
  }
  // the loss column is the fitted smoothed loss term
  const auto spec = ModelSpec::for_dataset(ModelKind::PSQRNN, {r.best.n1}, data);
  EXPECT_DOUBLE_EQ(loss_term(r.best_fit.params, spec, data, TauGrid::uniform({0.25, 0.5, 0.75}),
                             SmoothingThreshold(r.best_fit.final_epsilon)),
                   r.table[best].avg_loss);
}

TEST(GridSearch, TwoLayerTableSizeAndReproducibility) {
  NetworkSpec two = one_layer();
  two.hidden_sizes = {2, 2};
  SearchGrid g{{1, 2}, {1, 2}, {0.01}, {0.01, 0.1}};
  const auto data = small_panel();
  const auto a = grid_search(data, ModelKind::PSQRNN, TauGrid::single(0.5), g, two, quick());
  const auto b = grid_search(data, ModelKind::PSQRNN, TauGrid::single(0.5), g, two, quick());
  ASSERT_EQ(a.table.size(), 2u * 2u * 1u * 2u);
  for (std::size_t k = 0; k < a.table.size(); ++k) {
    EXPECT_EQ(a.table[k].bic, b.table[k].bic);
    ASSERT_TRUE(a.table[k].point.n2.has_value());
  }
  EXPECT_EQ(a.best.key(), b.best.key());
}

TEST(GridSearch, Errors) {
  const auto data = small_panel();
  EXPECT_THROW(grid_search(data, ModelKind::PSQRNN, TauGrid::single(0.5), SearchGrid{{}, {}, {0.1}, {0.1}},
                           one_layer(), quick()),
               ConfigurationError);
  EXPECT_THROW(grid_search(data, ModelKind::LinearPanelQR, TauGrid::single(0.5),
                           SearchGrid{{1}, {}, {0.1}, {0.1}}, one_layer(), quick()),
               ConfigurationError);
  auto bad = data;
  bad.y(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(grid_search(bad, ModelKind::PSQRNN, TauGrid::single(0.5),
                           SearchGrid{{1, 2}, {}, {0.1}, {0.1}}, one_layer(), quick()),
               SearchError);
}

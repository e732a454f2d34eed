#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "psqrnn/paneldata.hpp"

using namespace psqrnn;

namespace {

const char* kHeader = "province,year,EC,GDP,VASI,TRSCG,TIE,AAT,AARH,DP,SH\n";

PanelDataset parse(const std::string& text, const PanelSchema& schema = {}) {
  std::istringstream in(text);
  return ingest_stream(in, schema, "test.csv");
}

std::string message_of(const std::string& text) {
  try {
    parse(text);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

PanelDataset year_panel(std::size_t N = 2, std::size_t T = 20) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < N; ++i) ids.push_back("P" + std::to_string(i));
  std::vector<int> years;
  for (std::size_t t = 0; t < T; ++t) years.push_back(1999 + int(t));
  PanelDataset d = PanelDataset::zeros(ids, years, 1, 1);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t t = 0; t < T; ++t) {
      d.y(Eigen::Index(i), Eigen::Index(t)) = 100.0 * double(i + 1) + double(t);
      d.z(d.row(i, t), 0) = double(t);
      d.x(d.row(i, t), 0) = double(i) - double(t);
    }
  return d;
}

std::vector<int> target_years(const PanelDataset& d, const std::vector<SamplePair>& pairs,
                              std::size_t individual) {
  std::vector<int> out;
  for (const auto& p : pairs)
    if (p.individual == individual) out.push_back(d.periods.front() + int(p.target_period));
  return out;
}

std::vector<int> feature_years(const PanelDataset& d, const std::vector<SamplePair>& pairs,
                               std::size_t individual) {
  std::vector<int> out;
  for (const auto& p : pairs)
    if (p.individual == individual) out.push_back(d.periods[p.feature_period]);
  return out;
}

std::vector<int> range(int a, int b) {
  std::vector<int> v;
  for (int y = a; y <= b; ++y) v.push_back(y);
  return v;
}

}  // namespace

TEST(Ingest, FullyPopulatedToyFile) {
  const auto d = parse(std::string(kHeader) +
                       "Beijing,1999,1,2,3,4,5,6,7,8,9\n"
                       "Beijing,2000,1.5,2,3,4,5,6,7,8,9\n"
                       "Tianjin,1999,2,2,3,4,5,6,7,8,9\n"
                       "Tianjin,2000,2.5,2,3,4,5,6,7,8,9\n");
  EXPECT_EQ(d.N(), 2u);
  EXPECT_EQ(d.T(), 2u);
  EXPECT_EQ(d.q(), 4u);
  EXPECT_EQ(d.p(), 8u);
  EXPECT_FALSE(d.has_missing());
  EXPECT_EQ(d.y(0, 1), 1.5);
  EXPECT_EQ(d.individuals[1], "Tianjin");
  EXPECT_EQ(d.periods, (std::vector<int>{1999, 2000}));
}

TEST(Ingest, EmptyCellIsMaskedAlone) {
  const auto d = parse(std::string(kHeader) +
                       "Beijing,1999,,2,3,4,5,6,7,8,9\n"
                       "Beijing,2000,1.5,2,3,4,5,NA,7,8,9\n");
  EXPECT_TRUE(d.missing(d.row(0, 0), 0));
  EXPECT_EQ(d.missing.count(), 2);  // EC and AAT
  EXPECT_TRUE(d.missing(d.row(0, 1), Eigen::Index(1 + 4 + 4)));
}

TEST(Ingest, SortsRowsByIndividualAndYear) {
  const auto d = parse(std::string(kHeader) +
                       "Tianjin,2000,4,2,3,4,5,6,7,8,9\n"
                       "Beijing,2000,2,2,3,4,5,6,7,8,9\n"
                       "Tianjin,1999,3,2,3,4,5,6,7,8,9\n"
                       "Beijing,1999,1,2,3,4,5,6,7,8,9\n");
  EXPECT_EQ(d.individuals, (std::vector<std::string>{"Beijing", "Tianjin"}));
  EXPECT_EQ(d.y(0, 0), 1.0);
  EXPECT_EQ(d.y(1, 1), 4.0);
}

TEST(Ingest, DuplicateRowIsRejected) {
  const auto msg = message_of(std::string(kHeader) +
                              "Beijing,1999,1,2,3,4,5,6,7,8,9\n"
                              "Beijing,1999,1,2,3,4,5,6,7,8,9\n");
  EXPECT_NE(msg.find("duplicate"), std::string::npos);
  EXPECT_NE(msg.find("Beijing, 1999"), std::string::npos);
}

TEST(Ingest, UnparseableNumberNamesRowAndColumn) {
  const auto msg = message_of(std::string(kHeader) +
                              "Beijing,1999,1,2,3,4,5,6,7,8,9\n"
                              "Beijing,2000,abc,2,3,4,5,6,7,8,9\n");
  EXPECT_NE(msg.find("row 3"), std::string::npos);
  EXPECT_NE(msg.find("'EC'"), std::string::npos);
}

TEST(Ingest, UnbalancedPanelListsGaps) {
  const auto msg = message_of(std::string(kHeader) +
                              "Beijing,1999,1,2,3,4,5,6,7,8,9\n"
                              "Beijing,2000,1,2,3,4,5,6,7,8,9\n"
                              "Tianjin,1999,1,2,3,4,5,6,7,8,9\n");
  EXPECT_NE(msg.find("unbalanced"), std::string::npos);
  EXPECT_NE(msg.find("(Tianjin, 2000)"), std::string::npos);
}

TEST(Ingest, MissingColumnIsReported) {
  const auto msg = message_of("province,year,EC\nBeijing,1999,1\n");
  EXPECT_NE(msg.find("'GDP'"), std::string::npos);
}

TEST(Ingest, CustomSchemaAndDelimiter) {
  PanelSchema s;
  s.id_column = "id";
  s.year_column = "t";
  s.response = "y";
  s.z_columns = {"a"};
  s.x_columns = {"b", "a"};
  s.delimiter = ';';
  const auto d = parse("id;t;y;a;b\nu;1;1;2;3\nu;2;4;5;6\n", s);
  EXPECT_EQ(d.q(), 1u);
  EXPECT_EQ(d.p(), 2u);
  EXPECT_EQ(d.x(1, 1), 5.0);
}

TEST(EmitIngest, RoundTripWithSharedColumnsAndMissingCells) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0.0, 1e3);
  std::bernoulli_distribution miss(0.1);
  const PanelSchema schema;  // GDP..TIE appear in both blocks
  for (int rep = 0; rep < 5; ++rep) {
    PanelDataset d = PanelDataset::zeros({"A", "B", "C"}, {2001, 2002, 2003, 2004}, 4, 8);
    d.response_name = schema.response;
    d.z_names = schema.z_columns;
    d.x_names = schema.x_columns;
    for (Eigen::Index k = 0; k < d.y.size(); ++k) d.y.data()[k] = nd(rng);
    for (Eigen::Index r = 0; r < d.z.rows(); ++r) {
      for (Eigen::Index j = 0; j < 4; ++j) {
        d.z(r, j) = nd(rng);
        d.x(r, j) = d.z(r, j);
        const bool m = miss(rng);
        d.missing(r, 1 + j) = m;
        d.missing(r, 5 + j) = m;
      }
      for (Eigen::Index j = 4; j < 8; ++j) {
        d.x(r, j) = nd(rng);
        d.missing(r, 5 + j) = miss(rng);
      }
      d.missing(r, 0) = miss(rng);
    }
    std::ostringstream out;
    emit_stream(out, d, schema);
    std::istringstream in(out.str());
    EXPECT_TRUE(ingest_stream(in, schema) == d) << "rep " << rep;
  }
}

TEST(ImputeMean, PerIndividualMean) {
  PanelDataset d = PanelDataset::zeros({"A"}, {1, 2, 3}, 0, 1);
  d.x(0, 0) = 1.0;
  d.x(2, 0) = 3.0;
  d.missing(1, 1) = true;
  const auto out = impute_mean(d);
  EXPECT_EQ(out.x(1, 0), 2.0);
  EXPECT_EQ(out.x(0, 0), 1.0);
  EXPECT_FALSE(out.has_missing());
}

TEST(ImputeMean, NoMissingIsIdentity) {
  const auto d = year_panel();
  const auto out = impute_mean(d);
  EXPECT_TRUE(out == d);
  EXPECT_EQ(out.x, d.x);
  EXPECT_EQ(out.y, d.y);
}

TEST(ImputeMean, GlobalFallbackForAllMissingIndividual) {
  PanelDataset d = PanelDataset::zeros({"A", "B"}, {1, 2}, 0, 1);
  d.x_names = {"AAT"};
  d.x(d.row(0, 0), 0) = 13.0;
  d.x(d.row(0, 1), 0) = 15.0;
  d.missing(d.row(1, 0), 1) = true;
  d.missing(d.row(1, 1), 1) = true;
  const auto out = impute_mean(d);
  EXPECT_EQ(out.x(d.row(1, 0), 0), 14.0);
  EXPECT_EQ(out.x(d.row(1, 1), 0), 14.0);
}

TEST(ImputeMean, VariableMissingEverywhereIsAnError) {
  PanelDataset d = PanelDataset::zeros({"A", "B"}, {1, 2}, 0, 1);
  d.x_names = {"SH"};
  d.missing.col(1).setConstant(true);
  try {
    impute_mean(d);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("SH"), std::string::npos);
  }
}

TEST(ImputeMean, IdempotentAndLeavesObservedCells) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd(5.0, 2.0);
  std::bernoulli_distribution miss(0.2);
  for (int rep = 0; rep < 20; ++rep) {
    PanelDataset d = PanelDataset::zeros({"A", "B", "C"}, {1, 2, 3, 4, 5}, 2, 2);
    for (Eigen::Index k = 0; k < d.y.size(); ++k) d.y.data()[k] = nd(rng);
    for (Eigen::Index k = 0; k < d.z.size(); ++k) d.z.data()[k] = nd(rng);
    for (Eigen::Index k = 0; k < d.x.size(); ++k) d.x.data()[k] = nd(rng);
    for (Eigen::Index k = 0; k < d.missing.size(); ++k) d.missing.data()[k] = miss(rng);
    d.missing.row(0).setConstant(false);  // keep every variable observed somewhere
    const auto once = impute_mean(d);
    const auto twice = impute_mean(once);
    EXPECT_EQ(once.y, twice.y);
    EXPECT_EQ(once.z, twice.z);
    EXPECT_EQ(once.x, twice.x);
    for (Eigen::Index r = 0; r < d.z.rows(); ++r)
      for (Eigen::Index j = 0; j < 2; ++j) {
        if (!d.missing(r, 1 + j)) {
          EXPECT_EQ(once.z(r, j), d.z(r, j));
        }
        if (!d.missing(r, 3 + j)) {
          EXPECT_EQ(once.x(r, j), d.x(r, j));
        }
      }
  }
}

TEST(Standardize, TrainStatisticsWithPopulationDenominator) {
  PanelDataset d = PanelDataset::zeros({"A"}, {1, 2, 3}, 1, 1);
  d.y << 0.0, 2.0, 4.0;
  d.z << 0.0, 2.0, 4.0;
  d.x << 10.0, 20.0, 0.0;
  const auto [s, state] = standardize(d, {{0, 0}, {0, 1}});
  EXPECT_DOUBLE_EQ(s.y(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(s.y(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(s.y(0, 2), 3.0);  // held-out value scaled with the training statistics
  EXPECT_DOUBLE_EQ(s.z(2, 0), 3.0);
  EXPECT_DOUBLE_EQ(state.y_mean, 1.0);
  EXPECT_DOUBLE_EQ(state.y_sd, 1.0);
  EXPECT_DOUBLE_EQ(state.x_sd(0), 5.0);
}

TEST(Standardize, ResponseRoundTrip) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd(1e3, 400.0);
  PanelDataset d = PanelDataset::zeros({"A", "B"}, {1, 2, 3, 4}, 1, 1);
  for (Eigen::Index k = 0; k < d.y.size(); ++k) d.y.data()[k] = nd(rng);
  for (Eigen::Index k = 0; k < d.z.size(); ++k) d.z.data()[k] = nd(rng);
  for (Eigen::Index k = 0; k < d.x.size(); ++k) d.x.data()[k] = nd(rng);
  const auto [s, state] = standardize(d, all_cells(d));
  Eigen::VectorXd original = d.y.transpose().reshaped();
  Eigen::VectorXd scaled = s.y.transpose().reshaped();
  EXPECT_LE((destandardize_response(scaled, state) - original).cwiseAbs().maxCoeff(),
            1e-12 * original.cwiseAbs().maxCoeff());
}

TEST(Standardize, ZeroVarianceColumnIsNamed) {
  PanelDataset d = PanelDataset::zeros({"A"}, {1, 2}, 1, 1);
  d.y << 1.0, 2.0;
  d.z_names = {"GDP"};
  d.x << 1.0, 3.0;
  try {
    standardize(d, all_cells(d));
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("GDP"), std::string::npos);
  }
  EXPECT_THROW(standardize(d, {}), DataError);
}

TEST(ScenarioSplit, Scenario1YearWindows) {
  const auto d = year_panel();
  const auto s = scenario_split(d, 1);
  EXPECT_EQ(s.lag, 0u);
  EXPECT_FALSE(s.augment_with_lagged_response);
  EXPECT_EQ(target_years(d, s.train, 0), range(1999, 2013));
  EXPECT_EQ(feature_years(d, s.train, 0), range(1999, 2013));
  EXPECT_EQ(target_years(d, s.test, 1), range(2014, 2018));
  EXPECT_EQ(feature_years(d, s.test, 1), range(2014, 2018));
}

TEST(ScenarioSplit, Scenario2YearWindows) {
  const auto d = year_panel();
  const auto s = scenario_split(d, 2);
  EXPECT_EQ(s.lag, 5u);
  EXPECT_TRUE(s.augment_with_lagged_response);
  EXPECT_EQ(feature_years(d, s.train, 0), range(1999, 2008));
  EXPECT_EQ(target_years(d, s.train, 0), range(2004, 2013));
  EXPECT_EQ(feature_years(d, s.test, 0), range(2009, 2013));
  EXPECT_EQ(target_years(d, s.test, 0), range(2014, 2018));
}

TEST(ScenarioSplit, Scenario3YearWindows) {
  const auto d = year_panel();
  const auto s = scenario_split(d, 3);
  EXPECT_EQ(feature_years(d, s.train, 1), range(2004, 2013));
  EXPECT_EQ(target_years(d, s.train, 1), range(2009, 2018));
  EXPECT_EQ(feature_years(d, s.test, 1), range(2014, 2018));
  EXPECT_EQ(target_years(d, s.test, 1), range(2019, 2023));
  for (const auto& p : s.test) EXPECT_TRUE(p.future);
  for (const auto& p : s.train) EXPECT_FALSE(p.future);
}

TEST(ScenarioSplit, TargetsDisjointAndScenario1CoversEveryYearOnce) {
  const auto d = year_panel(3);
  for (int sc : {1, 2, 3}) {
    const auto s = scenario_split(d, sc);
    for (std::size_t i = 0; i < d.N(); ++i) {
      const auto tr = target_years(d, s.train, i), te = target_years(d, s.test, i);
      for (int y : te) EXPECT_EQ(std::count(tr.begin(), tr.end(), y), 0);
      if (sc == 1) {
        std::vector<int> all = tr;
        all.insert(all.end(), te.begin(), te.end());
        std::sort(all.begin(), all.end());
        EXPECT_EQ(all, range(1999, 2018));
      }
    }
  }
}

TEST(ScenarioSplit, InsufficientPeriods) {
  try {
    scenario_split(year_panel(2, 14), 2);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("at least 15"), std::string::npos);
  }
  EXPECT_NO_THROW(scenario_split(year_panel(2, 15), 3));
  EXPECT_THROW(scenario_split(year_panel(2, 5), 1), DataError);
  EXPECT_THROW(scenario_split(year_panel(), 4), ConfigurationError);
}

TEST(Materialize, LaggedPanelCarriesCurrentResponse) {
  const auto d = year_panel();
  const auto s = scenario_split(d, 2);
  const auto train = materialize(d, s, SplitPart::Train);
  EXPECT_EQ(train.T(), 10u);
  EXPECT_EQ(train.periods.front(), 2004);
  EXPECT_EQ(train.p(), 2u);
  EXPECT_EQ(train.x_names.back(), "lag_y");
  // target 2004 for individual 1 comes from 1999 features
  EXPECT_EQ(train.y(1, 0), d.y(1, 5));
  EXPECT_EQ(train.z(train.row(1, 0), 0), d.z(d.row(1, 0), 0));
  EXPECT_EQ(train.x(train.row(1, 0), 1), d.y(1, 0));

  const auto future = materialize(d, scenario_split(d, 3), SplitPart::Test);
  EXPECT_EQ(future.periods, range(2019, 2023));
  EXPECT_TRUE(future.missing.col(0).all());
  EXPECT_FALSE(future.missing.rightCols(future.missing.cols() - 1).any());
}

TEST(Synthetic, NoiselessLinearIsExact) {
  SyntheticConfig c;
  c.N = 4;
  c.T = 6;
  c.noise_scale = 0.0;
  c.nonlinear = NonlinearForm::None;
  c.heterogeneity = 0.0;
  c.alpha_center = 0.0;
  const auto sp = generate_synthetic(c, 1);
  for (std::size_t i = 0; i < c.N; ++i)
    for (std::size_t t = 0; t < c.T; ++t)
      EXPECT_EQ(sp.data.y(Eigen::Index(i), Eigen::Index(t)),
                sp.data.z.row(sp.data.row(i, t)).dot(sp.truth.beta));
}

TEST(Synthetic, DeterministicPerSeed) {
  const SyntheticConfig c;
  const auto a = generate_synthetic(c, 5), b = generate_synthetic(c, 5), e = generate_synthetic(c, 6);
  EXPECT_TRUE(a.data == b.data);
  EXPECT_EQ(a.truth.alpha, b.truth.alpha);
  EXPECT_FALSE(a.data == e.data);
}

TEST(Synthetic, DefaultShapeMirrorsProvincialPanel) {
  const auto sp = generate_synthetic(SyntheticConfig{}, 1);
  EXPECT_EQ(sp.data.N(), 30u);
  EXPECT_EQ(sp.data.T(), 20u);
  EXPECT_EQ(sp.data.periods.front(), 1999);
  EXPECT_EQ(sp.data.periods.back(), 2018);
  EXPECT_EQ(sp.data.z_names, (std::vector<std::string>{"GDP", "VASI", "TRSCG", "TIE"}));
  EXPECT_TRUE((sp.data.y.array() > 0.0).all());
  EXPECT_NO_THROW(sp.data.validate());
}

TEST(Synthetic, RejectsInvalidDimensions) {
  SyntheticConfig c;
  c.N = 0;
  EXPECT_THROW(generate_synthetic(c, 1), ConfigurationError);
  c = SyntheticConfig{};
  c.beta = {1.0};
  EXPECT_THROW(generate_synthetic(c, 1), ConfigurationError);
}

TEST(Describe, MissingPercentAndMoments) {
  PanelDataset d = PanelDataset::zeros({}, {}, 0, 1);
  std::vector<std::string> ids;
  for (int i = 0; i < 30; ++i) ids.push_back("P" + std::to_string(i));
  std::vector<int> years;
  for (int t = 0; t < 10; ++t) years.push_back(2000 + t);
  d = PanelDataset::zeros(ids, years, 0, 1);
  d.x_names = {"AAT"};
  for (std::size_t i = 0; i < 30; ++i)
    for (std::size_t t = 0; t < 10; ++t) {
      d.y(Eigen::Index(i), Eigen::Index(t)) = double(i);
      d.x(d.row(i, t), 0) = double(i * i);
    }
  d.missing(d.row(3, 4), 1) = true;  // 1 of 300
  const auto s = describe(d);
  ASSERT_EQ(s.variables.size(), 2u);
  EXPECT_EQ(s.variables[0].missing_percent, 0.0);
  EXPECT_NEAR(s.variables[1].missing_percent, 0.33, 0.005);
  // the response in each year is 0..29: symmetric, skewness 0, kurtosis of a discrete uniform
  EXPECT_NEAR(s.variables[0].skewness_by_period[0], 0.0, 1e-12);
  const double n = 30.0;
  const double uniform_kurtosis = 3.0 * (3.0 * n * n - 7.0) / (5.0 * (n * n - 1.0));
  EXPECT_NEAR(s.variables[0].kurtosis_by_period[0], uniform_kurtosis, 1e-12);
  EXPECT_GT(s.variables[1].skewness_by_period[0], 0.0);
}

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "psqrnn/errors.hpp"
#include "psqrnn/panel.hpp"

namespace psqrnn {

// ---------------------------------------------------------------------------
// Delimited text I/O

// Column mapping for a panel file. A column may appear in both the
// parametric and network lists.
struct PanelSchema {
  std::string id_column = "province";
  std::string year_column = "year";
  std::string response = "EC";
  std::vector<std::string> z_columns = {"GDP", "VASI", "TRSCG", "TIE"};
  std::vector<std::string> x_columns = {"GDP", "VASI", "TRSCG", "TIE", "AAT", "AARH", "DP", "SH"};
  char delimiter = ',';

  static PanelSchema of(const PanelDataset& d, std::string id = "province",
                        std::string year = "year") {
    PanelSchema s;
    s.id_column = std::move(id);
    s.year_column = std::move(year);
    s.response = d.response_name;
    s.z_columns = d.z_names;
    s.x_columns = d.x_names;
    return s;
  }
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cur += '"';
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t\r");
    const auto e = f.find_last_not_of(" \t\r");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

inline bool is_missing_token(const std::string& s) { return s.empty() || s == "NA"; }

inline bool parse_double(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

inline bool parse_int(const std::string& s, int& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::size_t column_of(const std::vector<std::string>& header, const std::string& name,
                             const std::string& path) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError(path + ": required column '" + name + "' not found");
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace detail

// Reads a balanced panel. Missing cells are empty or "NA" and are recorded in
// the mask; a missing (individual, year) row is an error. Individuals are
// ordered by identifier, periods ascending.
inline PanelDataset ingest_stream(std::istream& in, const PanelSchema& schema,
                                  const std::string& source = "<input>") {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": file is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = detail::split_line(line, schema.delimiter);

  const std::size_t id_col = detail::column_of(header, schema.id_column, source);
  const std::size_t year_col = detail::column_of(header, schema.year_column, source);
  std::vector<std::string> var_names{schema.response};
  var_names.insert(var_names.end(), schema.z_columns.begin(), schema.z_columns.end());
  var_names.insert(var_names.end(), schema.x_columns.begin(), schema.x_columns.end());
  std::vector<std::size_t> var_cols;
  for (const auto& name : var_names) var_cols.push_back(detail::column_of(header, name, source));

  struct Row {
    std::vector<double> values;
    std::vector<bool> missing;
  };
  std::map<std::pair<std::string, int>, Row> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = detail::split_line(line, schema.delimiter);
    if (fields.size() != header.size())
      throw DataError(source + ": row " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " fields, header has " +
                      std::to_string(header.size()));
    const std::string& id = fields[id_col];
    if (id.empty()) throw DataError(source + ": row " + std::to_string(line_no) + ": empty id");
    int year = 0;
    if (!detail::parse_int(fields[year_col], year))
      throw DataError(source + ": row " + std::to_string(line_no) + ", column '" +
                      schema.year_column + "': cannot parse '" + fields[year_col] + "' as a year");
    Row r;
    for (std::size_t v = 0; v < var_cols.size(); ++v) {
      const std::string& f = fields[var_cols[v]];
      double value = 0.0;
      bool miss = detail::is_missing_token(f);
      if (!miss && !detail::parse_double(f, value))
        throw DataError(source + ": row " + std::to_string(line_no) + ", column '" +
                        var_names[v] + "': cannot parse '" + f + "' as a number");
      r.values.push_back(value);
      r.missing.push_back(miss);
    }
    auto [it, inserted] = rows.emplace(std::make_pair(id, year), std::move(r));
    if (!inserted)
      throw DataError(source + ": duplicate row for (" + id + ", " + std::to_string(year) +
                      ") at row " + std::to_string(line_no));
  }
  if (rows.empty()) throw DataError(source + ": no data rows");

  std::set<std::string> ids;
  int y_min = std::numeric_limits<int>::max(), y_max = std::numeric_limits<int>::min();
  for (const auto& [key, _] : rows) {
    ids.insert(key.first);
    y_min = std::min(y_min, key.second);
    y_max = std::max(y_max, key.second);
  }
  std::vector<int> periods;
  for (int y = y_min; y <= y_max; ++y) periods.push_back(y);

  std::string gaps;
  std::size_t n_gaps = 0;
  for (const auto& id : ids)
    for (int y : periods)
      if (!rows.count({id, y})) {
        if (n_gaps < 20) gaps += (n_gaps ? ", " : "") + ("(" + id + ", " + std::to_string(y) + ")");
        ++n_gaps;
      }
  if (n_gaps > 0)
    throw DataError(source + ": unbalanced panel, " + std::to_string(n_gaps) +
                    " missing (individual, year) rows: " + gaps + (n_gaps > 20 ? ", ..." : ""));

  const std::size_t q = schema.z_columns.size(), p = schema.x_columns.size();
  PanelDataset d =
      PanelDataset::zeros(std::vector<std::string>(ids.begin(), ids.end()), periods, q, p);
  d.response_name = schema.response;
  d.z_names = schema.z_columns;
  d.x_names = schema.x_columns;
  for (std::size_t i = 0; i < d.N(); ++i)
    for (std::size_t t = 0; t < d.T(); ++t) {
      const Row& r = rows.at({d.individuals[i], d.periods[t]});
      const auto c = d.row(i, t);
      d.y(Eigen::Index(i), Eigen::Index(t)) = r.values[0];
      d.missing(c, 0) = r.missing[0];
      for (std::size_t j = 0; j < q; ++j) {
        d.z(c, Eigen::Index(j)) = r.values[1 + j];
        d.missing(c, Eigen::Index(1 + j)) = r.missing[1 + j];
      }
      for (std::size_t j = 0; j < p; ++j) {
        d.x(c, Eigen::Index(j)) = r.values[1 + q + j];
        d.missing(c, Eigen::Index(1 + q + j)) = r.missing[1 + q + j];
      }
    }
  return d;
}

inline PanelDataset ingest(const std::string& path, const PanelSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return ingest_stream(in, schema, path);
}

// Writes the panel in the same delimited layout ingest() reads. Columns shared
// between the parametric and network lists are written once.
inline void emit_stream(std::ostream& out, const PanelDataset& d, const PanelSchema& schema) {
  const char sep = schema.delimiter;
  std::vector<std::string> names{d.response_name};
  std::vector<std::pair<int, std::size_t>> source{{0, 0}};  // (block, column)
  for (std::size_t j = 0; j < d.q(); ++j)
    if (std::find(names.begin(), names.end(), d.z_names[j]) == names.end()) {
      names.push_back(d.z_names[j]);
      source.push_back({1, j});
    }
  for (std::size_t j = 0; j < d.p(); ++j)
    if (std::find(names.begin(), names.end(), d.x_names[j]) == names.end()) {
      names.push_back(d.x_names[j]);
      source.push_back({2, j});
    }
  out << schema.id_column << sep << schema.year_column;
  for (const auto& n : names) out << sep << n;
  out << '\n';
  for (std::size_t i = 0; i < d.N(); ++i)
    for (std::size_t t = 0; t < d.T(); ++t) {
      const auto c = d.row(i, t);
      out << d.individuals[i] << sep << d.periods[t];
      for (const auto& [block, j] : source) {
        const auto jj = Eigen::Index(j);
        const bool miss = block == 0   ? d.missing(c, 0)
                          : block == 1 ? d.missing(c, 1 + jj)
                                       : d.missing(c, Eigen::Index(1 + d.q()) + jj);
        const double v = block == 0   ? d.y(Eigen::Index(i), Eigen::Index(t))
                         : block == 1 ? d.z(c, jj)
                                      : d.x(c, jj);
        out << sep << (miss ? std::string("NA") : detail::format_double(v));
      }
      out << '\n';
    }
}

inline void emit(const std::string& path, const PanelDataset& d, const PanelSchema& schema) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  emit_stream(out, d, schema);
}

// ---------------------------------------------------------------------------
// Missing values

namespace detail {
// Accessor for variable slot `s` of cell (i, t).
inline double& slot_value(PanelDataset& d, std::size_t s, std::size_t i, std::size_t t) {
  if (s == 0) return d.y(Eigen::Index(i), Eigen::Index(t));
  if (s <= d.q()) return d.z(d.row(i, t), Eigen::Index(s - 1));
  return d.x(d.row(i, t), Eigen::Index(s - 1 - d.q()));
}
inline double slot_value(const PanelDataset& d, std::size_t s, std::size_t i, std::size_t t) {
  return slot_value(const_cast<PanelDataset&>(d), s, i, t);
}
}  // namespace detail

// Fills each masked cell with the mean of the same individual's observed
// values of that variable, or the global observed mean when the individual has
// none. Observed cells are untouched.
inline PanelDataset impute_mean(const PanelDataset& input) {
  PanelDataset d = input;
  if (!d.has_missing()) return d;
  for (std::size_t s = 0; s < d.variable_count(); ++s) {
    const auto col = Eigen::Index(s);
    if (!d.missing.col(col).any()) continue;
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < d.N(); ++i)
      for (std::size_t t = 0; t < d.T(); ++t)
        if (!d.missing(d.row(i, t), col)) {
          total += detail::slot_value(d, s, i, t);
          ++count;
        }
    if (count == 0)
      throw DataError("variable '" + d.variable_name(s) + "' is missing for every cell");
    const double global = total / static_cast<double>(count);
    for (std::size_t i = 0; i < d.N(); ++i) {
      double own = 0.0;
      std::size_t own_n = 0;
      for (std::size_t t = 0; t < d.T(); ++t)
        if (!d.missing(d.row(i, t), col)) {
          own += detail::slot_value(d, s, i, t);
          ++own_n;
        }
      const double fill = own_n > 0 ? own / static_cast<double>(own_n) : global;
      for (std::size_t t = 0; t < d.T(); ++t)
        if (d.missing(d.row(i, t), col)) detail::slot_value(d, s, i, t) = fill;
    }
  }
  d.missing.setConstant(false);
  return d;
}

// ---------------------------------------------------------------------------
// Standardisation

struct StandardizationState {
  bool enabled = true;
  double y_mean = 0.0;
  double y_sd = 1.0;
  Eigen::VectorXd z_mean, z_sd, x_mean, x_sd;

  static StandardizationState identity(std::size_t q, std::size_t p) {
    StandardizationState s;
    s.enabled = false;
    s.z_mean = Eigen::VectorXd::Zero(Eigen::Index(q));
    s.z_sd = Eigen::VectorXd::Ones(Eigen::Index(q));
    s.x_mean = Eigen::VectorXd::Zero(Eigen::Index(p));
    s.x_sd = Eigen::VectorXd::Ones(Eigen::Index(p));
    return s;
  }
};

struct CellIndex {
  std::size_t individual = 0;
  std::size_t period = 0;
};

inline std::vector<CellIndex> all_cells(const PanelDataset& d) {
  std::vector<CellIndex> out;
  out.reserve(d.cells());
  for (std::size_t i = 0; i < d.N(); ++i)
    for (std::size_t t = 0; t < d.T(); ++t) out.push_back({i, t});
  return out;
}

inline PanelDataset apply_standardization(const PanelDataset& input,
                                          const StandardizationState& s) {
  PanelDataset d = input;
  if (!s.enabled) return d;
  if (s.z_mean.size() != Eigen::Index(d.q()) || s.x_mean.size() != Eigen::Index(d.p()))
    throw ShapeError("standardization state does not match the dataset's covariates");
  d.y = (d.y.array() - s.y_mean) / s.y_sd;
  for (Eigen::Index j = 0; j < d.z.cols(); ++j)
    d.z.col(j) = (d.z.col(j).array() - s.z_mean(j)) / s.z_sd(j);
  for (Eigen::Index j = 0; j < d.x.cols(); ++j)
    d.x.col(j) = (d.x.col(j).array() - s.x_mean(j)) / s.x_sd(j);
  return d;
}

// z-scores every covariate column and the response with statistics (population
// standard deviation) computed over `train_cells` only.
inline std::pair<PanelDataset, StandardizationState> standardize(
    const PanelDataset& d, const std::vector<CellIndex>& train_cells) {
  if (train_cells.empty()) throw DataError("standardize: training set is empty");
  if (d.has_missing()) throw DataError("standardize: impute missing cells first");
  const auto n = static_cast<double>(train_cells.size());
  auto moments = [&](auto&& value, const std::string& name) {
    double mean = 0.0;
    for (const auto& c : train_cells) mean += value(c);
    mean /= n;
    double var = 0.0;
    for (const auto& c : train_cells) var += (value(c) - mean) * (value(c) - mean);
    const double sd = std::sqrt(var / n);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean))))
      throw DataError("standardize: column '" + name + "' has zero variance on the training rows");
    return std::make_pair(mean, sd);
  };
  StandardizationState s;
  for (const auto& c : train_cells)
    if (c.individual >= d.N() || c.period >= d.T())
      throw ShapeError("standardize: training cell outside the panel");
  std::tie(s.y_mean, s.y_sd) = moments(
      [&](const CellIndex& c) { return d.y(Eigen::Index(c.individual), Eigen::Index(c.period)); },
      d.response_name);
  s.z_mean.resize(d.z.cols());
  s.z_sd.resize(d.z.cols());
  for (Eigen::Index j = 0; j < d.z.cols(); ++j)
    std::tie(s.z_mean(j), s.z_sd(j)) = moments(
        [&](const CellIndex& c) { return d.z(d.row(c.individual, c.period), j); },
        d.z_names[std::size_t(j)]);
  s.x_mean.resize(d.x.cols());
  s.x_sd.resize(d.x.cols());
  for (Eigen::Index j = 0; j < d.x.cols(); ++j)
    std::tie(s.x_mean(j), s.x_sd(j)) = moments(
        [&](const CellIndex& c) { return d.x(d.row(c.individual, c.period), j); },
        d.x_names[std::size_t(j)]);
  return {apply_standardization(d, s), s};
}

inline Eigen::VectorXd destandardize_response(const Eigen::Ref<const Eigen::VectorXd>& values,
                                              const StandardizationState& s) {
  if (!s.enabled) return values;
  return (values.array() * s.y_sd + s.y_mean).matrix();
}

// Linear coefficients on the original data scale.
inline Eigen::VectorXd destandardize_beta(const Eigen::Ref<const Eigen::VectorXd>& beta,
                                          const StandardizationState& s) {
  if (!s.enabled || beta.size() == 0) return beta;
  return (beta.array() * s.y_sd / s.z_sd.array()).matrix();
}

// ---------------------------------------------------------------------------
// Scenario splits

struct SamplePair {
  std::size_t individual = 0;
  std::size_t feature_period = 0;  // index into PanelDataset::periods
  std::size_t target_period = 0;   // may be >= T for future targets
  bool future = false;

  bool operator==(const SamplePair&) const = default;
};

struct ScenarioSplit {
  int scenario = 1;
  std::size_t lag = 0;
  bool augment_with_lagged_response = false;
  std::vector<SamplePair> train;
  std::vector<SamplePair> test;
  std::size_t train_periods = 0;  // pairs per individual
  std::size_t test_periods = 0;
};

inline constexpr std::size_t kHorizon = 5;
inline constexpr std::size_t kScenarioLag = 5;

inline std::size_t scenario_min_periods(int scenario) {
  return scenario == 1 ? kHorizon + 1 : 2 * kScenarioLag + kHorizon;
}

// Scenario 1: contemporaneous fit on all but the last five periods, tested on
// the last five. Scenario 2: lag-5 model trained on features 0..T-11 and
// tested on features T-10..T-6 (targets the last five periods). Scenario 3:
// the same model shifted five periods later, forecasting five future periods.
inline ScenarioSplit scenario_split(const PanelDataset& d, int scenario) {
  if (scenario < 1 || scenario > 3) throw ConfigurationError("scenario must be 1, 2 or 3");
  const std::size_t T = d.T();
  if (T < scenario_min_periods(scenario))
    throw DataError("scenario " + std::to_string(scenario) + " needs at least " +
                    std::to_string(scenario_min_periods(scenario)) + " periods, panel has " +
                    std::to_string(T));
  ScenarioSplit s;
  s.scenario = scenario;
  std::size_t train_first = 0, train_last = 0, test_first = 0, test_last = 0;  // feature periods
  if (scenario == 1) {
    train_last = T - kHorizon - 1;
    test_first = T - kHorizon;
    test_last = T - 1;
  } else {
    s.lag = kScenarioLag;
    s.augment_with_lagged_response = true;
    if (scenario == 2) {
      train_last = T - 2 * kScenarioLag - 1;
      test_first = T - 2 * kScenarioLag;
      test_last = T - kScenarioLag - 1;
    } else {
      train_first = kScenarioLag;
      train_last = T - kScenarioLag - 1;
      test_first = T - kHorizon;
      test_last = T - 1;
    }
  }
  for (std::size_t i = 0; i < d.N(); ++i) {
    for (std::size_t t = train_first; t <= train_last; ++t)
      s.train.push_back({i, t, t + s.lag, t + s.lag >= T});
    for (std::size_t t = test_first; t <= test_last; ++t)
      s.test.push_back({i, t, t + s.lag, t + s.lag >= T});
  }
  s.train_periods = train_last - train_first + 1;
  s.test_periods = test_last - test_first + 1;
  return s;
}

enum class SplitPart { Train, Test };

// Balanced panel of (features at feature_period -> response at target_period)
// pairs. Periods are labelled by the target period; future targets carry a
// masked zero response. Scenarios 2 and 3 append the feature-period response
// as an extra network covariate named "lag_<response>".
inline PanelDataset materialize(const PanelDataset& d, const ScenarioSplit& split, SplitPart part) {
  const auto& pairs = part == SplitPart::Train ? split.train : split.test;
  const std::size_t per = part == SplitPart::Train ? split.train_periods : split.test_periods;
  const std::size_t extra = split.augment_with_lagged_response ? 1 : 0;
  std::vector<int> periods;
  const std::size_t first_target = pairs.front().target_period;
  for (std::size_t t = 0; t < per; ++t)
    periods.push_back(d.periods.front() + int(first_target + t));
  PanelDataset out = PanelDataset::zeros(d.individuals, periods, d.q(), d.p() + extra);
  out.response_name = d.response_name;
  out.z_names = d.z_names;
  out.x_names = d.x_names;
  if (extra) out.x_names.push_back("lag_" + d.response_name);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const SamplePair& sp = pairs[k];
    const std::size_t tt = k % per;
    const auto dst = out.row(sp.individual, tt), src = d.row(sp.individual, sp.feature_period);
    if (sp.future) {
      out.y(Eigen::Index(sp.individual), Eigen::Index(tt)) = 0.0;
      out.missing(dst, 0) = true;
    } else {
      out.y(Eigen::Index(sp.individual), Eigen::Index(tt)) =
          d.y(Eigen::Index(sp.individual), Eigen::Index(sp.target_period));
      out.missing(dst, 0) = d.missing(d.row(sp.individual, sp.target_period), 0);
    }
    out.z.row(dst) = d.z.row(src);
    out.x.row(dst).head(d.x.cols()) = d.x.row(src);
    for (std::size_t j = 0; j < d.q() + d.p(); ++j)
      out.missing(dst, Eigen::Index(1 + j)) = d.missing(src, Eigen::Index(1 + j));
    if (extra) {
      out.x(dst, d.x.cols()) = d.y(Eigen::Index(sp.individual), Eigen::Index(sp.feature_period));
      out.missing(dst, Eigen::Index(out.variable_count() - 1)) = d.missing(src, 0);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic panels

enum class NoiseLaw { StudentT, Normal };
enum class NonlinearForm { None, Sine, Quadratic, Interaction, Mixed };

inline std::string to_string(NoiseLaw n) { return n == NoiseLaw::StudentT ? "student_t" : "normal"; }

inline NoiseLaw parse_noise_law(const std::string& s) {
  if (s == "student_t" || s == "t") return NoiseLaw::StudentT;
  if (s == "normal") return NoiseLaw::Normal;
  throw ConfigurationError("unknown noise law '" + s + "'");
}

inline std::string to_string(NonlinearForm g) {
  switch (g) {
    case NonlinearForm::None: return "none";
    case NonlinearForm::Sine: return "sine";
    case NonlinearForm::Quadratic: return "quadratic";
    case NonlinearForm::Interaction: return "interaction";
    case NonlinearForm::Mixed: return "mixed";
  }
  return "none";
}

inline NonlinearForm parse_nonlinear_form(const std::string& s) {
  for (auto g : {NonlinearForm::None, NonlinearForm::Sine, NonlinearForm::Quadratic,
                 NonlinearForm::Interaction, NonlinearForm::Mixed})
    if (to_string(g) == s) return g;
  throw ConfigurationError("unknown nonlinear form '" + s + "'");
}

struct SyntheticConfig {
  std::size_t N = 30;
  std::size_t T = 20;
  std::size_t q = 4;
  std::size_t p = 4;
  double noise_scale = 1.0;
  NoiseLaw noise = NoiseLaw::StudentT;
  double noise_df = 3.0;
  double heterogeneity = 1.0;   // sd of the fixed effects around alpha_center
  double alpha_center = 20.0;   // keeps the response positive for MAPE
  NonlinearForm nonlinear = NonlinearForm::Mixed;
  double nonlinear_scale = 1.0;
  std::vector<double> beta;     // empty -> default pattern
  int first_period = 1999;

  void validate() const {
    if (N < 1 || T < 1) throw ConfigurationError("synthetic panel needs N >= 1 and T >= 1");
    if (nonlinear != NonlinearForm::None && p < 1)
      throw ConfigurationError("a nonlinear component needs p >= 1");
    if (!beta.empty() && beta.size() != q)
      throw ConfigurationError("beta_true length must equal q");
    if (!(noise_scale >= 0.0) || !(heterogeneity >= 0.0))
      throw ConfigurationError("noise and heterogeneity scales must be nonnegative");
    if (noise == NoiseLaw::StudentT && !(noise_df > 0.0))
      throw ConfigurationError("Student-t degrees of freedom must be positive");
  }
};

struct SyntheticTruth {
  Eigen::VectorXd beta;
  Eigen::VectorXd alpha;
  NonlinearForm nonlinear = NonlinearForm::None;
  double nonlinear_scale = 1.0;
  std::string nonlinear_description;
  std::string noise_description;
  double noise_scale = 0.0;
};

// g(x) from the fixed family. Inputs beyond x.size() fall back to x1.
inline double synthetic_nonlinear(NonlinearForm form, double scale,
                                  const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (form == NonlinearForm::None || x.size() == 0) return 0.0;
  const double x1 = x(0);
  const double x2 = x.size() > 1 ? x(1) : x1;
  const double x3 = x.size() > 2 ? x(2) : x2;
  const double sine = 2.0 * std::sin(1.5 * x1);
  const double quad = x2 * x2 - 1.0;
  const double inter = x1 * x3;
  switch (form) {
    case NonlinearForm::Sine: return scale * sine;
    case NonlinearForm::Quadratic: return scale * quad;
    case NonlinearForm::Interaction: return scale * inter;
    case NonlinearForm::Mixed: return scale * (sine + quad + inter);
    default: return 0.0;
  }
}

inline std::string describe_nonlinear(NonlinearForm form, double scale) {
  std::string body;
  switch (form) {
    case NonlinearForm::None: return "0";
    case NonlinearForm::Sine: body = "2*sin(1.5*x1)"; break;
    case NonlinearForm::Quadratic: body = "x2^2 - 1"; break;
    case NonlinearForm::Interaction: body = "x1*x3"; break;
    case NonlinearForm::Mixed: body = "2*sin(1.5*x1) + x2^2 - 1 + x1*x3"; break;
  }
  return detail::format_double(scale) + " * (" + body + ")";
}

struct SyntheticPanel {
  PanelDataset data;
  SyntheticTruth truth;
};

inline std::vector<double> default_beta(std::size_t q) {
  static const double pattern[] = {1.0, -0.5, 0.8, 0.3};
  std::vector<double> b(q);
  for (std::size_t j = 0; j < q; ++j) b[j] = pattern[j % 4];
  return b;
}

// Y_it = Z_it' beta + g(X_it) + alpha_i + sigma * e_it with standard normal
// covariates, alpha_i ~ alpha_center + heterogeneity * N(0,1) and e_it either
// Student-t or standard normal.
inline SyntheticPanel generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  static const char* z_default[] = {"GDP", "VASI", "TRSCG", "TIE"};
  static const char* x_default[] = {"AAT", "AARH", "DP", "SH"};

  std::vector<std::string> ids;
  const int width = cfg.N >= 100 ? 3 : 2;
  for (std::size_t i = 0; i < cfg.N; ++i) {
    std::ostringstream os;
    os << 'P' << std::setw(width) << std::setfill('0') << (i + 1);
    ids.push_back(os.str());
  }
  std::vector<int> periods;
  for (std::size_t t = 0; t < cfg.T; ++t) periods.push_back(cfg.first_period + int(t));

  SyntheticPanel out;
  PanelDataset& d = out.data;
  d = PanelDataset::zeros(ids, periods, cfg.q, cfg.p);
  d.response_name = "EC";
  for (std::size_t j = 0; j < cfg.q; ++j)
    d.z_names[j] = cfg.q == 4 ? z_default[j] : "z" + std::to_string(j + 1);
  for (std::size_t j = 0; j < cfg.p; ++j)
    d.x_names[j] = cfg.p == 4 ? x_default[j] : "x" + std::to_string(j + 1);

  const std::vector<double> beta = cfg.beta.empty() ? default_beta(cfg.q) : cfg.beta;
  SyntheticTruth& truth = out.truth;
  truth.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), Eigen::Index(beta.size()));
  truth.alpha.resize(Eigen::Index(cfg.N));
  truth.nonlinear = cfg.nonlinear;
  truth.nonlinear_scale = cfg.nonlinear_scale;
  truth.nonlinear_description = describe_nonlinear(cfg.nonlinear, cfg.nonlinear_scale);
  truth.noise_scale = cfg.noise_scale;
  truth.noise_description = cfg.noise == NoiseLaw::StudentT
                                ? "student_t(df=" + detail::format_double(cfg.noise_df) + ")"
                                : "normal(0,1)";

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::student_t_distribution<double> student(cfg.noise == NoiseLaw::StudentT ? cfg.noise_df : 1.0);
  for (std::size_t i = 0; i < cfg.N; ++i)
    truth.alpha(Eigen::Index(i)) = cfg.alpha_center + cfg.heterogeneity * normal(rng);
  for (std::size_t i = 0; i < cfg.N; ++i)
    for (std::size_t t = 0; t < cfg.T; ++t) {
      const auto c = d.row(i, t);
      for (Eigen::Index j = 0; j < d.z.cols(); ++j) d.z(c, j) = normal(rng);
      for (Eigen::Index j = 0; j < d.x.cols(); ++j) d.x(c, j) = normal(rng);
      const double e = cfg.noise == NoiseLaw::StudentT ? student(rng) : normal(rng);
      double y = truth.alpha(Eigen::Index(i)) + cfg.noise_scale * e;
      if (cfg.q > 0) y += d.z.row(c).dot(truth.beta);
      y += synthetic_nonlinear(cfg.nonlinear, cfg.nonlinear_scale, d.x.row(c).transpose());
      d.y(Eigen::Index(i), Eigen::Index(t)) = y;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Descriptive statistics

struct VariableSummary {
  std::string name;
  double missing_percent = 0.0;
  std::vector<double> skewness_by_period;  // NaN where fewer than 2 observed values
  std::vector<double> kurtosis_by_period;
};

struct PanelSummary {
  std::size_t N = 0;
  std::size_t T = 0;
  std::vector<VariableSummary> variables;
};

// Missing percentages and per-period moment skewness m3/m2^1.5 and kurtosis
// m4/m2^2 across individuals, computed from observed cells. Shared columns
// are reported once.
inline PanelSummary describe(const PanelDataset& d) {
  PanelSummary s;
  s.N = d.N();
  s.T = d.T();
  std::vector<std::string> seen;
  for (std::size_t slot = 0; slot < d.variable_count(); ++slot) {
    const std::string name = d.variable_name(slot);
    if (std::find(seen.begin(), seen.end(), name) != seen.end()) continue;
    seen.push_back(name);
    VariableSummary v;
    v.name = name;
    const auto col = Eigen::Index(slot);
    v.missing_percent = 100.0 * static_cast<double>(d.missing.col(col).count()) /
                        static_cast<double>(d.cells());
    for (std::size_t t = 0; t < d.T(); ++t) {
      std::vector<double> xs;
      for (std::size_t i = 0; i < d.N(); ++i)
        if (!d.missing(d.row(i, t), col)) xs.push_back(detail::slot_value(d, slot, i, t));
      double skew = std::numeric_limits<double>::quiet_NaN(), kurt = skew;
      if (xs.size() >= 2) {
        const double n = static_cast<double>(xs.size());
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= n;
        double m2 = 0.0, m3 = 0.0, m4 = 0.0;
        for (double x : xs) {
          const double e = x - mean;
          m2 += e * e;
          m3 += e * e * e;
          m4 += e * e * e * e;
        }
        m2 /= n;
        m3 /= n;
        m4 /= n;
        if (m2 > 0.0) {
          skew = m3 / std::pow(m2, 1.5);
          kurt = m4 / (m2 * m2);
        }
      }
      v.skewness_by_period.push_back(skew);
      v.kurtosis_by_period.push_back(kurt);
    }
    s.variables.push_back(std::move(v));
  }
  return s;
}

}  // namespace psqrnn

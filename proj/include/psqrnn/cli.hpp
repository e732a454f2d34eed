#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "psqrnn/errors.hpp"
#include "psqrnn/paneldata.hpp"
#include "psqrnn/pipeline.hpp"
#include "psqrnn/selection.hpp"

namespace psqrnn::cli {

using json = nlohmann::ordered_json;

inline constexpr int kArtifactVersion = 1;

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

// Everything a command needs. The resolved form is echoed into every artifact
// and can be fed back through `rerun`.
struct RunConfig {
  std::string command;
  std::string input;
  std::string output;
  // second file of a command: dataset copy (ingest), truth sidecar (synth),
  // table (grid-search), run record (predict), long series (evaluate)
  std::string aux_output;
  std::string fit;
  std::string predictions;
  std::string actuals;
  std::string column;
  std::string rows = "test";
  PanelSchema schema;
  bool impute = true;

  int scenario = 1;
  std::string kind = "psqrnn";
  std::string taus;  // as typed: a count K or a list
  std::vector<double> tau_values;
  bool per_tau = false;
  std::vector<std::size_t> hidden = {10, 5};
  std::string activation = "elu";
  double lambda1 = 0.005;
  double lambda2 = 0.01;
  std::size_t restarts = 5;
  std::uint64_t seed = 1;
  bool standardize = true;
  double eps_start = std::ldexp(1.0, -8);
  double eps_end = std::ldexp(1.0, -32);
  double eps_factor = std::ldexp(1.0, -4);
  std::size_t max_iters = 500;
  double grad_tol = 1e-6;
  std::string optimizer = "lbfgs";

  std::vector<std::size_t> grid_n1, grid_n2;
  std::vector<double> grid_lambda1, grid_lambda2;

  SyntheticConfig synth;
  std::string noise = "student_t";
  std::string nonlinear = "mixed";
};

// ---------------------------------------------------------------------------
// config <-> json

inline json config_to_json(const RunConfig& c) {
  json j;
  j["command"] = c.command;
  j["input"] = c.input;
  j["output"] = c.output;
  j["aux_output"] = c.aux_output;
  j["fit"] = c.fit;
  j["predictions"] = c.predictions;
  j["actuals"] = c.actuals;
  j["column"] = c.column;
  j["rows"] = c.rows;
  j["schema"] = {{"id", c.schema.id_column},
                 {"year", c.schema.year_column},
                 {"response", c.schema.response},
                 {"z", c.schema.z_columns},
                 {"x", c.schema.x_columns},
                 {"delimiter", std::string(1, c.schema.delimiter)}};
  j["impute"] = c.impute;
  j["scenario"] = c.scenario;
  j["kind"] = c.kind;
  j["taus"] = c.tau_values;
  j["tau_weights"] = "uniform";
  j["per_tau"] = c.per_tau;
  j["hidden"] = c.hidden;
  j["activation"] = c.activation;
  j["lambda1"] = c.lambda1;
  j["lambda2"] = c.lambda2;
  j["restarts"] = c.restarts;
  j["seed"] = c.seed;
  j["standardize"] = c.standardize;
  j["anneal"] = {{"eps_start", c.eps_start}, {"eps_end", c.eps_end}, {"factor", c.eps_factor}};
  j["max_iters_per_stage"] = c.max_iters;
  j["grad_tol"] = c.grad_tol;
  j["optimizer"] = c.optimizer;
  j["grid"] = {{"n1", c.grid_n1},
               {"n2", c.grid_n2},
               {"lambda1", c.grid_lambda1},
               {"lambda2", c.grid_lambda2}};
  const SyntheticConfig& s = c.synth;
  j["synth"] = {{"individuals", s.N},
                {"periods", s.T},
                {"q", s.q},
                {"p", s.p},
                {"sigma", s.noise_scale},
                {"noise", c.noise},
                {"df", s.noise_df},
                {"heterogeneity", s.heterogeneity},
                {"alpha_center", s.alpha_center},
                {"nonlinear", c.nonlinear},
                {"nonlinear_scale", s.nonlinear_scale},
                {"beta", s.beta},
                {"first_period", s.first_period}};
  return j;
}

inline RunConfig config_from_json(const json& j) {
  RunConfig c;
  j.at("command").get_to(c.command);
  j.at("input").get_to(c.input);
  j.at("output").get_to(c.output);
  j.at("aux_output").get_to(c.aux_output);
  j.at("fit").get_to(c.fit);
  j.at("predictions").get_to(c.predictions);
  j.at("actuals").get_to(c.actuals);
  j.at("column").get_to(c.column);
  j.at("rows").get_to(c.rows);
  const json& s = j.at("schema");
  s.at("id").get_to(c.schema.id_column);
  s.at("year").get_to(c.schema.year_column);
  s.at("response").get_to(c.schema.response);
  s.at("z").get_to(c.schema.z_columns);
  s.at("x").get_to(c.schema.x_columns);
  const auto delim = s.at("delimiter").get<std::string>();
  if (delim.size() != 1) throw ConfigurationError("delimiter must be a single character");
  c.schema.delimiter = delim[0];
  j.at("impute").get_to(c.impute);
  j.at("scenario").get_to(c.scenario);
  j.at("kind").get_to(c.kind);
  j.at("taus").get_to(c.tau_values);
  j.at("per_tau").get_to(c.per_tau);
  j.at("hidden").get_to(c.hidden);
  j.at("activation").get_to(c.activation);
  j.at("lambda1").get_to(c.lambda1);
  j.at("lambda2").get_to(c.lambda2);
  j.at("restarts").get_to(c.restarts);
  j.at("seed").get_to(c.seed);
  j.at("standardize").get_to(c.standardize);
  j.at("anneal").at("eps_start").get_to(c.eps_start);
  j.at("anneal").at("eps_end").get_to(c.eps_end);
  j.at("anneal").at("factor").get_to(c.eps_factor);
  j.at("max_iters_per_stage").get_to(c.max_iters);
  j.at("grad_tol").get_to(c.grad_tol);
  j.at("optimizer").get_to(c.optimizer);
  j.at("grid").at("n1").get_to(c.grid_n1);
  j.at("grid").at("n2").get_to(c.grid_n2);
  j.at("grid").at("lambda1").get_to(c.grid_lambda1);
  j.at("grid").at("lambda2").get_to(c.grid_lambda2);
  const json& g = j.at("synth");
  g.at("individuals").get_to(c.synth.N);
  g.at("periods").get_to(c.synth.T);
  g.at("q").get_to(c.synth.q);
  g.at("p").get_to(c.synth.p);
  g.at("sigma").get_to(c.synth.noise_scale);
  g.at("noise").get_to(c.noise);
  g.at("df").get_to(c.synth.noise_df);
  g.at("heterogeneity").get_to(c.synth.heterogeneity);
  g.at("alpha_center").get_to(c.synth.alpha_center);
  g.at("nonlinear").get_to(c.nonlinear);
  g.at("nonlinear_scale").get_to(c.synth.nonlinear_scale);
  g.at("beta").get_to(c.synth.beta);
  g.at("first_period").get_to(c.synth.first_period);
  return c;
}

// ---------------------------------------------------------------------------
// resolution and validation

// "K" gives the midpoint rule (2k+1)/(2K), which is 0.01 + 0.02k for K = 50;
// anything else is read as an explicit list.
inline std::vector<double> parse_taus(const std::string& text) {
  std::vector<double> out;
  if (text.find_first_of(".,eE") == std::string::npos) {
    int k = 0;
    if (!detail::parse_int(text, k) || k < 1)
      throw ConfigurationError("--taus: expected a positive count or a list, got '" + text + "'");
    const auto K = static_cast<double>(k);
    for (int i = 0; i < k; ++i) out.push_back((2.0 * i + 1.0) / (2.0 * K));
    return out;
  }
  for (const auto& tok : detail::split_line(text, ',')) {
    double v = 0.0;
    if (!detail::parse_double(tok, v))
      throw ConfigurationError("--taus: cannot parse '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

inline std::vector<double> default_taus(ModelKind kind) {
  if (kind == ModelKind::QRNN) return {0.5};
  std::vector<double> out;
  for (int k = 0; k < 50; ++k) out.push_back(0.01 + 0.02 * k);
  return out;
}

inline void require(const std::string& value, const char* flag, const std::string& command) {
  if (value.empty()) throw ConfigurationError(command + ": " + flag + " is required");
}

inline bool trains(const std::string& command) {
  return command == "train" || command == "grid-search";
}

// Fills defaults and checks every precondition before any work starts.
// Idempotent, so a config read back from an artifact resolves to itself.
inline void resolve(RunConfig& c) {
  static const std::vector<std::string> commands = {"ingest", "synth", "train",
                                                    "grid-search", "predict", "evaluate"};
  if (std::find(commands.begin(), commands.end(), c.command) == commands.end())
    throw ConfigurationError("unknown command '" + c.command + "'");

  if (c.command == "ingest") {
    require(c.input, "--input", c.command);
    require(c.output, "--output", c.command);
  } else if (c.command == "synth") {
    require(c.output, "--output", c.command);
    if (c.aux_output.empty()) c.aux_output = c.output + ".truth.json";
    c.synth.noise = parse_noise_law(c.noise);
    c.synth.nonlinear = parse_nonlinear_form(c.nonlinear);
    if (c.synth.beta.empty()) c.synth.beta = default_beta(c.synth.q);
    c.synth.validate();
  } else if (c.command == "predict") {
    require(c.fit, "--fit", c.command);
    require(c.input, "--input", c.command);
    require(c.output, "--output", c.command);
    if (c.aux_output.empty()) c.aux_output = c.output + ".run.json";
    if (c.rows != "test" && c.rows != "train")
      throw ConfigurationError("--rows must be 'train' or 'test'");
  } else if (c.command == "evaluate") {
    require(c.predictions, "--predictions", c.command);
    require(c.actuals, "--actuals", c.command);
    require(c.output, "--output", c.command);
    if (c.aux_output.empty()) c.aux_output = c.output + ".series.csv";
  } else {
    require(c.input, "--input", c.command);
    require(c.output, "--output", c.command);
    if (c.command == "grid-search" && c.aux_output.empty()) c.aux_output = c.output + ".table.csv";
  }
  if (c.schema.z_columns.empty() && c.schema.x_columns.empty() && c.command != "synth")
    throw ConfigurationError("schema needs at least one covariate column");

  if (!trains(c.command)) return;
  if (c.scenario < 1 || c.scenario > 3) throw ConfigurationError("--scenario must be 1, 2 or 3");
  const ModelKind kind = parse_model_kind(c.kind);
  parse_activation(c.activation);
  parse_optimizer(c.optimizer);
  if (!c.taus.empty()) {
    c.tau_values = parse_taus(c.taus);
    c.taus.clear();
  }
  if (c.tau_values.empty()) c.tau_values = default_taus(kind);
  TauGrid::uniform(c.tau_values);
  if (kind == ModelKind::LinearPanelQR) {
    c.hidden.clear();
  } else {
    if (c.hidden.empty()) throw ConfigurationError("--hidden needs at least one layer size");
    for (auto n : c.hidden)
      if (n < 1) throw ConfigurationError("hidden layer sizes must be >= 1");
  }
  PenaltyConfig{c.lambda1, c.lambda2}.validate();
  TrainConfig{{c.eps_start, c.eps_end, c.eps_factor}, c.restarts, c.max_iters, c.grad_tol, c.seed}
      .validate();
  if (c.command == "grid-search") {
    if (kind == ModelKind::LinearPanelQR)
      throw ConfigurationError("grid-search needs a network model (psqrnn or qrnn)");
    if (c.hidden.size() > 2) throw ConfigurationError("grid-search supports one or two hidden layers");
    if (c.per_tau) throw ConfigurationError("grid-search fits the composite grid; drop --per-tau");
    if (c.grid_n1.empty()) c.grid_n1 = {c.hidden[0]};
    if (c.grid_n2.empty() && c.hidden.size() == 2) c.grid_n2 = {c.hidden[1]};
    if (c.hidden.size() == 1) c.grid_n2.clear();
    if (c.grid_lambda1.empty()) c.grid_lambda1 = {c.lambda1};
    if (c.grid_lambda2.empty()) c.grid_lambda2 = {c.lambda2};
    for (auto n : c.grid_n1)
      if (n < 1) throw ConfigurationError("--grid-n1 values must be >= 1");
    for (auto n : c.grid_n2)
      if (n < 1) throw ConfigurationError("--grid-n2 values must be >= 1");
    for (double l : c.grid_lambda1) PenaltyConfig{l, 0.0}.validate();
    for (double l : c.grid_lambda2) PenaltyConfig{0.0, l}.validate();
  }
}

inline TrainConfig train_config(const RunConfig& c) {
  TrainConfig t;
  t.schedule = {c.eps_start, c.eps_end, c.eps_factor};
  t.restarts = c.restarts;
  t.max_iters_per_stage = c.max_iters;
  t.grad_tol = c.grad_tol;
  t.seed = c.seed;
  t.optimizer = parse_optimizer(c.optimizer);
  return t;
}

// ---------------------------------------------------------------------------
// artifact pieces

inline json vec_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Eigen::VectorXd json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size()));
}

inline json state_to_json(const StandardizationState& s) {
  return {{"enabled", s.enabled},  {"y_mean", s.y_mean},        {"y_sd", s.y_sd},
          {"z_mean", vec_json(s.z_mean)}, {"z_sd", vec_json(s.z_sd)},
          {"x_mean", vec_json(s.x_mean)}, {"x_sd", vec_json(s.x_sd)}};
}

inline StandardizationState state_from_json(const json& j) {
  StandardizationState s;
  j.at("enabled").get_to(s.enabled);
  j.at("y_mean").get_to(s.y_mean);
  j.at("y_sd").get_to(s.y_sd);
  s.z_mean = json_vec(j.at("z_mean"));
  s.z_sd = json_vec(j.at("z_sd"));
  s.x_mean = json_vec(j.at("x_mean"));
  s.x_sd = json_vec(j.at("x_sd"));
  return s;
}

inline json fit_to_json(const FitResult& f, const StandardizationState& state) {
  json j;
  j["kind"] = std::string(to_string(f.spec.kind));
  j["q"] = f.spec.q;
  j["n_individuals"] = f.spec.n_individuals;
  j["taus"] = f.grid.taus();
  j["weights"] = f.grid.weights();
  j["lambda1"] = f.penalties.lambda1;
  j["lambda2"] = f.penalties.lambda2;
  j["beta"] = vec_json(f.params.beta);
  j["beta_data_scale"] = vec_json(destandardize_beta(f.params.beta, state));
  j["alpha"] = vec_json(f.params.alpha);
  if (uses_network(f.spec.kind)) {
    j["network"] = {{"input_dim", f.spec.network.input_dim},
                    {"hidden", f.spec.network.hidden_sizes},
                    {"activation", std::string(to_string(f.spec.network.activation))},
                    {"elu_alpha", f.spec.network.elu_alpha},
                    {"parameters", vec_json(flatten(f.params.net))}};
  } else {
    j["network"] = nullptr;
  }
  j["final_objective"] = f.final_objective;
  j["final_epsilon"] = f.final_epsilon;
  j["restart_index"] = f.restart_index;
  j["restart_objectives"] = f.restart_objectives;
  j["converged"] = f.converged;
  json trace = json::array();
  for (const auto& s : f.stage_trace)
    trace.push_back({{"epsilon", s.epsilon},
                     {"iterations", s.iterations},
                     {"objective", s.objective},
                     {"stop_reason", s.stop_reason}});
  j["stage_trace"] = trace;
  return j;
}

inline FitResult fit_from_json(const json& j) {
  FitResult f;
  const ModelKind kind = parse_model_kind(j.at("kind").get<std::string>());
  NetworkSpec net;
  if (uses_network(kind)) {
    const json& n = j.at("network");
    n.at("input_dim").get_to(net.input_dim);
    n.at("hidden").get_to(net.hidden_sizes);
    net.activation = parse_activation(n.at("activation").get<std::string>());
    n.at("elu_alpha").get_to(net.elu_alpha);
  }
  f.spec = ModelSpec::make(kind, net, j.at("q").get<std::size_t>(),
                           j.at("n_individuals").get<std::size_t>());
  f.grid = TauGrid(j.at("taus").get<std::vector<double>>(),
                   j.at("weights").get<std::vector<double>>());
  f.penalties = {j.at("lambda1").get<double>(), j.at("lambda2").get<double>()};
  f.params.beta = json_vec(j.at("beta"));
  f.params.alpha = json_vec(j.at("alpha"));
  f.params.net = uses_network(kind)
                     ? unflatten(json_vec(j.at("network").at("parameters")), f.spec.network)
                     : NetworkParameters::zeros(f.spec.network);
  detail::check_params(f.params, f.spec);
  j.at("final_objective").get_to(f.final_objective);
  j.at("final_epsilon").get_to(f.final_epsilon);
  j.at("restart_index").get_to(f.restart_index);
  j.at("restart_objectives").get_to(f.restart_objectives);
  j.at("converged").get_to(f.converged);
  for (const auto& s : j.at("stage_trace"))
    f.stage_trace.push_back({s.at("epsilon").get<double>(), s.at("iterations").get<std::size_t>(),
                             s.at("objective").get<double>(),
                             s.at("stop_reason").get<std::string>(),
                             {}});
  return f;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
  if (!out) throw DataError("failed writing '" + path + "'");
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline json read_json(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw DataError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline json header(const char* format, const RunConfig& c) {
  return {{"format", format}, {"version", kArtifactVersion}, {"config", config_to_json(c)}};
}

inline std::string tau_label(double tau) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "q_%.6g", tau);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline PanelDataset load_panel(const RunConfig& c) {
  return complete_panel(ingest(c.input, c.schema), c.impute);
}

// ---------------------------------------------------------------------------
// commands

struct Console {
  std::ostream& out;
  void wrote(const std::string& path) const { out << "wrote " << path << "\n"; }
};

inline void cmd_ingest(const RunConfig& c, const Console& con) {
  const PanelDataset d = ingest(c.input, c.schema);
  const PanelSummary s = describe(d);
  json j = header("psqrnn-ingest", c);
  j["N"] = s.N;
  j["T"] = s.T;
  j["individuals"] = d.individuals;
  j["periods"] = d.periods;
  json vars = json::array();
  for (const auto& v : s.variables)
    vars.push_back({{"name", v.name},
                    {"missing_percent", v.missing_percent},
                    {"skewness_by_period", v.skewness_by_period},
                    {"kurtosis_by_period", v.kurtosis_by_period}});
  j["variables"] = vars;
  write_json(c.output, j);
  con.wrote(c.output);
  if (!c.aux_output.empty()) {
    emit(c.aux_output, d, c.schema);
    con.wrote(c.aux_output);
  }
}

inline void cmd_synth(const RunConfig& c, const Console& con) {
  const SyntheticPanel sp = generate_synthetic(c.synth, c.seed);
  emit(c.output, sp.data, PanelSchema::of(sp.data));
  con.wrote(c.output);
  json j = header("psqrnn-synth", c);
  j["beta"] = vec_json(sp.truth.beta);
  json alpha = json::object();
  for (std::size_t i = 0; i < sp.data.N(); ++i)
    alpha[sp.data.individuals[i]] = sp.truth.alpha(Eigen::Index(i));
  j["alpha"] = alpha;
  j["nonlinear"] = sp.truth.nonlinear_description;
  j["noise"] = sp.truth.noise_description;
  j["noise_scale"] = sp.truth.noise_scale;
  write_json(c.aux_output, j);
  con.wrote(c.aux_output);
}

inline json fit_artifact(const RunConfig& c, const ScenarioData& s) {
  json j = header("psqrnn-fit", c);
  j["data"] = {{"individuals", s.train.individuals},
               {"response", s.train.response_name},
               {"z_names", s.train.z_names},
               {"x_names", s.train.x_names},
               {"train_periods", s.train.periods},
               {"test_periods", s.test.periods}};
  j["standardization"] = state_to_json(s.state);
  return j;
}

inline void cmd_train(const RunConfig& c, const Console& con) {
  const ScenarioData s = prepare_scenario(load_panel(c), c.scenario, c.standardize);
  const ModelKind kind = parse_model_kind(c.kind);
  const ModelSpec spec =
      ModelSpec::for_dataset(kind, c.hidden, s.train_scaled, parse_activation(c.activation));
  const PenaltyConfig pen{c.lambda1, c.lambda2};
  std::vector<FitResult> fits;
  if (c.per_tau)
    fits = fit_per_tau(s.train_scaled, spec, c.tau_values, pen, train_config(c));
  else
    fits.push_back(fit(s.train_scaled, spec, TauGrid::uniform(c.tau_values), pen, train_config(c)));
  json j = fit_artifact(c, s);
  j["fits"] = json::array();
  for (const auto& f : fits) j["fits"].push_back(fit_to_json(f, s.state));
  write_json(c.output, j);
  con.wrote(c.output);
}

inline void cmd_grid_search(const RunConfig& c, const Console& con) {
  const ScenarioData s = prepare_scenario(load_panel(c), c.scenario, c.standardize);
  NetworkSpec net;
  net.input_dim = s.train_scaled.p();
  net.hidden_sizes = c.hidden;
  net.activation = parse_activation(c.activation);
  const SearchGrid grid{c.grid_n1, c.grid_n2, c.grid_lambda1, c.grid_lambda2};
  const GridSearchResult r = grid_search(s.train_scaled, parse_model_kind(c.kind),
                                         TauGrid::uniform(c.tau_values), grid, net, train_config(c));

  std::ostringstream table;
  table << "n1,n2,lambda1,lambda2,avg_loss,bic,status\n";
  json rows = json::array();
  for (const auto& row : r.table) {
    const std::string n2 = row.point.n2 ? std::to_string(*row.point.n2) : "NA";
    table << row.point.n1 << ',' << n2 << ',' << detail::format_double(row.point.lambda1) << ','
          << detail::format_double(row.point.lambda2) << ','
          << (std::isfinite(row.avg_loss) ? detail::format_double(row.avg_loss) : "NA") << ','
          << (std::isfinite(row.bic) ? detail::format_double(row.bic) : "NA") << ','
          << csv_field(row.status) << '\n';
    rows.push_back({{"n1", row.point.n1},
                    {"n2", row.point.n2 ? json(*row.point.n2) : json(nullptr)},
                    {"lambda1", row.point.lambda1},
                    {"lambda2", row.point.lambda2},
                    {"avg_loss", row.avg_loss},
                    {"bic", row.bic},
                    {"status", row.status}});
  }
  write_text(c.aux_output, table.str());
  con.wrote(c.aux_output);

  json j = fit_artifact(c, s);
  j["selection"] = {{"criterion", r.best.n2 ? "bic2" : "bic1"},
                    {"best",
                     {{"n1", r.best.n1},
                      {"n2", r.best.n2 ? json(*r.best.n2) : json(nullptr)},
                      {"lambda1", r.best.lambda1},
                      {"lambda2", r.best.lambda2}}},
                    {"table", rows}};
  j["fits"] = json::array({fit_to_json(r.best_fit, s.state)});
  write_json(c.output, j);
  con.wrote(c.output);
}

inline void cmd_predict(RunConfig& c, const Console& con) {
  const json art = read_json(c.fit);
  if (art.value("format", "") != "psqrnn-fit" || art.value("version", 0) != kArtifactVersion)
    throw DataError("'" + c.fit + "' is not a version " + std::to_string(kArtifactVersion) +
                    " fit artifact");
  // the dataset is read and split the way the fit was trained
  const RunConfig trained = config_from_json(art.at("config"));
  c.schema = trained.schema;
  c.impute = trained.impute;
  c.scenario = trained.scenario;
  c.standardize = trained.standardize;

  const StandardizationState state = state_from_json(art.at("standardization"));
  std::vector<FitResult> fits;
  for (const auto& f : art.at("fits")) fits.push_back(fit_from_json(f));
  if (fits.empty()) throw DataError("fit artifact holds no fits");

  const PanelDataset raw = load_panel(c);
  const auto known = art.at("data").at("individuals").get<std::vector<std::string>>();
  for (const auto& id : raw.individuals)
    if (std::find(known.begin(), known.end(), id) == known.end())
      throw LookupError("individual '" + id + "' is not in the fit");
  if (raw.individuals != known)
    throw ShapeError("dataset has " + std::to_string(raw.N()) + " individuals, the fit has " +
                     std::to_string(known.size()));

  const ScenarioSplit split = scenario_split(raw, c.scenario);
  const SplitPart part_kind = c.rows == "train" ? SplitPart::Train : SplitPart::Test;
  const PanelDataset part = materialize(raw, split, part_kind);
  const PanelDataset scaled = apply_standardization(part, state);
  const auto& pairs = part_kind == SplitPart::Train ? split.train : split.test;

  std::vector<std::string> columns;
  std::vector<Eigen::MatrixXd> values;
  for (const auto& f : fits) {
    columns.push_back(fits.size() == 1 && !trained.per_tau ? "prediction"
                                                           : tau_label(f.grid.taus().front()));
    values.push_back(forecast(f, scaled, state));
  }

  std::ostringstream csv;
  csv << "individual,period,future,actual";
  for (const auto& name : columns) csv << ',' << name;
  csv << '\n';
  std::size_t future_rows = 0;
  for (std::size_t i = 0; i < part.N(); ++i)
    for (std::size_t t = 0; t < part.T(); ++t) {
      const bool future = pairs[i * part.T() + t].future;
      future_rows += future;
      csv << csv_field(part.individuals[i]) << ',' << part.periods[t] << ',' << (future ? 1 : 0)
          << ',';
      csv << (future ? std::string("NA")
                     : detail::format_double(part.y(Eigen::Index(i), Eigen::Index(t))));
      for (const auto& m : values)
        csv << ',' << detail::format_double(m(Eigen::Index(i), Eigen::Index(t)));
      csv << '\n';
    }
  write_text(c.output, csv.str());
  con.wrote(c.output);

  json j = header("psqrnn-predict", c);
  j["columns"] = columns;
  j["rows"] = part.cells();
  j["future_rows"] = future_rows;
  j["periods"] = part.periods;
  write_json(c.aux_output, j);
  con.wrote(c.aux_output);
}

struct PredictionTable {
  std::vector<std::string> individuals;  // order of first appearance
  std::vector<int> periods;              // sorted
  Eigen::MatrixXd predicted;
  Eigen::MatrixXd actual;
  std::string column;
};

inline PredictionTable align_predictions(const RunConfig& c) {
  std::istringstream in(read_text(c.predictions));
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + c.predictions + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto head = detail::split_line(line, ',');
  auto find = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(head.begin(), head.end(), name);
    if (it == head.end())
      throw DataError("'" + c.predictions + "' has no column '" + name + "'");
    return std::size_t(it - head.begin());
  };
  const std::size_t ci = find("individual"), cp = find("period");
  std::size_t cv = 0;
  if (!c.column.empty()) {
    cv = find(c.column);
  } else {
    const auto it = std::find(head.begin(), head.end(), "prediction");
    if (it != head.end()) {
      cv = std::size_t(it - head.begin());
    } else {
      if (head.size() < 5) throw DataError("'" + c.predictions + "' has no prediction column");
      cv = 4;
    }
  }

  const PanelDataset truth = ingest(c.actuals, c.schema);
  PredictionTable tab;
  tab.column = head[cv];
  struct Cell {
    std::size_t individual;
    int period;
    double predicted, actual;
  };
  std::vector<Cell> cells;
  std::vector<std::string> mismatches;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_line(line, ',');
    if (f.size() != head.size())
      throw DataError("'" + c.predictions + "' row " + std::to_string(row) + ": expected " +
                      std::to_string(head.size()) + " fields");
    int period = 0;
    double pred = 0.0;
    if (!detail::parse_int(f[cp], period) || !detail::parse_double(f[cv], pred))
      throw DataError("'" + c.predictions + "' row " + std::to_string(row) +
                      ": unparseable period or prediction");
    const std::string key = "(" + f[ci] + ", " + std::to_string(period) + ")";
    const auto ii = std::find(truth.individuals.begin(), truth.individuals.end(), f[ci]);
    const auto tt = std::find(truth.periods.begin(), truth.periods.end(), period);
    if (ii == truth.individuals.end()) {
      mismatches.push_back(key + " unknown individual");
      continue;
    }
    if (tt == truth.periods.end()) {
      mismatches.push_back(key + " period not in actuals");
      continue;
    }
    const auto i = std::size_t(ii - truth.individuals.begin());
    const auto t = std::size_t(tt - truth.periods.begin());
    if (truth.missing(truth.row(i, t), 0)) {
      mismatches.push_back(key + " actual is missing");
      continue;
    }
    if (std::find(tab.individuals.begin(), tab.individuals.end(), f[ci]) == tab.individuals.end())
      tab.individuals.push_back(f[ci]);
    if (std::find(tab.periods.begin(), tab.periods.end(), period) == tab.periods.end())
      tab.periods.push_back(period);
    cells.push_back({std::size_t(std::find(tab.individuals.begin(), tab.individuals.end(), f[ci]) -
                                 tab.individuals.begin()),
                     period, pred, truth.y(Eigen::Index(i), Eigen::Index(t))});
  }
  if (!mismatches.empty()) {
    std::string msg = std::to_string(mismatches.size()) + " prediction rows do not align:";
    for (std::size_t k = 0; k < mismatches.size() && k < 10; ++k) msg += " " + mismatches[k] + ";";
    if (mismatches.size() > 10) msg += " ...";
    throw DataError(msg);
  }
  if (cells.empty()) throw DataError("'" + c.predictions + "' has no rows");
  std::sort(tab.periods.begin(), tab.periods.end());
  const auto n = Eigen::Index(tab.individuals.size()), h = Eigen::Index(tab.periods.size());
  tab.predicted = Eigen::MatrixXd::Constant(n, h, std::numeric_limits<double>::quiet_NaN());
  tab.actual = tab.predicted;
  for (const auto& cell : cells) {
    const auto t = Eigen::Index(std::lower_bound(tab.periods.begin(), tab.periods.end(), cell.period) -
                                tab.periods.begin());
    const auto i = Eigen::Index(cell.individual);
    if (!std::isnan(tab.predicted(i, t)))
      throw DataError("duplicate prediction for (" + tab.individuals[cell.individual] + ", " +
                      std::to_string(cell.period) + ")");
    tab.predicted(i, t) = cell.predicted;
    tab.actual(i, t) = cell.actual;
  }
  if (tab.predicted.hasNaN())
    throw DataError("predictions do not cover every (individual, period) pair");
  return tab;
}

inline json report_json(const ForecastReport& r, const PredictionTable& tab) {
  json j;
  j["column"] = tab.column;
  j["total"] = {{"mape", r.total_mape}, {"rrmse", r.total_rrmse}};
  json by_i = json::array(), by_t = json::array();
  for (std::size_t i = 0; i < tab.individuals.size(); ++i)
    by_i.push_back({{"individual", tab.individuals[i]},
                    {"mape", r.mape_by_individual(Eigen::Index(i))},
                    {"rrmse", r.rrmse_by_individual(Eigen::Index(i))}});
  for (std::size_t t = 0; t < tab.periods.size(); ++t)
    by_t.push_back({{"period", tab.periods[t]},
                    {"mape", r.mape_by_period(Eigen::Index(t))},
                    {"rrmse", r.rrmse_by_period(Eigen::Index(t))}});
  j["by_individual"] = by_i;
  j["by_period"] = by_t;
  j["summary"] = {{"mape_mean", r.mape_mean},   {"mape_sd", r.mape_sd},
                  {"rrmse_mean", r.rrmse_mean}, {"rrmse_sd", r.rrmse_sd},
                  {"sd_denominator", "N (population)"}};
  return j;
}

inline void cmd_evaluate(const RunConfig& c, const Console& con) {
  const PredictionTable tab = align_predictions(c);
  const ForecastReport r = report(tab.actual, tab.predicted);
  json j = header("psqrnn-report", c);
  j["report"] = report_json(r, tab);
  write_json(c.output, j);
  con.wrote(c.output);

  std::ostringstream csv;
  csv << "individual,period,actual,predicted\n";
  for (std::size_t i = 0; i < tab.individuals.size(); ++i)
    for (std::size_t t = 0; t < tab.periods.size(); ++t)
      csv << csv_field(tab.individuals[i]) << ',' << tab.periods[t] << ','
          << detail::format_double(tab.actual(Eigen::Index(i), Eigen::Index(t))) << ','
          << detail::format_double(tab.predicted(Eigen::Index(i), Eigen::Index(t))) << '\n';
  write_text(c.aux_output, csv.str());
  con.wrote(c.aux_output);
}

inline void execute(RunConfig c, const Console& con) {
  resolve(c);
  if (c.command == "ingest") cmd_ingest(c, con);
  else if (c.command == "synth") cmd_synth(c, con);
  else if (c.command == "train") cmd_train(c, con);
  else if (c.command == "grid-search") cmd_grid_search(c, con);
  else if (c.command == "predict") cmd_predict(c, con);
  else cmd_evaluate(c, con);
}

// ---------------------------------------------------------------------------
// argument parsing

struct Flags {
  RunConfig cfg;
  std::string delimiter = ",";
  bool no_impute = false;
  bool no_standardize = false;
  std::string config_path;
};

inline void add_schema_options(CLI::App* s, Flags& f) {
  s->add_option("--id-column", f.cfg.schema.id_column, "individual id column")->capture_default_str();
  s->add_option("--year-column", f.cfg.schema.year_column, "period column")->capture_default_str();
  s->add_option("--response", f.cfg.schema.response, "response column")->capture_default_str();
  s->add_option("--z", f.cfg.schema.z_columns, "parametric covariate columns")->delimiter(',');
  s->add_option("--x", f.cfg.schema.x_columns, "network covariate columns")->delimiter(',');
  s->add_option("--delimiter", f.delimiter, "field delimiter")->capture_default_str();
}

inline void add_model_options(CLI::App* s, Flags& f) {
  RunConfig& c = f.cfg;
  s->add_option("--input,-i", c.input, "panel file")->required();
  s->add_option("--output,-o", c.output, "fit artifact (JSON)")->required();
  s->add_flag("--no-impute", f.no_impute, "fail on missing cells instead of mean-imputing");
  s->add_option("--scenario", c.scenario, "forecasting scenario 1, 2 or 3")->capture_default_str();
  s->add_option("--kind", c.kind, "psqrnn, linear or qrnn")->capture_default_str();
  s->add_option("--taus", c.taus, "tau count K (midpoint rule) or comma list");
  s->add_flag("--per-tau", c.per_tau, "fit each tau separately instead of one composite fit");
  s->add_option("--hidden", c.hidden, "hidden layer sizes n1[,n2]")->delimiter(',');
  s->add_option("--activation", c.activation, "elu, sigmoid, tanh, softplus or relu")
      ->capture_default_str();
  s->add_option("--lambda1", c.lambda1, "fixed-effect L1 penalty")->capture_default_str();
  s->add_option("--lambda2", c.lambda2, "hidden-weight L2 penalty")->capture_default_str();
  s->add_option("--restarts", c.restarts, "random restarts")->capture_default_str();
  s->add_option("--seed", c.seed, "base seed")->capture_default_str();
  s->add_flag("--no-standardize", f.no_standardize, "train on the raw scale");
  s->add_option("--eps-start", c.eps_start, "first smoothing threshold");
  s->add_option("--eps-end", c.eps_end, "last smoothing threshold");
  s->add_option("--eps-factor", c.eps_factor, "threshold ratio between stages");
  s->add_option("--max-iters", c.max_iters, "iterations per stage")->capture_default_str();
  s->add_option("--grad-tol", c.grad_tol, "gradient norm tolerance");
  s->add_option("--optimizer", c.optimizer, "lbfgs or gd")->capture_default_str();
  add_schema_options(s, f);
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Panel semiparametric quantile regression neural network"};
  app.require_subcommand(1);
  Flags f;
  RunConfig& c = f.cfg;

  auto* ingest_cmd = app.add_subcommand("ingest", "validate a panel file and summarise it");
  ingest_cmd->add_option("--input,-i", c.input, "panel file")->required();
  ingest_cmd->add_option("--output,-o", c.output, "summary (JSON)")->required();
  ingest_cmd->add_option("--dataset", c.aux_output, "write the validated panel here");
  add_schema_options(ingest_cmd, f);

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic panel");
  synth_cmd->add_option("--output,-o", c.output, "panel file")->required();
  synth_cmd->add_option("--truth", c.aux_output, "ground-truth sidecar (default <output>.truth.json)");
  synth_cmd->add_option("--seed", c.seed, "seed")->capture_default_str();
  synth_cmd->add_option("--individuals", c.synth.N, "N")->capture_default_str();
  synth_cmd->add_option("--periods", c.synth.T, "T")->capture_default_str();
  synth_cmd->add_option("--q", c.synth.q, "parametric covariates")->capture_default_str();
  synth_cmd->add_option("--p", c.synth.p, "network covariates")->capture_default_str();
  synth_cmd->add_option("--sigma", c.synth.noise_scale, "noise scale")->capture_default_str();
  synth_cmd->add_option("--noise", c.noise, "student_t or normal")->capture_default_str();
  synth_cmd->add_option("--df", c.synth.noise_df, "Student-t degrees of freedom")->capture_default_str();
  synth_cmd->add_option("--heterogeneity", c.synth.heterogeneity, "sd of the fixed effects")
      ->capture_default_str();
  synth_cmd->add_option("--alpha-center", c.synth.alpha_center, "mean of the fixed effects")
      ->capture_default_str();
  synth_cmd->add_option("--nonlinear", c.nonlinear, "none, sine, quadratic, interaction or mixed")
      ->capture_default_str();
  synth_cmd->add_option("--nonlinear-scale", c.synth.nonlinear_scale, "scale of g")
      ->capture_default_str();
  synth_cmd->add_option("--beta", c.synth.beta, "true beta")->delimiter(',');
  synth_cmd->add_option("--first-period", c.synth.first_period, "first year")->capture_default_str();

  auto* train_cmd = app.add_subcommand("train", "fit a model on a scenario's training rows");
  add_model_options(train_cmd, f);

  auto* grid_cmd = app.add_subcommand("grid-search", "select hidden sizes and penalties by BIC");
  add_model_options(grid_cmd, f);
  grid_cmd->add_option("--table", c.aux_output, "selection table (default <output>.table.csv)");
  grid_cmd->add_option("--grid-n1", c.grid_n1, "first-layer sizes")->delimiter(',');
  grid_cmd->add_option("--grid-n2", c.grid_n2, "second-layer sizes")->delimiter(',');
  grid_cmd->add_option("--grid-lambda1", c.grid_lambda1, "lambda1 values")->delimiter(',');
  grid_cmd->add_option("--grid-lambda2", c.grid_lambda2, "lambda2 values")->delimiter(',');

  auto* predict_cmd = app.add_subcommand("predict", "predict a scenario's rows from a fit");
  predict_cmd->add_option("--fit", c.fit, "fit artifact")->required();
  predict_cmd->add_option("--input,-i", c.input, "panel file")->required();
  predict_cmd->add_option("--output,-o", c.output, "predictions (CSV)")->required();
  predict_cmd->add_option("--record", c.aux_output, "run record (default <output>.run.json)");
  predict_cmd->add_option("--rows", c.rows, "train or test")->capture_default_str();

  auto* eval_cmd = app.add_subcommand("evaluate", "score predictions against actuals");
  eval_cmd->add_option("--predictions", c.predictions, "predictions (CSV)")->required();
  eval_cmd->add_option("--actuals", c.actuals, "panel file with the actual response")->required();
  eval_cmd->add_option("--output,-o", c.output, "report (JSON)")->required();
  eval_cmd->add_option("--series", c.aux_output, "long-format series (default <output>.series.csv)");
  eval_cmd->add_option("--column", c.column, "prediction column (default: prediction or first)");
  add_schema_options(eval_cmd, f);

  auto* rerun_cmd = app.add_subcommand("rerun", "repeat the run recorded in an artifact");
  rerun_cmd->add_option("--config", f.config_path, "artifact with an embedded config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  const Console con{out};
  try {
    if (rerun_cmd->parsed()) {
      const json art = read_json(f.config_path);
      if (!art.contains("config"))
        throw DataError("'" + f.config_path + "' has no embedded config");
      execute(config_from_json(art.at("config")), con);
      return kOk;
    }
    c.command = app.get_subcommands().front()->get_name();
    if (f.delimiter.size() != 1) throw ConfigurationError("--delimiter must be one character");
    c.schema.delimiter = f.delimiter[0];
    c.impute = !f.no_impute;
    c.standardize = !f.no_standardize;
    execute(c, con);
    return kOk;
  } catch (const ConfigurationError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const ShapeError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const json::exception& e) {
    err << "data error: malformed artifact: " << e.what() << "\n";
    return kData;
  } catch (const TrainingError& e) {
    err << "training error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  }
}

}  // namespace psqrnn::cli

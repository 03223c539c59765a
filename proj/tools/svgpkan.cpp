// Copyright 2026 The SVGP-KAN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// svgpkan: generate data, train, predict, rank features and run the
// reference experiments.

#include "svgpkan/data.hpp"
#include "svgpkan/discovery.hpp"
#include "svgpkan/experiment.hpp"
#include "svgpkan/model.hpp"
#include "svgpkan/numerics.hpp"
#include "svgpkan/parallel.hpp"
#include "svgpkan/tape.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumerical = 4;

// Input file problems that are not the caller's flags.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flags shared by several verbs. Unset optionals leave the config value.
struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n;
  std::optional<double> noise_sd;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> inducing;
  std::vector<std::size_t> widths;
  std::optional<std::size_t> repeats;
  std::optional<double> tau;
  std::optional<std::size_t> trials;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config " + path + " must be a JSON object");
  return j;
}

svgpkan::ModelConfig resolve_model(const json& file, const Overrides& o, std::size_t d) {
  svgpkan::ModelConfig c;
  c.widths = {d, 1};
  c = svgpkan::config_from_json(file, c);
  if (o.seed) c.seed = *o.seed;
  if (o.epochs) c.epochs = *o.epochs;
  if (o.batch_size) c.batch_size = *o.batch_size;
  if (o.inducing) c.inducing = *o.inducing;
  if (!o.widths.empty()) c.widths = o.widths;
  c.validate();
  return c;
}

svgpkan::Dataset read_data(const fs::path& path) {
  try {
    return svgpkan::read_csv(path);
  } catch (const svgpkan::CsvError& e) {
    throw IoError(path.string() + ": " + e.what());
  } catch (const std::ios_base::failure& e) {
    throw IoError(e.what());
  }
}

svgpkan::Model read_model(const fs::path& path) {
  try {
    return svgpkan::load_model(path);
  } catch (const std::ios_base::failure& e) {
    throw IoError(e.what());
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

// Feature matrix for a model: either the CSV's features, or, for a CSV
// without a target column, its features plus the column read as target.
svgpkan::Matrix model_inputs(const svgpkan::Model& model, const svgpkan::Dataset& ds) {
  const std::size_t d = model.input_dim();
  if (ds.dims() == d) return ds.x;
  if (ds.dims() + 1 == d) {
    svgpkan::Matrix x(ds.x.rows(), ds.x.cols() + 1);
    x << ds.x, ds.y;
    return x;
  }
  throw svgpkan::DimensionMismatch("data has " + std::to_string(ds.dims()) +
                                   " feature columns, model expects " + std::to_string(d));
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::ios_base::failure("write failed: " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::ios_base::failure("cannot create " + dir.string() + ": " + ec.message());
}

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

double default_noise_sd(const std::string& generator) {
  if (generator == "exp1") return svgpkan::kExp1NoiseSd;
  if (generator == "exp2") return svgpkan::kExp2NoiseSd;
  return svgpkan::kFriedmanNoiseSd;
}

// --- verbs -----------------------------------------------------------------

struct GenerateArgs {
  std::string name;
  std::string out;
  std::optional<std::size_t> d;
};

int cmd_generate(const GenerateArgs& a, const Overrides& o) {
  const json file = load_config(o.config);
  const std::string name = lowercase(a.name);
  if (name != "exp1" && name != "exp2" && name != "friedman1")
    throw std::invalid_argument("unknown dataset '" + a.name + "' (expected exp1, exp2 or friedman1)");
  json run = {{"command", "generate"}, {"dataset", name}, {"out", a.out}};
  run["n"] = o.n ? *o.n : file.value("n", std::size_t{600});
  run["noise_sd"] = o.noise_sd ? *o.noise_sd : file.value("noise_sd", default_noise_sd(name));
  run["seed"] = o.seed ? *o.seed : file.value("seed", std::uint64_t{0});
  run["d"] = a.d ? *a.d : file.value("d", std::size_t{10});

  const svgpkan::Dataset ds =
      svgpkan::generate(name, run["n"].get<std::size_t>(), run["noise_sd"].get<double>(),
                        run["seed"].get<std::uint64_t>(), run["d"].get<std::size_t>());
  const fs::path out(a.out);
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  svgpkan::write_csv(out, ds);
  json prov = svgpkan::to_json(*ds.provenance);
  prov["rows"] = ds.size();
  prov["columns"] = ds.dims() + 1;
  prov["run_config"] = run;
  write_json(svgpkan::provenance_path(out), prov);
  std::cerr << "wrote " << ds.size() << " rows to " << out.string() << '\n';
  return kExitOk;
}

struct TrainArgs {
  std::string data;
  std::string test;
  std::string out;
};

int cmd_train(const TrainArgs& a, const Overrides& o) {
  const json file = load_config(o.config);
  const svgpkan::Dataset train = read_data(a.data);
  std::optional<svgpkan::Dataset> test;
  if (!a.test.empty()) test = read_data(a.test);
  const svgpkan::ModelConfig cfg = resolve_model(file, o, train.dims());
  if (cfg.widths.front() != train.dims())
    throw std::invalid_argument("widths[0] = " + std::to_string(cfg.widths.front()) + " but " +
                                a.data + " has " + std::to_string(train.dims()) + " features");
  if (test && test->dims() != train.dims())
    throw svgpkan::DimensionMismatch("test set feature count differs from training set");

  json run = svgpkan::to_json(cfg);
  run["command"] = "train";
  run["data"] = a.data;
  run["test"] = a.test.empty() ? json(nullptr) : json(a.test);
  run["out"] = a.out;

  svgpkan::Model model = svgpkan::Model::initialize(cfg);
  const svgpkan::TrainReport report = svgpkan::train(model, train, test ? &*test : nullptr);

  const fs::path dir(a.out);
  ensure_dir(dir);
  svgpkan::save_model(dir / "model.json", model);
  json rj = svgpkan::to_json(report);
  rj["run_config"] = run;
  write_json(dir / "train_report.json", rj);
  std::vector<std::vector<double>> curve;
  for (std::size_t e = 0; e < report.elbo.size(); ++e)
    curve.push_back({static_cast<double>(e + 1), report.elbo[e], report.train_rmse[e]});
  svgpkan::write_table(dir / "learning_curve.csv", {"epoch", "elbo", "train_rmse"}, curve);
  if (!report.train_rmse.empty()) std::cerr << "final train RMSE " << report.train_rmse.back() << '\n';
  if (report.has_test) std::cerr << "test RMSE " << report.test_rmse << '\n';
  return kExitOk;
}

struct PredictArgs {
  std::string model;
  std::string data;
  std::string out;
};

int cmd_predict(const PredictArgs& a) {
  const svgpkan::Model model = read_model(a.model);
  const svgpkan::Dataset ds = read_data(a.data);
  const svgpkan::Matrix x = model_inputs(model, ds);
  std::vector<std::vector<double>> rows;
  if (x.rows() > 0) {
    const svgpkan::Prediction p = svgpkan::predict(model, x);
    for (Eigen::Index b = 0; b < x.rows(); ++b)
      rows.push_back({p.mean(b), p.epistemic_var(b), p.total_var(b)});
  }
  const fs::path out(a.out);
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  svgpkan::write_table(out, {"mean", "epistemic_var", "total_var"}, rows);
  return kExitOk;
}

struct ImportanceArgs {
  std::string model;
  std::string data;
  std::string out;
};

int cmd_importance(const ImportanceArgs& a, const Overrides& o) {
  const json file = load_config(o.config);
  const svgpkan::Model model = read_model(a.model);
  const svgpkan::Dataset ds = read_data(a.data);
  if (ds.dims() != model.input_dim())
    throw svgpkan::DimensionMismatch("data has " + std::to_string(ds.dims()) +
                                     " feature columns, model expects " +
                                     std::to_string(model.input_dim()));
  json run = {{"command", "importance"}, {"model", a.model}, {"data", a.data}, {"out", a.out}};
  run["repeats"] = o.repeats ? *o.repeats : file.value("repeats", svgpkan::kDefaultRepeats);
  run["tau"] = o.tau ? *o.tau : file.value("tau", svgpkan::kDefaultTau);
  run["seed"] = o.seed ? *o.seed : file.value("seed", std::uint64_t{0});
  const double tau = run["tau"].get<double>();
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("tau must lie in (0, 1)");

  svgpkan::ImportanceReport rep = svgpkan::permutation_importance(
      model, ds.x, ds.y, run["repeats"].get<std::size_t>(), run["seed"].get<std::uint64_t>());
  rep.tau = tau;
  rep.selected = svgpkan::select_features(rep.mean_delta, tau);
  rep.feature_names = ds.feature_names;
  rep.edges = svgpkan::classify_edges(model, svgpkan::standardized_ranges(model, ds.x));

  const fs::path dir(a.out);
  ensure_dir(dir);
  json j = svgpkan::to_json(rep);
  j["run_config"] = run;
  write_json(dir / "importance.json", j);
  std::vector<std::vector<double>> bars;
  for (std::size_t i = 0; i < rep.mean_delta.size(); ++i) {
    const bool sel = std::find(rep.selected.begin(), rep.selected.end(), i) != rep.selected.end();
    bars.push_back({static_cast<double>(i), rep.mean_delta[i], rep.sd_delta[i], sel ? 1.0 : 0.0});
  }
  svgpkan::write_table(dir / "importance.csv", {"feature", "mean_delta_mse", "sd_delta_mse", "selected"},
                       bars);
  for (std::size_t i : rep.selected) std::cerr << "selected " << rep.feature_names[i] << '\n';
  return kExitOk;
}

struct ExperimentArgs {
  std::string name;
  std::string out;
};

int cmd_experiment(const ExperimentArgs& a, const Overrides& o) {
  const json file = load_config(o.config);
  const std::string name = lowercase(a.name);
  svgpkan::ExperimentOptions opt =
      svgpkan::experiment_options_from_json(file, svgpkan::experiment_preset(name));
  if (o.seed) opt.seed = *o.seed;
  if (o.trials) opt.trials = *o.trials;
  if (o.n) opt.n = *o.n;
  if (o.noise_sd) opt.noise_sd = *o.noise_sd;
  if (o.epochs) opt.model.epochs = *o.epochs;
  if (o.batch_size) opt.model.batch_size = *o.batch_size;
  if (o.inducing) opt.model.inducing = *o.inducing;
  if (!o.widths.empty()) opt.model.widths = o.widths;
  if (o.repeats) opt.repeats = *o.repeats;
  if (o.tau) opt.tau = *o.tau;
  opt.model.validate();

  json run = svgpkan::to_json(opt);
  run["command"] = "experiment";
  run["out"] = a.out;
  const svgpkan::ExperimentResult r =
      svgpkan::run_experiment(opt, [](const std::string& msg) { std::cerr << msg << '\n'; });
  svgpkan::write_experiment(r, a.out, run);
  if (!r.ok()) {
    std::cerr << "one or more trials failed; see " << (fs::path(a.out) / "report.json").string() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Flat JSON file of configuration keys")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Random seed");
}

void add_model_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--epochs", o.epochs, "Training epochs");
  cmd->add_option("--batch-size", o.batch_size, "Minibatch size")->check(CLI::PositiveNumber);
  cmd->add_option("--inducing", o.inducing, "Inducing points per edge")->check(CLI::PositiveNumber);
  cmd->add_option("--widths", o.widths, "Layer widths, comma separated (e.g. 10,10,1)")
      ->delimiter(',');
}

void add_importance_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--repeats", o.repeats, "Permutations per feature")->check(CLI::PositiveNumber);
  cmd->add_option("--tau", o.tau, "Selection threshold relative to the top feature");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse variational GP Kolmogorov-Arnold networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "svgpkan 0.1.0");
  Overrides o;

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset as CSV");
  generate->add_option("dataset", gen.name, "exp1, exp2 or friedman1")->required();
  generate->add_option("--out", gen.out, "Output CSV path")->required();
  generate->add_option("--n", o.n, "Number of rows");
  generate->add_option("--noise-sd", o.noise_sd, "Observation noise standard deviation")
      ->check(CLI::NonNegativeNumber);
  generate->add_option("--d", gen.d, "Input dimension (friedman1)");
  add_common(generate, o);

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Fit a model to a CSV dataset");
  train->add_option("data", tr.data, "Training CSV")->required();
  train->add_option("--test", tr.test, "Held-out CSV for the final RMSE");
  train->add_option("--out", tr.out, "Output directory")->required();
  add_common(train, o);
  add_model_flags(train, o);

  PredictArgs pr;
  auto* predict = app.add_subcommand("predict", "Predictive mean and variances for a CSV");
  predict->add_option("model", pr.model, "Model JSON")->required();
  predict->add_option("data", pr.data, "Input CSV")->required();
  predict->add_option("--out", pr.out, "Output CSV path")->required();

  ImportanceArgs im;
  auto* importance = app.add_subcommand("importance", "Permutation importance and edge labels");
  importance->add_option("model", im.model, "Model JSON")->required();
  importance->add_option("data", im.data, "Test CSV")->required();
  importance->add_option("--out", im.out, "Output directory")->required();
  add_common(importance, o);
  add_importance_flags(importance, o);

  ExperimentArgs ex;
  auto* experiment = app.add_subcommand("experiment", "Run a reference experiment end to end");
  experiment->add_option("name", ex.name, "exp1, exp2 or friedman")->required();
  experiment->add_option("--out", ex.out, "Output directory")->required();
  experiment->add_option("--trials", o.trials, "Independent trials")->check(CLI::PositiveNumber);
  experiment->add_option("--n", o.n, "Generated rows per trial");
  experiment->add_option("--noise-sd", o.noise_sd, "Observation noise standard deviation")
      ->check(CLI::NonNegativeNumber);
  add_common(experiment, o);
  add_model_flags(experiment, o);
  add_importance_flags(experiment, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*generate) return cmd_generate(gen, o);
    if (*train) return cmd_train(tr, o);
    if (*predict) return cmd_predict(pr);
    if (*importance) return cmd_importance(im, o);
    if (*experiment) return cmd_experiment(ex, o);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const svgpkan::TrainingFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const svgpkan::NotPositiveDefinite& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const svgpkan::ad::NonFiniteError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::logic_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitUsage;
}

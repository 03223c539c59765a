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


#include "svgpkan/experiment.hpp"

#include "svgpkan/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <stdexcept>

namespace svgpkan {

namespace {

constexpr std::uint64_t kImportanceStream = 0x696d70ULL;
constexpr std::uint64_t kSplitSeedStream = 0x73706cULL;

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double truth(const std::string& name, const double* x) {
  if (name == "exp1") return exp1_function(x[0], x[1]);
  if (name == "exp2") return exp2_function(x[0], x[1]);
  return friedman1_function(x);
}

std::string generator_name(const std::string& name) {
  return name == "friedman" ? "friedman1" : name;
}

}  // namespace

ExperimentOptions experiment_preset(const std::string& name) {
  ExperimentOptions o;
  o.name = name;
  o.model.inducing = 20;
  o.model.epochs = 1500;
  o.model.batch_size = 64;
  o.model.learning_rate = 1e-2;
  if (name == "exp1") {
    o.n = 600;
    o.noise_sd = kExp1NoiseSd;
    o.model.widths = {3, 1};
    o.noise_floor_fraction = 0.5;
  } else if (name == "exp2") {
    o.n = 1000;
    o.noise_sd = kExp2NoiseSd;
    o.model.widths = {2, 1};
  } else if (name == "friedman") {
    o.n = 2500;
    o.d = 10;
    o.noise_sd = kFriedmanNoiseSd;
    o.model.widths = {10, 10, 1};
  } else {
    throw std::invalid_argument("unknown experiment '" + name + "' (expected exp1, exp2 or friedman)");
  }
  return o;
}

nlohmann::json to_json(const ExperimentOptions& o) {
  nlohmann::json j = to_json(o.model);
  j["experiment"] = o.name;
  j["trials"] = o.trials;
  j["seed"] = o.seed;
  j["n"] = o.n;
  j["noise_sd"] = o.noise_sd;
  j["d"] = o.d;
  j["test_fraction"] = o.test_fraction;
  j["repeats"] = o.repeats;
  j["tau"] = o.tau;
  j["noise_floor_fraction"] = o.noise_floor_fraction;
  j["grid"] = o.grid;
  return j;
}

ExperimentOptions experiment_options_from_json(const nlohmann::json& j, ExperimentOptions o) {
  auto take = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  take("trials", o.trials);
  take("seed", o.seed);
  take("n", o.n);
  take("noise_sd", o.noise_sd);
  take("d", o.d);
  take("test_fraction", o.test_fraction);
  take("repeats", o.repeats);
  take("tau", o.tau);
  take("noise_floor_fraction", o.noise_floor_fraction);
  take("grid", o.grid);
  o.model = config_from_json(j, o.model);
  return o;
}

bool ExperimentResult::ok() const {
  for (const auto& t : trials)
    if (!t.ok) return false;
  return true;
}

std::vector<double> ExperimentResult::selection_rates() const {
  std::vector<std::vector<std::size_t>> sel;
  for (const auto& t : trials)
    if (t.ok) sel.push_back(t.importance.selected);
  const std::size_t d = options.model.widths.front();
  return selection_stability(sel, d);
}

SurfaceGrid predict_surface(const Model& model, std::size_t d, std::size_t a, std::size_t b,
                            double lo, double hi, std::size_t points, double fill) {
  SurfaceGrid g;
  Matrix x = Matrix::Constant(static_cast<Eigen::Index>(points * points), static_cast<Eigen::Index>(d), fill);
  for (std::size_t p = 0; p < points; ++p)
    for (std::size_t q = 0; q < points; ++q) {
      const double u = points == 1 ? lo : lo + (hi - lo) * static_cast<double>(p) / (points - 1);
      const double v = points == 1 ? lo : lo + (hi - lo) * static_cast<double>(q) / (points - 1);
      const auto r = static_cast<Eigen::Index>(p * points + q);
      x(r, static_cast<Eigen::Index>(a)) = u;
      x(r, static_cast<Eigen::Index>(b)) = v;
      g.x1.push_back(u);
      g.x2.push_back(v);
    }
  g.prediction = predict(model, x);
  return g;
}

namespace {

void run_trial(const ExperimentOptions& o, TrialResult& t) {
  const Dataset full = generate(generator_name(o.name), o.n, o.noise_sd, t.seed, o.d);
  auto parts = split(full, o.test_fraction, derive_seed(t.seed, kSplitSeedStream));
  t.train = std::move(parts.first);
  t.test = std::move(parts.second);

  ModelConfig cfg = o.model;
  cfg.seed = t.seed;
  if (cfg.widths.front() != t.train.dims())
    throw std::invalid_argument("widths[0] = " + std::to_string(cfg.widths.front()) +
                                " does not match " + std::to_string(t.train.dims()) + " features");
  if (o.noise_floor_fraction > 0.0) {
    const double y_scale = Standardizer::fit(t.train).y_scale;
    cfg.noise_floor = o.noise_floor_fraction * o.noise_sd * o.noise_sd / (y_scale * y_scale);
    if (cfg.init_noise_variance <= cfg.noise_floor) cfg.init_noise_variance = 2.0 * cfg.noise_floor;
  }
  Model model = Model::initialize(cfg);
  t.report = train(model, t.train, &t.test);
  t.test_rmse = t.report.test_rmse;

  t.importance = permutation_importance(model, t.test.x, t.test.y, o.repeats,
                                        derive_seed(t.seed, kImportanceStream));
  t.importance.tau = o.tau;
  t.importance.selected = select_features(t.importance.mean_delta, o.tau);
  t.importance.feature_names = t.train.feature_names;
  t.importance.edges = classify_edges(model, standardized_ranges(model, t.train.x));

  if (o.name == "exp2") {
    const SurfaceGrid g = predict_surface(model, 2, 0, 1, -1.5, 1.5, o.grid, 0.0);
    double in_sum = 0.0, out_sum = 0.0;
    std::size_t in_n = 0, out_n = 0;
    for (std::size_t r = 0; r < g.x1.size(); ++r) {
      const double v = g.prediction.epistemic_var(static_cast<Eigen::Index>(r));
      if (std::abs(g.x1[r]) <= 1.0 && std::abs(g.x2[r]) <= 1.0) {
        in_sum += v;
        ++in_n;
      } else {
        out_sum += v;
        ++out_n;
      }
    }
    t.interior_epistemic = in_n ? in_sum / static_cast<double>(in_n) : 0.0;
    t.exterior_epistemic = out_n ? out_sum / static_cast<double>(out_n) : 0.0;
  }
  t.model = std::move(model);
  t.ok = true;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentOptions& options, const ProgressFn& progress) {
  (void)experiment_preset(options.name);  // validates the name
  options.model.validate();
  ExperimentResult result;
  result.options = options;
  for (std::size_t k = 0; k < options.trials; ++k) {
    TrialResult t;
    t.index = k;
    t.seed = derive_seed(options.seed, k);
    try {
      run_trial(options, t);
    } catch (const std::exception& e) {
      t.ok = false;
      t.error = e.what();
    }
    if (progress) {
      char buf[256];
      if (t.ok)
        std::snprintf(buf, sizeof buf, "%s trial %zu/%zu: test RMSE %.4f, %.1f s", options.name.c_str(),
                      k + 1, options.trials, t.test_rmse, mean_of(t.report.epoch_seconds) *
                      static_cast<double>(t.report.epoch_seconds.size()));
      else
        std::snprintf(buf, sizeof buf, "%s trial %zu/%zu failed: %s", options.name.c_str(), k + 1,
                      options.trials, t.error.c_str());
      progress(buf);
    }
    result.trials.push_back(std::move(t));
  }
  return result;
}

nlohmann::json to_json(const ExperimentResult& r) {
  const ExperimentOptions& o = r.options;
  nlohmann::json trials = nlohmann::json::array();
  std::vector<double> rmses;
  for (const auto& t : r.trials) {
    nlohmann::json tj = {{"index", t.index}, {"seed", t.seed}, {"ok", t.ok}};
    if (!t.ok) {
      tj["error"] = t.error;
      trials.push_back(tj);
      continue;
    }
    rmses.push_back(t.test_rmse);
    tj["test_rmse"] = t.test_rmse;
    tj["final_elbo"] = t.report.elbo.empty() ? nlohmann::json(nullptr) : nlohmann::json(t.report.elbo.back());
    tj["noise_variance"] = t.model->noise_variance() * t.model->standardizer.y_scale *
                           t.model->standardizer.y_scale;
    tj["train_seconds"] = mean_of(t.report.epoch_seconds) * static_cast<double>(t.report.epoch_seconds.size());
    tj["importance"] = to_json(t.importance);
    if (o.name == "exp2") {
      tj["interior_epistemic_var"] = t.interior_epistemic;
      tj["exterior_epistemic_var"] = t.exterior_epistemic;
      tj["exterior_interior_ratio"] = t.exterior_epistemic / t.interior_epistemic;
    }
    trials.push_back(tj);
  }
  nlohmann::json j = {{"experiment", o.name},
                      {"config", to_json(o)},
                      {"ok", r.ok()},
                      {"trials", trials},
                      {"test_rmse_mean", mean_of(rmses)},
                      {"test_rmse_sd", sd_of(rmses)},
                      {"selection_rate", r.selection_rates()}};
  if (o.name == "friedman") j["paper_test_rmse"] = {{"mean", 0.36}, {"sd", 0.05}};
  return j;
}

void write_experiment(const ExperimentResult& r, const std::filesystem::path& dir,
                      const nlohmann::json& run_config) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const ExperimentOptions& o = r.options;
  {
    std::ofstream out(dir / "report.json");
    if (!out) throw std::ios_base::failure("cannot write " + (dir / "report.json").string());
    nlohmann::json report = to_json(r);
    if (!run_config.is_null()) report["run_config"] = run_config;
    out << report.dump(2) << '\n';
  }
  std::vector<std::vector<double>> rates;
  const std::vector<double> rate = r.selection_rates();
  for (std::size_t i = 0; i < rate.size(); ++i) rates.push_back({static_cast<double>(i), rate[i]});
  write_table(dir / "selection_rates.csv", {"feature", "rate"}, rates);

  for (const auto& t : r.trials) {
    if (!t.ok) continue;
    const fs::path td = dir / ("trial_" + std::to_string(t.index));
    fs::create_directories(td);
    const Model& model = *t.model;
    save_model(td / "model.json", model);
    {
      std::ofstream out(td / "train_report.json");
      if (!out) throw std::ios_base::failure("cannot write " + (td / "train_report.json").string());
      out << to_json(t.report).dump(1) << '\n';
    }
    std::vector<std::vector<double>> curve;
    for (std::size_t e = 0; e < t.report.elbo.size(); ++e)
      curve.push_back({static_cast<double>(e + 1), t.report.elbo[e], t.report.train_rmse[e]});
    write_table(td / "learning_curve.csv", {"epoch", "elbo", "train_rmse"}, curve);

    std::vector<std::vector<double>> bars;
    for (std::size_t i = 0; i < t.importance.mean_delta.size(); ++i) {
      const bool sel = std::find(t.importance.selected.begin(), t.importance.selected.end(), i) !=
                       t.importance.selected.end();
      bars.push_back({static_cast<double>(i), t.importance.mean_delta[i], t.importance.sd_delta[i],
                      sel ? 1.0 : 0.0});
    }
    write_table(td / "importance.csv", {"feature", "mean_delta_mse", "sd_delta_mse", "selected"}, bars);

    // Learned first-layer edge functions over the observed input range.
    const LayerState& layer = model.layers.front();
    for (std::size_t i = 0; i < layer.d_in; ++i) {
      const double lo = t.train.x.col(static_cast<Eigen::Index>(i)).minCoeff();
      const double hi = t.train.x.col(static_cast<Eigen::Index>(i)).maxCoeff();
      const double mu = model.standardizer.x_mean(static_cast<Eigen::Index>(i));
      const double sc = model.standardizer.x_scale(static_cast<Eigen::Index>(i));
      std::vector<double> xs(o.grid), grid(o.grid);
      for (std::size_t g = 0; g < o.grid; ++g) {
        xs[g] = o.grid == 1 ? lo : lo + (hi - lo) * static_cast<double>(g) / (o.grid - 1);
        grid[g] = (xs[g] - mu) / sc;
      }
      std::vector<std::vector<double>> rows;
      for (std::size_t j = 0; j < layer.d_out; ++j) {
        const auto pts = layer_curve(layer, i, j, grid);
        for (std::size_t g = 0; g < o.grid; ++g)
          rows.push_back({static_cast<double>(j), xs[g], grid[g], pts[g].mean, pts[g].sd});
      }
      write_table(td / ("edge_curve_" + t.train.feature_names[i] + ".csv"),
                  {"output", "x", "x_standardized", "mean", "sd"}, rows);
    }

    if (o.name == "exp2" || o.name == "friedman") {
      const bool ex2 = o.name == "exp2";
      const std::size_t d = model.input_dim();
      const SurfaceGrid g = ex2 ? predict_surface(model, d, 0, 1, -1.5, 1.5, o.grid, 0.0)
                                : predict_surface(model, d, 0, 1, 0.0, 1.0, o.grid, 0.5);
      std::vector<std::vector<double>> rows;
      std::vector<double> point(d, ex2 ? 0.0 : 0.5);
      for (std::size_t r = 0; r < g.x1.size(); ++r) {
        point[0] = g.x1[r];
        point[1] = g.x2[r];
        const auto k = static_cast<Eigen::Index>(r);
        rows.push_back({g.x1[r], g.x2[r], g.prediction.mean(k), g.prediction.epistemic_var(k),
                        g.prediction.total_var(k), truth(o.name, point.data())});
      }
      write_table(td / "surface.csv", {ex2 ? "x1" : "x0", ex2 ? "x2" : "x1", "mean", "epistemic_var",
                                       "total_var", "truth"},
                  rows);
    }
  }
}

}  // namespace svgpkan

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


#ifndef SVGPKAN_EXPERIMENT_HPP_
#define SVGPKAN_EXPERIMENT_HPP_

#include "svgpkan/discovery.hpp"
#include "svgpkan/model.hpp"

#include "json.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace svgpkan {

struct ExperimentOptions {
  std::string name;  // exp1, exp2 or friedman
  std::size_t trials = 5;
  std::uint64_t seed = 0;
  std::size_t n = 600;  // generated rows before the train/test split
  double noise_sd = 0.0;
  std::size_t d = 10;   // friedman only
  double test_fraction = 0.2;
  std::size_t repeats = kDefaultRepeats;
  double tau = kDefaultTau;
  // Multiplies the known noise variance to give the noise floor; 0 keeps
  // model.noise_floor as configured.
  double noise_floor_fraction = 0.0;
  std::size_t grid = 61;
  ModelConfig model;
};

// Defaults for the three experiments; throws std::invalid_argument on an
// unknown name.
ExperimentOptions experiment_preset(const std::string& name);

nlohmann::json to_json(const ExperimentOptions& o);
ExperimentOptions experiment_options_from_json(const nlohmann::json& j, ExperimentOptions base);

struct TrialResult {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  TrainReport report;
  ImportanceReport importance;
  double test_rmse = 0.0;
  // exp2 only.
  double interior_epistemic = 0.0;
  double exterior_epistemic = 0.0;
  std::optional<Model> model;
  Dataset train;
  Dataset test;
};

struct ExperimentResult {
  ExperimentOptions options;
  std::vector<TrialResult> trials;

  bool ok() const;
  std::vector<double> selection_rates() const;
};

using ProgressFn = std::function<void(const std::string&)>;

// Runs generate -> split -> train -> evaluate -> discover per trial. Trial k
// uses seed derive_seed(options.seed, k). A trial that throws is recorded
// with ok = false and the remaining trials still run.
ExperimentResult run_experiment(const ExperimentOptions& options, const ProgressFn& progress = {});

// Also used by run_experiment for the extrapolation statistics.
struct SurfaceGrid {
  std::vector<double> x1, x2;
  Prediction prediction;
};
SurfaceGrid predict_surface(const Model& model, std::size_t d, std::size_t a, std::size_t b,
                            double lo, double hi, std::size_t points, double fill);

nlohmann::json to_json(const ExperimentResult& r);

// Report JSON plus plot-data CSVs under dir. A non-null run_config is
// embedded in the report.
void write_experiment(const ExperimentResult& r, const std::filesystem::path& dir,
                      const nlohmann::json& run_config = nullptr);

}  // namespace svgpkan

#endif  // SVGPKAN_EXPERIMENT_HPP_

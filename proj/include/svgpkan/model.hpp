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


#ifndef SVGPKAN_MODEL_HPP_
#define SVGPKAN_MODEL_HPP_

#include "svgpkan/data.hpp"
#include "svgpkan/kan_layer.hpp"

#include "json.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace svgpkan {

struct ModelConfig {
  std::vector<std::size_t> widths{3, 1};
  std::size_t inducing = 20;
  // Lower bound on the noise variance, in standardized-target units.
  double noise_floor = 1e-4;
  double learning_rate = 1e-2;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  double init_lengthscale = 1.0;
  double init_signal_variance = 1.0;
  double init_noise_variance = 0.1;
  // Optimize q(v) with u = chol(Kzz) v instead of q(u) directly.
  bool whiten = true;

  // Throws std::invalid_argument on a violated invariant.
  void validate() const;
};

nlohmann::json to_json(const ModelConfig& c);
// Model keys present in j override base; other keys are ignored.
ModelConfig config_from_json(const nlohmann::json& j, ModelConfig base = {});

double noise_from_raw(double raw, double floor);
double raw_from_noise(double noise_var, double floor);

struct Model {
  ModelConfig config;
  std::vector<LayerState> layers;
  double raw_noise = 0.0;
  Standardizer standardizer;

  static Model initialize(const ModelConfig& config);

  double noise_variance() const { return noise_from_raw(raw_noise, config.noise_floor); }
  std::size_t input_dim() const { return layers.front().d_in; }
  double total_kl() const;
};

// Latent moments for standardized inputs, B x 2 (mean, variance).
Matrix forward_moments(const Model& model, const Matrix& x_std);
std::vector<Gaussian1D> forward(const Model& model, const Matrix& x_std);

double expected_log_lik(double y, const Gaussian1D& f, double noise_var);

// (N / B) sum_b E[log N(y_b | f_b, noise)] - sum of all edge KLs, on
// standardized data.
double elbo_minibatch(const Model& model, const Matrix& x_std, const Vector& y_std,
                      std::size_t n_total);

struct Prediction {
  Vector mean;
  Vector epistemic_var;
  Vector total_var;
};

// Raw-unit inputs and outputs; the model's standardizer is applied.
Prediction predict(const Model& model, const Matrix& x);

double rmse(const Vector& a, const Vector& b);

class TrainingFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainReport {
  std::vector<double> elbo;
  std::vector<double> train_rmse;
  std::vector<double> epoch_seconds;
  std::vector<double> max_jitter;
  std::vector<std::size_t> skipped_steps;
  double test_rmse = 0.0;
  bool has_test = false;

  // Equality of everything except wall-clock timings.
  bool same_trajectory(const TrainReport& other) const;
};

nlohmann::json to_json(const TrainReport& r);

// Fits the model's standardizer on train, then runs config.epochs epochs of
// Adam on the negative minibatch ELBO. The test set, when given, is used
// only for the final RMSE.
TrainReport train(Model& model, const Dataset& train, const Dataset* test = nullptr);

nlohmann::json to_json(const Model& m);
Model model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const Model& m);
Model load_model(const std::filesystem::path& path);

namespace ad {

struct ModelVars {
  std::vector<EdgeParams> layers;
  Var raw_noise;
};

ModelVars bind_model(Tape& tape, const Model& model, bool trainable);

// Sum over the batch of E[log N(y | f, floor + softplus(raw))]. latent is
// B x 2 (mean, variance).
Var expected_log_lik(Var latent, const Vector& y, Var raw_noise, double floor);

struct ElboTerms {
  Var elbo;
  Var latent;
  std::vector<double> jitters;
};

ElboTerms elbo(const ModelVars& vars, const Model& model, const Matrix& x_std,
               const Vector& y_std, std::size_t n_total);

}  // namespace ad

}  // namespace svgpkan

#endif  // SVGPKAN_MODEL_HPP_

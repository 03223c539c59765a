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


#include "svgpkan/model.hpp"

#include "svgpkan/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <string>

namespace svgpkan {

namespace {

constexpr std::uint64_t kInitStream = 0x696e6974ULL;
constexpr std::uint64_t kShuffleStream = 0x73687566ULL;
constexpr std::size_t kChunk = 4096;
constexpr int kFormatVersion = 1;

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

void ModelConfig::validate() const {
  if (widths.size() < 2) throw std::invalid_argument("widths needs at least an input and output size");
  for (std::size_t w : widths)
    if (w == 0) throw std::invalid_argument("widths entries must be positive");
  if (widths.back() != 1) throw std::invalid_argument("last width must be 1");
  if (inducing == 0) throw std::invalid_argument("inducing must be at least 1");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be at least 1");
  if (!(noise_floor >= 0.0)) throw std::invalid_argument("noise_floor must be nonnegative");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be nonnegative");
  if (!(init_lengthscale > 0.0) || !(init_signal_variance > 0.0))
    throw std::invalid_argument("initial kernel hyperparameters must be positive");
  if (!(init_noise_variance > noise_floor))
    throw std::invalid_argument("init_noise_variance must exceed noise_floor");
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"widths", c.widths},
          {"inducing", c.inducing},
          {"noise_floor", c.noise_floor},
          {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"init_lengthscale", c.init_lengthscale},
          {"init_signal_variance", c.init_signal_variance},
          {"init_noise_variance", c.init_noise_variance},
          {"whiten", c.whiten}};
}

ModelConfig config_from_json(const nlohmann::json& j, ModelConfig c) {
  auto take = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  take("widths", c.widths);
  take("inducing", c.inducing);
  take("noise_floor", c.noise_floor);
  take("learning_rate", c.learning_rate);
  take("epochs", c.epochs);
  take("batch_size", c.batch_size);
  take("seed", c.seed);
  take("init_lengthscale", c.init_lengthscale);
  take("init_signal_variance", c.init_signal_variance);
  take("init_noise_variance", c.init_noise_variance);
  take("whiten", c.whiten);
  return c;
}

double noise_from_raw(double raw, double floor) { return floor + softplus(raw); }

double raw_from_noise(double noise_var, double floor) {
  const double excess = noise_var - floor;
  if (!(excess > 0.0)) throw std::invalid_argument("noise variance must exceed the floor");
  // Inverse softplus.
  return excess + std::log(-std::expm1(-excess));
}

Model Model::initialize(const ModelConfig& config) {
  config.validate();
  Model model;
  model.config = config;
  Rng rng(config.seed, kInitStream);
  LayerInit init;
  init.lengthscale = config.init_lengthscale;
  init.signal_variance = config.init_signal_variance;
  init.whitened = config.whiten;
  for (std::size_t l = 0; l + 1 < config.widths.size(); ++l)
    model.layers.push_back(
        LayerState::initialize(config.widths[l], config.widths[l + 1], config.inducing, rng, init));
  model.raw_noise = raw_from_noise(config.init_noise_variance, config.noise_floor);
  model.standardizer = Standardizer::identity(config.widths.front());
  return model;
}

double Model::total_kl() const {
  double kl = 0.0;
  for (const auto& layer : layers) kl += layer_kl(layer);
  return kl;
}

namespace ad {

ModelVars bind_model(Tape& tape, const Model& model, bool trainable) {
  ModelVars vars;
  for (const auto& layer : model.layers) vars.layers.push_back(bind_layer(tape, layer, trainable));
  const Stack noise = scalar_stack(model.raw_noise);
  vars.raw_noise = trainable ? tape.parameter(noise) : tape.constant(noise);
  return vars;
}

Var expected_log_lik(Var latent, const Vector& y, Var raw_noise, double floor) {
  Tape& t = latent.tape();
  const Matrix& f = latent.value().at(0);
  if (f.cols() != 2 || f.rows() != y.size())
    throw DimensionMismatch("expected_log_lik: latent must be B x 2 matching y");
  const double raw = raw_noise.scalar();
  const double s2 = noise_from_raw(raw, floor);
  double total = 0.0;
  double sq = 0.0;
  for (Eigen::Index b = 0; b < f.rows(); ++b) {
    const double r = y(b) - f(b, 0);
    sq += r * r + f(b, 1);
  }
  const double n = static_cast<double>(f.rows());
  total = -0.5 * n * std::log(2.0 * std::numbers::pi * s2) - sq / (2.0 * s2);
  return t.record(scalar_stack(total), {latent, raw_noise},
                  [latent, raw_noise, y, s2, sq, n, raw](const Stack& g, const Stack&) {
    Tape& t = latent.tape();
    const double go = g[0](0, 0);
    if (t.needs_grad(latent)) {
      const Matrix& f = latent.value()[0];
      Matrix& gl = t.accumulate(latent)[0];
      for (Eigen::Index b = 0; b < f.rows(); ++b) {
        gl(b, 0) += go * (y(b) - f(b, 0)) / s2;
        gl(b, 1) += go * (-0.5 / s2);
      }
    }
    if (t.needs_grad(raw_noise)) {
      const double ds2 = -0.5 * n / s2 + sq / (2.0 * s2 * s2);
      t.accumulate(raw_noise)[0](0, 0) += go * ds2 * sigmoid(raw);
    }
  });
}

ElboTerms elbo(const ModelVars& vars, const Model& model, const Matrix& x_std,
               const Vector& y_std, std::size_t n_total) {
  Tape& t = vars.raw_noise.tape();
  if (x_std.cols() != static_cast<Eigen::Index>(model.input_dim()))
    throw DimensionMismatch("elbo: input has " + std::to_string(x_std.cols()) +
                            " columns, model expects " + std::to_string(model.input_dim()));
  if (x_std.rows() == 0 || x_std.rows() != y_std.size())
    throw DimensionMismatch("elbo: batch must be nonempty with one target per row");
  if (n_total < static_cast<std::size_t>(x_std.rows()))
    throw std::invalid_argument("elbo: dataset size smaller than batch");
  ElboTerms out;
  Var h = t.constant(single(deterministic_moments(x_std)));
  Var kl;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const LayerState& layer = model.layers[l];
    PreparedEdges prep = prepare_edges(vars.layers[l], layer.whitened);
    out.jitters.insert(out.jitters.end(), prep.jitters.begin(), prep.jitters.end());
    h = propagate_moments(h, prep, layer.d_in, layer.d_out,
                          output_scale(layer, l + 1 == model.layers.size()));
    Var layer_kl = sum(prep.kl);
    kl = kl.valid() ? add(kl, layer_kl) : layer_kl;
  }
  out.latent = h;
  Var ell = expected_log_lik(h, y_std, vars.raw_noise, model.config.noise_floor);
  const double factor = static_cast<double>(n_total) / static_cast<double>(x_std.rows());
  out.elbo = sub(scale(ell, factor), kl);
  return out;
}

}  // namespace ad

Matrix forward_moments(const Model& model, const Matrix& x_std) {
  if (x_std.cols() != static_cast<Eigen::Index>(model.input_dim()))
    throw DimensionMismatch("forward: input has " + std::to_string(x_std.cols()) +
                            " columns, model expects " + std::to_string(model.input_dim()));
  Matrix out(x_std.rows(), 2);
  if (x_std.rows() == 0) return out;
  ad::Tape tape;
  const ad::ModelVars vars = ad::bind_model(tape, model, false);
  std::vector<ad::PreparedEdges> prepared;
  for (std::size_t l = 0; l < vars.layers.size(); ++l)
    prepared.push_back(ad::prepare_edges(vars.layers[l], model.layers[l].whitened));
  for (Eigen::Index start = 0; start < x_std.rows(); start += kChunk) {
    const Eigen::Index rows = std::min<Eigen::Index>(kChunk, x_std.rows() - start);
    Matrix h = deterministic_moments(x_std.middleRows(start, rows));
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      const LayerState& layer = model.layers[l];
      h = ad::propagate_moments(tape.constant(ad::single(std::move(h))), prepared[l], layer.d_in,
                                layer.d_out, output_scale(layer, l + 1 == model.layers.size()))
              .value()[0];
    }
    out.middleRows(start, rows) = h;
  }
  return out;
}

std::vector<Gaussian1D> forward(const Model& model, const Matrix& x_std) {
  const Matrix f = forward_moments(model, x_std);
  std::vector<Gaussian1D> out(static_cast<std::size_t>(f.rows()));
  for (Eigen::Index b = 0; b < f.rows(); ++b) out[static_cast<std::size_t>(b)] = {f(b, 0), f(b, 1)};
  return out;
}

double expected_log_lik(double y, const Gaussian1D& f, double noise_var) {
  if (!(noise_var > 0.0)) throw std::invalid_argument("expected_log_lik: noise variance must be positive");
  const double r = y - f.mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * noise_var) - (r * r + f.variance) / (2.0 * noise_var);
}

double elbo_minibatch(const Model& model, const Matrix& x_std, const Vector& y_std,
                      std::size_t n_total) {
  ad::Tape tape;
  const ad::ModelVars vars = ad::bind_model(tape, model, false);
  return ad::elbo(vars, model, x_std, y_std, n_total).elbo.scalar();
}

Prediction predict(const Model& model, const Matrix& x) {
  const Matrix f = forward_moments(model, model.standardizer.apply_x(x));
  const double s = model.standardizer.y_scale;
  const double s2 = s * s;
  Prediction p;
  p.mean = (f.col(0).array() * s + model.standardizer.y_mean).matrix();
  p.epistemic_var = f.col(1) * s2;
  p.total_var = (p.epistemic_var.array() + model.noise_variance() * s2).matrix();
  return p;
}

double rmse(const Vector& a, const Vector& b) {
  if (a.size() != b.size() || a.size() == 0) throw DimensionMismatch("rmse: sizes differ or empty");
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

bool TrainReport::same_trajectory(const TrainReport& o) const {
  auto bits_equal = [](const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (std::memcmp(&a[i], &b[i], sizeof(double)) != 0) return false;
    return true;
  };
  return bits_equal(elbo, o.elbo) && bits_equal(train_rmse, o.train_rmse) &&
         bits_equal(max_jitter, o.max_jitter) && skipped_steps == o.skipped_steps &&
         has_test == o.has_test && std::memcmp(&test_rmse, &o.test_rmse, sizeof(double)) == 0;
}

nlohmann::json to_json(const TrainReport& r) {
  nlohmann::json j = {{"elbo", r.elbo},
                      {"train_rmse", r.train_rmse},
                      {"epoch_seconds", r.epoch_seconds},
                      {"max_jitter", r.max_jitter},
                      {"skipped_steps", r.skipped_steps}};
  j["test_rmse"] = r.has_test ? nlohmann::json(r.test_rmse) : nlohmann::json(nullptr);
  return j;
}

namespace {

struct Adam {
  double lr;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<ad::Stack> m;
  std::vector<ad::Stack> v;

  explicit Adam(double learning_rate) : lr(learning_rate) {}

  void update(const std::vector<ad::Stack*>& params, const std::vector<ad::Stack>& grads) {
    if (m.empty()) {
      for (const ad::Stack* p : params) {
        m.push_back(ad::zeros_like(*p));
        v.push_back(ad::zeros_like(*p));
      }
    }
    ++step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t k = 0; k < params.size(); ++k) {
      ad::Stack& p = *params[k];
      for (std::size_t s = 0; s < p.size(); ++s) {
        auto g = grads[k][s].array();
        auto mk = m[k][s].array();
        auto vk = v[k][s].array();
        mk = beta1 * mk + (1.0 - beta1) * g;
        vk = beta2 * vk + (1.0 - beta2) * g.square();
        p[s].array() -= lr * (mk / c1) / ((vk / c2).sqrt() + eps);
      }
    }
  }
};

bool all_finite(const std::vector<ad::Stack>& grads) {
  for (const auto& s : grads)
    for (const auto& m : s)
      if (!m.allFinite()) return false;
  return true;
}

}  // namespace

TrainReport train(Model& model, const Dataset& train_set, const Dataset* test) {
  const ModelConfig& cfg = model.config;
  cfg.validate();
  if (train_set.size() == 0) throw std::invalid_argument("train: empty dataset");
  if (train_set.dims() != model.input_dim())
    throw DimensionMismatch("train: dataset has " + std::to_string(train_set.dims()) +
                            " features, model expects " + std::to_string(model.input_dim()));
  model.standardizer = Standardizer::fit(train_set);
  const Matrix x = model.standardizer.apply_x(train_set.x);
  const Vector y = model.standardizer.apply_y(train_set.y);
  if (!x.allFinite() || !y.allFinite() || !std::isfinite(model.standardizer.y_scale) ||
      !model.standardizer.x_scale.allFinite())
    throw TrainingFailure("train: data is not finite after standardization");
  const std::size_t n = train_set.size();
  const std::size_t batch = std::min(cfg.batch_size, n);
  const double y_scale = model.standardizer.y_scale;

  std::vector<ad::Stack*> slots;
  for (auto& layer : model.layers)
    for (ad::Stack* s : {&layer.z, &layer.m, &layer.ls_raw, &layer.log_lengthscale,
                         &layer.log_signal_variance})
      slots.push_back(s);
  ad::Stack noise_slot = ad::scalar_stack(model.raw_noise);
  slots.push_back(&noise_slot);

  Adam adam(cfg.learning_rate);
  TrainReport report;
  const std::uint64_t shuffle_seed = derive_seed(cfg.seed, kShuffleStream);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(shuffle_seed, epoch);
    const std::vector<std::size_t> perm = rng.permutation(n);
    double elbo_sum = 0.0;
    double sq_err = 0.0;
    std::size_t seen = 0;
    std::size_t ok = 0;
    std::size_t skipped = 0;
    double max_jitter = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t rows = std::min(batch, n - start);
      Matrix xb(static_cast<Eigen::Index>(rows), x.cols());
      Vector yb(static_cast<Eigen::Index>(rows));
      for (std::size_t r = 0; r < rows; ++r) {
        xb.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(perm[start + r]));
        yb(static_cast<Eigen::Index>(r)) = y(static_cast<Eigen::Index>(perm[start + r]));
      }
      noise_slot[0](0, 0) = model.raw_noise;
      ad::Tape tape;
      const ad::ModelVars vars = ad::bind_model(tape, model, true);
      std::vector<ad::Stack> grads;
      ad::ElboTerms terms;
      try {
        terms = ad::elbo(vars, model, xb, yb, n);
        tape.backward(ad::scale(terms.elbo, -1.0));
      } catch (const ad::NonFiniteError&) {
        ++skipped;
        continue;
      } catch (const NotPositiveDefinite&) {
        ++skipped;
        continue;
      }
      for (const auto& lv : vars.layers)
        for (const ad::Var& p : {lv.z, lv.m, lv.ls_raw, lv.log_lengthscale, lv.log_signal_variance})
          grads.push_back(tape.grad(p));
      grads.push_back(tape.grad(vars.raw_noise));
      if (!all_finite(grads)) {
        ++skipped;
        continue;
      }
      const Matrix& latent = terms.latent.value()[0];
      sq_err += (latent.col(0) - yb).squaredNorm() * y_scale * y_scale;
      seen += rows;
      elbo_sum += terms.elbo.scalar();
      for (double j : terms.jitters) max_jitter = std::max(max_jitter, j);
      adam.update(slots, grads);
      model.raw_noise = noise_slot[0](0, 0);
      ++ok;
    }
    if (ok == 0)
      throw TrainingFailure("epoch " + std::to_string(epoch + 1) +
                            ": every step produced a non-finite objective or gradient");
    report.elbo.push_back(elbo_sum / static_cast<double>(ok));
    report.train_rmse.push_back(std::sqrt(sq_err / static_cast<double>(seen)));
    report.max_jitter.push_back(max_jitter);
    report.skipped_steps.push_back(skipped);
    report.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  if (test != nullptr && test->size() > 0) {
    report.test_rmse = rmse(predict(model, test->x).mean, test->y);
    report.has_test = true;
  }
  return report;
}

namespace {

nlohmann::json vec_json(const Matrix& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Matrix column_from_json(const nlohmann::json& j, Eigen::Index rows) {
  const auto v = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != rows) throw std::invalid_argument("model JSON: length mismatch");
  Matrix m(rows, 1);
  for (Eigen::Index r = 0; r < rows; ++r) m(r, 0) = v[static_cast<std::size_t>(r)];
  return m;
}

}  // namespace

nlohmann::json to_json(const Model& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : model.layers) {
    nlohmann::json edges = nlohmann::json::array();
    for (std::size_t j = 0; j < layer.d_out; ++j)
      for (std::size_t i = 0; i < layer.d_in; ++i) {
        const std::size_t k = layer.index(i, j);
        nlohmann::json ls = nlohmann::json::array();
        for (Eigen::Index r = 0; r < layer.ls_raw[k].rows(); ++r)
          ls.push_back(vec_json(layer.ls_raw[k].row(r)));
        edges.push_back({{"input", i},
                         {"output", j},
                         {"z", vec_json(layer.z[k])},
                         {"m", vec_json(layer.m[k])},
                         {"ls_raw", ls},
                         {"log_lengthscale", layer.log_lengthscale[k](0, 0)},
                         {"log_signal_variance", layer.log_signal_variance[k](0, 0)}});
      }
    layers.push_back({{"parameterization", layer.whitened ? "whitened" : "unwhitened"},
                      {"d_in", layer.d_in},
                      {"d_out", layer.d_out},
                      {"inducing", layer.inducing},
                      {"edges", edges}});
  }
  const Standardizer& s = model.standardizer;
  return {{"format", "svgpkan-model"},
          {"version", kFormatVersion},
          {"config", to_json(model.config)},
          {"raw_noise", model.raw_noise},
          {"standardizer",
           {{"x_mean", vec_json(s.x_mean)},
            {"x_scale", vec_json(s.x_scale)},
            {"y_mean", s.y_mean},
            {"y_scale", s.y_scale}}},
          {"layers", layers}};
}

Model model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "svgpkan-model")
    throw std::invalid_argument("not an svgpkan model document");
  if (j.at("version").get<int>() != kFormatVersion)
    throw std::invalid_argument("unsupported model version " + j.at("version").dump());
  Model model;
  model.config = config_from_json(j.at("config"));
  model.config.validate();
  model.raw_noise = j.at("raw_noise").get<double>();
  const auto& sj = j.at("standardizer");
  const auto d0 = static_cast<Eigen::Index>(model.config.widths.front());
  model.standardizer.x_mean = column_from_json(sj.at("x_mean"), d0);
  model.standardizer.x_scale = column_from_json(sj.at("x_scale"), d0);
  model.standardizer.y_mean = sj.at("y_mean").get<double>();
  model.standardizer.y_scale = sj.at("y_scale").get<double>();
  const auto& lj = j.at("layers");
  if (lj.size() + 1 != model.config.widths.size())
    throw std::invalid_argument("model JSON: layer count does not match widths");
  for (std::size_t l = 0; l < lj.size(); ++l) {
    const auto& L = lj[l];
    const std::size_t d_in = L.at("d_in"), d_out = L.at("d_out"), inducing = L.at("inducing");
    if (d_in != model.config.widths[l] || d_out != model.config.widths[l + 1])
      throw std::invalid_argument("model JSON: layer dimensions do not chain");
    LayerInit init;
    init.whitened = L.at("parameterization").get<std::string>() == "whitened";
    LayerState layer = LayerState::at_prior(d_in, d_out, inducing, init);
    const auto mm = static_cast<Eigen::Index>(inducing);
    const auto& ej = L.at("edges");
    if (ej.size() != d_in * d_out) throw std::invalid_argument("model JSON: edge count mismatch");
    for (const auto& e : ej) {
      const std::size_t k = layer.index(e.at("input"), e.at("output"));
      layer.z[k] = column_from_json(e.at("z"), mm);
      layer.m[k] = column_from_json(e.at("m"), mm);
      const auto& rows = e.at("ls_raw");
      if (static_cast<Eigen::Index>(rows.size()) != mm)
        throw std::invalid_argument("model JSON: covariance factor size mismatch");
      for (Eigen::Index r = 0; r < mm; ++r)
        layer.ls_raw[k].row(r) = column_from_json(rows[static_cast<std::size_t>(r)], mm).transpose();
      layer.log_lengthscale[k](0, 0) = e.at("log_lengthscale").get<double>();
      layer.log_signal_variance[k](0, 0) = e.at("log_signal_variance").get<double>();
    }
    model.layers.push_back(std::move(layer));
  }
  return model;
}

void save_model(const std::filesystem::path& path, const Model& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write " + path.string());
  out << to_json(m).dump(1) << '\n';
  if (!out) throw std::ios_base::failure("write failed: " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open " + path.string());
  return model_from_json(nlohmann::json::parse(in));
}

}  // namespace svgpkan

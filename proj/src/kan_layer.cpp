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


#include "svgpkan/kan_layer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace svgpkan {

std::size_t LayerState::index(std::size_t i, std::size_t j) const {
  if (i >= d_in || j >= d_out)
    throw std::out_of_range("edge (" + std::to_string(j) + ", " + std::to_string(i) +
                            ") outside a " + std::to_string(d_out) + " x " +
                            std::to_string(d_in) + " layer");
  return j * d_in + i;
}

namespace {

Matrix kzz_factor(const EdgeState& e) {
  std::vector<double> z(e.z.data(), e.z.data() + e.z.size());
  return cholesky(inducing_gram(z, e.hyper)).L;
}

}  // namespace

EdgeState LayerState::edge(std::size_t i, std::size_t j) const {
  const std::size_t k = index(i, j);
  EdgeState e;
  e.z = z[k].col(0);
  e.m = m[k].col(0);
  e.ls_raw = ls_raw[k];
  e.hyper = {log_lengthscale[k](0, 0), log_signal_variance[k](0, 0)};
  if (whitened) {
    const Matrix l = kzz_factor(e);
    const Matrix lw = e.covariance_factor();
    e.m = l * e.m;
    e.set_covariance_factor(l.triangularView<Eigen::Lower>() * lw);
  }
  return e;
}

void LayerState::set_edge(std::size_t i, std::size_t j, const EdgeState& e) {
  const std::size_t k = index(i, j);
  if (e.size() != inducing) throw DimensionMismatch("set_edge: inducing count differs from layer");
  z[k] = e.z;
  log_lengthscale[k](0, 0) = e.hyper.log_lengthscale;
  log_signal_variance[k](0, 0) = e.hyper.log_signal_variance;
  if (whitened) {
    const Matrix l = kzz_factor(e);
    m[k] = solve_lower(l, Matrix(e.m));
    EdgeState w = e;
    w.set_covariance_factor(solve_lower(l, e.covariance_factor()));
    ls_raw[k] = w.ls_raw;
  } else {
    m[k] = e.m;
    ls_raw[k] = e.ls_raw;
  }
}

namespace {

LayerState empty_layer(std::size_t d_in, std::size_t d_out, std::size_t inducing, bool whitened) {
  if (d_in == 0 || d_out == 0 || inducing == 0)
    throw std::invalid_argument("layer dimensions and inducing count must be positive");
  LayerState layer;
  layer.d_in = d_in;
  layer.d_out = d_out;
  layer.inducing = inducing;
  layer.whitened = whitened;
  const std::size_t n = d_in * d_out;
  const auto mm = static_cast<Eigen::Index>(inducing);
  layer.z.assign(n, Matrix(mm, 1));
  layer.m.assign(n, Matrix::Zero(mm, 1));
  layer.ls_raw.assign(n, Matrix::Zero(mm, mm));
  layer.log_lengthscale.assign(n, Matrix(1, 1));
  layer.log_signal_variance.assign(n, Matrix(1, 1));
  return layer;
}

std::vector<double> grid_points(std::size_t n, double lo, double hi) {
  std::vector<double> z(n);
  if (n == 1) {
    z[0] = 0.5 * (lo + hi);
    return z;
  }
  for (std::size_t a = 0; a < n; ++a) z[a] = lo + (hi - lo) * static_cast<double>(a) / (n - 1);
  return z;
}

}  // namespace

LayerState LayerState::initialize(std::size_t d_in, std::size_t d_out, std::size_t inducing,
                                  Rng& rng, const LayerInit& init) {
  LayerState layer = empty_layer(d_in, d_out, inducing, init.whitened);
  const std::vector<double> z = grid_points(inducing, init.z_lo, init.z_hi);
  const RbfHyper hyper = RbfHyper::from_natural(init.lengthscale, init.signal_variance);
  const auto mm = static_cast<Eigen::Index>(inducing);
  // Whitened storage holds the same q(u) without forming L explicitly.
  const Matrix l = init.whitened ? Matrix(Matrix::Identity(mm, mm))
                                 : cholesky(inducing_gram(z, hyper)).L;
  for (std::size_t k = 0; k < layer.edge_count(); ++k) {
    Matrix eps(mm, 1);
    for (Eigen::Index a = 0; a < mm; ++a) eps(a, 0) = rng.normal();
    layer.z[k] = Eigen::Map<const Matrix>(z.data(), mm, 1);
    layer.m[k] = init.mean_scale * (l * eps);
    const Matrix ls = init.cov_scale * l;
    layer.ls_raw[k] = ls.triangularView<Eigen::StrictlyLower>();
    layer.ls_raw[k].diagonal() = ls.diagonal().array().log().matrix();
    layer.log_lengthscale[k](0, 0) = hyper.log_lengthscale;
    layer.log_signal_variance[k](0, 0) = hyper.log_signal_variance;
  }
  return layer;
}

LayerState LayerState::at_prior(std::size_t d_in, std::size_t d_out, std::size_t inducing,
                                const LayerInit& init) {
  LayerState layer = empty_layer(d_in, d_out, inducing, init.whitened);
  const std::vector<double> z = grid_points(inducing, init.z_lo, init.z_hi);
  const EdgeState e =
      EdgeState::at_prior(z, RbfHyper::from_natural(init.lengthscale, init.signal_variance));
  for (std::size_t k = 0; k < layer.edge_count(); ++k) layer.set_edge(k % d_in, k / d_in, e);
  return layer;
}

Matrix layer_forward(const Matrix& inputs, const LayerState& layer, double scale) {
  if (inputs.cols() != static_cast<Eigen::Index>(2 * layer.d_in))
    throw DimensionMismatch("layer_forward: expected " + std::to_string(2 * layer.d_in) +
                            " moment columns, got " + std::to_string(inputs.cols()));
  if ((inputs.rightCols(static_cast<Eigen::Index>(layer.d_in)).array() < 0.0).any())
    throw std::invalid_argument("layer_forward: negative input variance");
  if (inputs.rows() == 0) return Matrix(0, static_cast<Eigen::Index>(2 * layer.d_out));
  ad::Tape tape;
  const ad::PreparedEdges prepared = prepare_layer(tape, layer, false);
  return ad::propagate_moments(tape.constant(ad::single(inputs)), prepared, layer.d_in,
                               layer.d_out, scale)
      .value()[0];
}

std::vector<std::vector<Gaussian1D>> layer_forward(
    const std::vector<std::vector<Gaussian1D>>& inputs, const LayerState& layer, double scale) {
  const auto d_in = static_cast<Eigen::Index>(layer.d_in);
  Matrix in(static_cast<Eigen::Index>(inputs.size()), 2 * d_in);
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    if (inputs[b].size() != layer.d_in) throw DimensionMismatch("layer_forward: input width");
    for (Eigen::Index i = 0; i < d_in; ++i) {
      in(static_cast<Eigen::Index>(b), i) = inputs[b][i].mean;
      in(static_cast<Eigen::Index>(b), d_in + i) = inputs[b][i].variance;
    }
  }
  const Matrix out = layer_forward(in, layer, scale);
  const auto d_out = static_cast<Eigen::Index>(layer.d_out);
  std::vector<std::vector<Gaussian1D>> res(inputs.size(), std::vector<Gaussian1D>(layer.d_out));
  for (std::size_t b = 0; b < inputs.size(); ++b)
    for (Eigen::Index j = 0; j < d_out; ++j)
      res[b][j] = {out(static_cast<Eigen::Index>(b), j), out(static_cast<Eigen::Index>(b), d_out + j)};
  return res;
}

double layer_kl(const LayerState& layer) {
  ad::Tape tape;
  const ad::PreparedEdges prepared = prepare_layer(tape, layer, false);
  const ad::Stack& kl = prepared.kl.value();
  double total = 0.0;
  for (const Matrix& v : kl) total += v(0, 0);
  return total;
}

std::vector<CurvePoint> layer_curve(const LayerState& layer, std::size_t i, std::size_t j,
                                    std::span<const double> grid) {
  const EdgeState e = layer.edge(i, j);
  std::vector<CurvePoint> out;
  out.reserve(grid.size());
  for (const Gaussian1D& g : edge_moments_deterministic(grid, e))
    out.push_back({g.mean, std::sqrt(g.variance)});
  return out;
}

double output_scale(const LayerState& layer, bool is_output) {
  return is_output ? 1.0 : 1.0 / std::sqrt(static_cast<double>(layer.d_in));
}

ad::PreparedEdges prepare_layer(ad::Tape& tape, const LayerState& layer, bool trainable) {
  return ad::prepare_edges(ad::bind_layer(tape, layer, trainable), layer.whitened);
}

Matrix deterministic_moments(const Matrix& x) {
  Matrix in = Matrix::Zero(x.rows(), 2 * x.cols());
  in.leftCols(x.cols()) = x;
  return in;
}

namespace ad {

EdgeParams bind_layer(Tape& tape, const LayerState& layer, bool trainable) {
  auto bind = [&](const Stack& s) { return trainable ? tape.parameter(s) : tape.constant(s); };
  return {bind(layer.z), bind(layer.m), bind(layer.ls_raw), bind(layer.log_lengthscale),
          bind(layer.log_signal_variance)};
}

}  // namespace ad

}  // namespace svgpkan

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


#ifndef SVGPKAN_KAN_LAYER_HPP_
#define SVGPKAN_KAN_LAYER_HPP_

#include "svgpkan/rng.hpp"
#include "svgpkan/svgp_edge.hpp"
#include "svgpkan/tape.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace svgpkan {

struct LayerInit {
  double z_lo = -2.0;
  double z_hi = 2.0;
  double lengthscale = 1.0;
  double signal_variance = 1.0;
  // m = mean_scale * chol(Kzz) eps, L_S = cov_scale * chol(Kzz).
  double mean_scale = 0.1;
  double cov_scale = 0.1;
  bool whitened = false;
};

// D_out x D_in independent edges with a shared inducing count. Parameters
// are held in batched stacks; edge (j, i) maps input i to output j and
// lives at slice j * d_in + i. When whitened, m and ls_raw parameterize
// q(v) with u = chol(Kzz) v; edge() and set_edge() always speak q(u).
struct LayerState {
  std::size_t d_in = 0;
  std::size_t d_out = 0;
  std::size_t inducing = 0;
  bool whitened = false;
  ad::Stack z;                    // M x 1
  ad::Stack m;                    // M x 1
  ad::Stack ls_raw;               // M x M
  ad::Stack log_lengthscale;      // 1 x 1
  ad::Stack log_signal_variance;  // 1 x 1

  std::size_t edge_count() const { return d_in * d_out; }
  std::size_t index(std::size_t i, std::size_t j) const;
  EdgeState edge(std::size_t i, std::size_t j) const;
  void set_edge(std::size_t i, std::size_t j, const EdgeState& e);

  static LayerState initialize(std::size_t d_in, std::size_t d_out, std::size_t inducing, Rng& rng,
                               const LayerInit& init = {});
  // Every edge at its prior (m = 0, S = Kzz).
  static LayerState at_prior(std::size_t d_in, std::size_t d_out, std::size_t inducing,
                             const LayerInit& init = {});
};

ad::PreparedEdges prepare_layer(ad::Tape& tape, const LayerState& layer, bool trainable);

// Moments are laid out as one B x 2D matrix: means in the first D columns,
// variances in the last D. Output moments are multiplied by scale (means)
// and scale^2 (variances).
Matrix layer_forward(const Matrix& inputs, const LayerState& layer, double scale = 1.0);

std::vector<std::vector<Gaussian1D>> layer_forward(
    const std::vector<std::vector<Gaussian1D>>& inputs, const LayerState& layer,
    double scale = 1.0);

double layer_kl(const LayerState& layer);

struct CurvePoint {
  double mean = 0.0;
  double sd = 0.0;
};

// Deterministic-input moments of edge (j, i) along a grid.
std::vector<CurvePoint> layer_curve(const LayerState& layer, std::size_t i, std::size_t j,
                                    std::span<const double> grid);

// Normalizer applied to a layer's output: 1/sqrt(d_in) for hidden layers,
// 1 for the output layer.
double output_scale(const LayerState& layer, bool is_output);

Matrix deterministic_moments(const Matrix& x);

namespace ad {

EdgeParams bind_layer(Tape& tape, const LayerState& layer, bool trainable);

}  // namespace ad

}  // namespace svgpkan

#endif  // SVGPKAN_KAN_LAYER_HPP_

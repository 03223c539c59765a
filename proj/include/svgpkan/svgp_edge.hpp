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

// A univariate sparse variational GP edge.
//
// The edge carries M inducing inputs z with q(u) = N(m, S), S = L_S L_S^T,
// under a zero-mean RBF prior u ~ N(0, Kzz), where Kzz carries a fixed
// diagonal of kInducingJitter times the signal variance. With alpha = Kzz^{-1} m and
// Q = alpha alpha^T - Kzz^{-1} + Kzz^{-1} S Kzz^{-1}, the output moments for
// an input x ~ N(mu, var) are
//
//   E[f]   = psi1^T alpha
//   E[f^2] = psi0 + <Q, Psi2>
//   Var[f] = E[f^2] - E[f]^2
//
// which reduce to the usual SVGP predictive at var = 0, where Psi2 is the
// outer product psi1 psi1^T.

#ifndef SVGPKAN_SVGP_EDGE_HPP_
#define SVGPKAN_SVGP_EDGE_HPP_

#include "svgpkan/kernel.hpp"
#include "svgpkan/tape.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace svgpkan {

inline constexpr double kInducingJitter = 1e-6;

// Prior covariance of u: k(z, z) + kInducingJitter * sigma_f^2 * I.
Matrix inducing_gram(std::span<const double> z, const RbfHyper& hyper);

struct Gaussian1D {
  double mean = 0.0;
  double variance = 0.0;
};

struct EdgeState {
  Vector z;
  Vector m;
  // Unconstrained factor: strictly lower part of L_S as is, diagonal as log.
  Matrix ls_raw;
  RbfHyper hyper;

  std::size_t size() const { return static_cast<std::size_t>(z.size()); }

  Matrix covariance_factor() const;
  Matrix covariance() const;
  // l must be lower triangular with a strictly positive diagonal.
  void set_covariance_factor(const Matrix& l);

  // m = 0 and S = Kzz (the factor comes from the jittered Cholesky).
  static EdgeState at_prior(std::span<const double> z, const RbfHyper& hyper);
};

// Predictive moments at deterministic inputs. O(M^3) once, O(M^2) per input.
std::vector<Gaussian1D> edge_moments_deterministic(std::span<const double> x, const EdgeState& e);

// Moment-matched output for x ~ N(mu_in, var_in).
Gaussian1D edge_moments_uncertain(double mu_in, double var_in, const EdgeState& e);

// KL(N(m, S) || N(0, Kzz)).
double kl_to_prior(const EdgeState& e);

namespace ad {

// Parameters of a stack of edges sharing M; each Var has one slice per edge.
struct EdgeParams {
  Var z;                    // M x 1
  Var m;                    // M x 1
  Var ls_raw;               // M x M
  Var log_lengthscale;      // 1 x 1
  Var log_signal_variance;  // 1 x 1
};

// Per-step quantities shared by every sample routed through the edges.
struct PreparedEdges {
  Var z;
  Var alpha;  // Kzz^{-1} m, M x 1
  Var q;      // alpha alpha^T - Kzz^{-1} + Kzz^{-1} S Kzz^{-1}, M x M
  Var log_lengthscale;
  Var log_signal_variance;
  Var kl;     // per-edge KL(q(u) || p(u)), 1 x 1
  std::vector<double> jitters;
};

// One Kzz factorization per edge.
// With whitened set, params.m and params.ls_raw describe q(v) for
// u = L v, L = chol(Kzz); the prepared quantities refer to q(u) either way.
PreparedEdges prepare_edges(const EdgeParams& params, bool whitened = false);

// Additive moment propagation through a D_out x D_in grid of edges (edge
// (j, i) is slice j * D_in + i). `inputs` is one B x 2 D_in slice holding
// input means then input variances; the result is B x 2 D_out in the same
// layout. Output means are multiplied by `scale` and variances by scale^2.
Var propagate_moments(Var inputs, const PreparedEdges& edges, std::size_t d_in,
                      std::size_t d_out, double scale = 1.0);

// Constant tape values of a single edge.
EdgeParams constant_params(Tape& tape, const EdgeState& e);

}  // namespace ad

}  // namespace svgpkan

#endif  // SVGPKAN_SVGP_EDGE_HPP_

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

#ifndef SVGPKAN_KERNEL_HPP_
#define SVGPKAN_KERNEL_HPP_

#include "svgpkan/numerics.hpp"
#include "svgpkan/tape.hpp"

#include <cmath>
#include <span>

namespace svgpkan {

using Vector = Eigen::VectorXd;

// Squared-exponential hyperparameters, stored in log space.
struct RbfHyper {
  double log_lengthscale = 0.0;
  double log_signal_variance = 0.0;

  double lengthscale() const { return std::exp(log_lengthscale); }
  double signal_variance() const { return std::exp(log_signal_variance); }

  static RbfHyper from_natural(double lengthscale, double signal_variance) {
    return {std::log(lengthscale), std::log(signal_variance)};
  }
};

// k(x, x') = sf2 * exp(-(x - x')^2 / (2 l^2))
double k(double x, double x2, const RbfHyper& h);

Matrix kernel_matrix(std::span<const double> x, std::span<const double> z, const RbfHyper& h);

// Expectations of kernel quantities under x ~ N(mu, var):
//   psi0 = E[k(x, x)]
//   psi1_m = E[k(x, z_m)]
//   psi2_mm' = E[k(x, z_m) k(x, z_m')]
double psi0(const RbfHyper& h);
Vector psi1(double mu, double var, std::span<const double> z, const RbfHyper& h);
Matrix psi2(double mu, double var, std::span<const double> z, const RbfHyper& h);

namespace ad {

// Batched Gram matrices K_e(x_e, z_e) for every slice e. x and z are
// count x n x 1 and count x m x 1; the hyperparameters are count x 1 x 1 log
// values. Passing the same Var for x and z builds Kzz.
Var rbf_gram(Var x, Var z, Var log_lengthscale, Var log_signal_variance);

}  // namespace ad

}  // namespace svgpkan

#endif  // SVGPKAN_KERNEL_HPP_

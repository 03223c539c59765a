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

#ifndef SVGPKAN_NUMERICS_HPP_
#define SVGPKAN_NUMERICS_HPP_

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace svgpkan {

// Dense row-major f64 matrix. Every matrix-valued quantity in the library
// (Kzz, S, Psi2, batched moments) is one of these.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class NotPositiveDefinite : public std::runtime_error {
 public:
  NotPositiveDefinite(std::size_t pivot, double jitter);

  std::size_t pivot() const { return pivot_; }
  double jitter() const { return jitter_; }

 private:
  std::size_t pivot_;
  double jitter_;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Lower-triangular factor of A + jitter * I.
struct CholeskyFactor {
  Matrix L;
  double jitter = 0.0;
};

// Jitter ladder: 0, then 1e-6 * mean(diag A) multiplied by 10 per step up to
// 1e-2 * mean(diag A). A pivot counts as failed when it is not above
// kPivotFloor * mean(diag A); this rejects factorizations that succeed only
// in exact arithmetic.
inline constexpr double kPivotFloor = 1e-10;
inline constexpr double kJitterStart = 1e-6;
inline constexpr double kJitterStop = 1e-2;

// Throws NotPositiveDefinite (carrying the failing pivot of the last attempt)
// when even the largest jitter fails. Throws DimensionMismatch for non-square
// or asymmetric input.
CholeskyFactor cholesky(const Matrix& a);

// Unjittered factorization attempt. Returns the failing pivot index, or -1.
long cholesky_in_place(Matrix& a, double pivot_floor);

// L X = B.
Matrix solve_lower(const Matrix& l, const Matrix& b);
Matrix solve_lower(const CholeskyFactor& f, const Matrix& b);

// L^T X = B.
Matrix solve_upper(const Matrix& l, const Matrix& b);
Matrix solve_upper(const CholeskyFactor& f, const Matrix& b);

// A^{-1} B through both triangular solves.
Matrix cholesky_solve(const CholeskyFactor& f, const Matrix& b);

bool all_finite(const Matrix& a);

// Variance outputs are clamped here after computation.
inline constexpr double kVarianceFloor = 1e-12;

}  // namespace svgpkan

#endif  // SVGPKAN_NUMERICS_HPP_

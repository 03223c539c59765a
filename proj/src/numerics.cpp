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

#include "svgpkan/numerics.hpp"

#include <cmath>

namespace svgpkan {

NotPositiveDefinite::NotPositiveDefinite(std::size_t pivot, double jitter)
    : std::runtime_error("matrix is not positive definite (pivot " +
                         std::to_string(pivot) + ", jitter " +
                         std::to_string(jitter) + ")"),
      pivot_(pivot),
      jitter_(jitter) {}

long cholesky_in_place(Matrix& a, double pivot_floor) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > pivot_floor) || !std::isfinite(d)) return static_cast<long>(j);
    const double ljj = std::sqrt(d);
    a(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / ljj;
    }
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) a(i, j) = 0.0;
  return -1;
}

CholeskyFactor cholesky(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0)
    throw DimensionMismatch("cholesky: matrix must be square and nonempty");
  const double scale = a.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < i; ++j)
      if (std::abs(a(i, j) - a(j, i)) > 1e-12 * scale)
        throw DimensionMismatch("cholesky: matrix is not symmetric");

  const double mean_diag = a.diagonal().mean();
  const double floor = kPivotFloor * std::abs(mean_diag);
  long failed = 0;
  double jitter = 0.0;
  for (double rel = 0.0; rel <= kJitterStop * (1.0 + 1e-9);
       rel = rel == 0.0 ? kJitterStart : rel * 10.0) {
    jitter = rel * mean_diag;
    Matrix work = a;
    work.diagonal().array() += jitter;
    failed = cholesky_in_place(work, floor);
    if (failed < 0) return {std::move(work), jitter};
  }
  throw NotPositiveDefinite(static_cast<std::size_t>(failed), jitter);
}

Matrix solve_lower(const Matrix& l, const Matrix& b) {
  if (l.rows() != l.cols() || l.rows() != b.rows())
    throw DimensionMismatch("solve_lower: incompatible dimensions");
  Matrix x = b;
  l.triangularView<Eigen::Lower>().solveInPlace(x);
  return x;
}

Matrix solve_upper(const Matrix& l, const Matrix& b) {
  if (l.rows() != l.cols() || l.rows() != b.rows())
    throw DimensionMismatch("solve_upper: incompatible dimensions");
  Matrix x = b;
  l.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

Matrix solve_lower(const CholeskyFactor& f, const Matrix& b) { return solve_lower(f.L, b); }
Matrix solve_upper(const CholeskyFactor& f, const Matrix& b) { return solve_upper(f.L, b); }

Matrix cholesky_solve(const CholeskyFactor& f, const Matrix& b) {
  return solve_upper(f.L, solve_lower(f.L, b));
}

bool all_finite(const Matrix& a) { return a.allFinite(); }

}  // namespace svgpkan

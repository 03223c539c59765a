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

#include "svgpkan/kernel.hpp"

#include "svgpkan/parallel.hpp"

namespace svgpkan {

double k(double x, double x2, const RbfHyper& h) {
  const double ell = h.lengthscale();
  const double d = x - x2;
  return h.signal_variance() * std::exp(-d * d / (2.0 * ell * ell));
}

Matrix kernel_matrix(std::span<const double> x, std::span<const double> z, const RbfHyper& h) {
  Matrix out(x.size(), z.size());
  for (std::size_t a = 0; a < x.size(); ++a)
    for (std::size_t b = 0; b < z.size(); ++b) out(a, b) = k(x[a], z[b], h);
  return out;
}

double psi0(const RbfHyper& h) { return h.signal_variance(); }

Vector psi1(double mu, double var, std::span<const double> z, const RbfHyper& h) {
  const double ell2 = h.lengthscale() * h.lengthscale();
  const double t = ell2 + var;
  const double c = h.signal_variance() * std::sqrt(ell2 / t);
  Vector out(z.size());
  for (std::size_t m = 0; m < z.size(); ++m) {
    const double d = z[m] - mu;
    out(m) = c * std::exp(-d * d / (2.0 * t));
  }
  return out;
}

Matrix psi2(double mu, double var, std::span<const double> z, const RbfHyper& h) {
  const double ell2 = h.lengthscale() * h.lengthscale();
  const double u = ell2 + 2.0 * var;
  const double sf2 = h.signal_variance();
  const double c = sf2 * sf2 * std::sqrt(ell2 / u);
  const std::size_t n = z.size();
  Matrix out(n, n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a; b < n; ++b) {
      const double dz = z[a] - z[b];
      const double w = mu - 0.5 * (z[a] + z[b]);
      const double v = c * std::exp(-dz * dz / (4.0 * ell2)) * std::exp(-w * w / u);
      out(a, b) = v;
      out(b, a) = v;
    }
  }
  return out;
}

namespace ad {

Var rbf_gram(Var x, Var z, Var log_lengthscale, Var log_signal_variance) {
  const Stack& xv = x.value();
  const Stack& zv = z.value();
  const Stack& lv = log_lengthscale.value();
  const Stack& sv = log_signal_variance.value();
  const std::size_t count = xv.size();
  if (zv.size() != count || lv.size() != count || sv.size() != count)
    throw DimensionMismatch("rbf_gram: slice counts differ");
  Stack out(count);
  parallel_for(count, [&](std::size_t e) {
    const double inv_ell2 = std::exp(-2.0 * lv[e](0, 0));
    const double sf2 = std::exp(sv[e](0, 0));
    const Eigen::Index n = xv[e].rows();
    const Eigen::Index m = zv[e].rows();
    out[e].resize(n, m);
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = 0; b < m; ++b) {
        const double d = xv[e](a, 0) - zv[e](b, 0);
        out[e](a, b) = sf2 * std::exp(-0.5 * d * d * inv_ell2);
      }
  });
  return x.tape().record(
      std::move(out), {x, z, log_lengthscale, log_signal_variance},
      [x, z, log_lengthscale, log_signal_variance](const Stack& g, const Stack& kv) {
        Tape& t = x.tape();
        const Stack& xv = x.value();
        const Stack& zv = z.value();
        const Stack& lv = log_lengthscale.value();
        Stack* gx = t.needs_grad(x) ? &t.accumulate(x) : nullptr;
        Stack* gz = t.needs_grad(z) ? &t.accumulate(z) : nullptr;
        Stack* gl = t.needs_grad(log_lengthscale) ? &t.accumulate(log_lengthscale) : nullptr;
        Stack* gs = t.needs_grad(log_signal_variance) ? &t.accumulate(log_signal_variance) : nullptr;
        // x and z may alias; accumulate into per-slice locals before writing.
        parallel_for(g.size(), [&](std::size_t e) {
          const double inv_ell2 = std::exp(-2.0 * lv[e](0, 0));
          const Eigen::Index n = xv[e].rows();
          const Eigen::Index m = zv[e].rows();
          Vector dx = Vector::Zero(n);
          Vector dz = Vector::Zero(m);
          double dl = 0.0;
          double ds = 0.0;
          for (Eigen::Index a = 0; a < n; ++a)
            for (Eigen::Index b = 0; b < m; ++b) {
              const double gk = g[e](a, b) * kv[e](a, b);
              const double d = xv[e](a, 0) - zv[e](b, 0);
              dx(a) -= gk * d * inv_ell2;
              dz(b) += gk * d * inv_ell2;
              dl += gk * d * d * inv_ell2;
              ds += gk;
            }
          if (gx != nullptr) (*gx)[e].col(0) += dx;
          if (gz != nullptr) (*gz)[e].col(0) += dz;
          if (gl != nullptr) (*gl)[e](0, 0) += dl;
          if (gs != nullptr) (*gs)[e](0, 0) += ds;
        });
      });
}

}  // namespace ad

}  // namespace svgpkan

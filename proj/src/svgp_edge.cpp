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

#include "svgpkan/svgp_edge.hpp"

#include "svgpkan/parallel.hpp"

#include <cmath>
#include <memory>

namespace svgpkan {

Matrix inducing_gram(std::span<const double> z, const RbfHyper& hyper) {
  Matrix k = kernel_matrix(z, z, hyper);
  k.diagonal().array() += kInducingJitter * hyper.signal_variance();
  return k;
}

Matrix EdgeState::covariance_factor() const {
  Matrix l = ls_raw.triangularView<Eigen::StrictlyLower>();
  l.diagonal() = ls_raw.diagonal().array().exp().matrix();
  return l;
}

Matrix EdgeState::covariance() const {
  const Matrix l = covariance_factor();
  return l * l.transpose();
}

void EdgeState::set_covariance_factor(const Matrix& l) {
  if (l.rows() != l.cols() || l.rows() != z.size())
    throw DimensionMismatch("set_covariance_factor: factor must be M x M");
  if ((l.diagonal().array() <= 0.0).any())
    throw std::invalid_argument("set_covariance_factor: diagonal must be positive");
  ls_raw = l.triangularView<Eigen::StrictlyLower>();
  ls_raw.diagonal() = l.diagonal().array().log().matrix();
}

EdgeState EdgeState::at_prior(std::span<const double> z, const RbfHyper& hyper) {
  EdgeState e;
  e.z = Eigen::Map<const Vector>(z.data(), static_cast<Eigen::Index>(z.size()));
  e.m = Vector::Zero(e.z.size());
  e.hyper = hyper;
  e.set_covariance_factor(cholesky(inducing_gram(z, hyper)).L);
  return e;
}

namespace ad {

EdgeParams constant_params(Tape& tape, const EdgeState& e) {
  return {tape.constant(single(e.z)), tape.constant(single(e.m)), tape.constant(single(e.ls_raw)),
          tape.constant(scalar_stack(e.hyper.log_lengthscale)),
          tape.constant(scalar_stack(e.hyper.log_signal_variance))};
}

PreparedEdges prepare_edges(const EdgeParams& p, bool whitened) {
  Tape& t = p.z.tape();
  const std::size_t count = p.z.count();
  const Eigen::Index m = p.z.rows();

  PreparedEdges out;
  Var eye = t.constant(Stack(count, Matrix::Identity(m, m)));
  Var kzz = rbf_gram(p.z, p.z, p.log_lengthscale, p.log_signal_variance);
  kzz = add(kzz, scale(mul(kzz, eye), kInducingJitter));
  Var l = cholesky(kzz, &out.jitters);
  Var ls = lower_from_raw(p.ls_raw);

  Var alpha;
  Var q;
  Var kl2;
  if (whitened) {
    alpha = solve_upper(l, p.m);
    // Q = L^{-T} (m_v m_v^T + S_v - I) L^{-1}
    Var inner = sub(add(matmul(p.m, transpose(p.m)), matmul(ls, transpose(ls))), eye);
    q = transpose(solve_upper(l, transpose(solve_upper(l, inner))));
    // 2 KL = tr(S_v) + m_v^T m_v - M - log|S_v|
    kl2 = sub(add(sum_each(square(ls)), sum_each(square(p.m))),
              scale(sum_each(diag(p.ls_raw)), 2.0));
  } else {
    Var w = solve_lower(l, eye);  // L^{-1}
    Var kinv = matmul(transpose(w), w);
    alpha = solve_upper(l, solve_lower(l, p.m));
    Var c = matmul(kinv, ls);  // Kzz^{-1} S Kzz^{-1} = c c^T
    q = add(sub(matmul(alpha, transpose(alpha)), kinv), matmul(c, transpose(c)));
    // 2 KL = tr(Kzz^{-1} S) + m^T alpha - M + log|Kzz| - log|S|
    Var tr_ks = sum_each(square(matmul(w, ls)));
    Var maha = sum_each(mul(p.m, alpha));
    Var logdet_k = scale(sum_each(log(diag(l))), 2.0);
    Var logdet_s = scale(sum_each(diag(p.ls_raw)), 2.0);
    kl2 = sub(add(add(tr_ks, maha), logdet_k), logdet_s);
  }

  out.z = p.z;
  out.alpha = alpha;
  out.q = q;
  out.log_lengthscale = p.log_lengthscale;
  out.log_signal_variance = p.log_signal_variance;
  out.kl = scale(shift(kl2, -static_cast<double>(m)), 0.5);
  return out;
}

namespace {

// Forward intermediates of one edge over the batch, kept for backward.
struct EdgeCache {
  Matrix psi1;  // B x M
  Matrix aux;   // Q psi1 rows (deterministic input) or packed pair exp terms
  // Packed upper-triangular pair tables, filled when some input is uncertain.
  std::vector<double> zbar;  // (z_a + z_b) / 2
  std::vector<double> dzs;   // (z_a - z_b) / (2 l^2)
  std::vector<double> dz2;   // (z_a - z_b)^2 / (4 l^2)
  std::vector<double> g;     // exp(-dz2)
  std::vector<double> gq;    // g q_ab, doubled off the diagonal
  std::vector<double> mean;
  std::vector<double> var;
  std::vector<char> clamped;
  std::vector<char> fast;
};

struct Slice {
  const Matrix& z;
  const Matrix& alpha;
  const Matrix& q;
  double ell2;
  double sf2;
};

Eigen::Index tri_size(Eigen::Index m) { return m * (m + 1) / 2; }

void fill_pair_tables(const Slice& s, EdgeCache& c) {
  const Eigen::Index m = s.z.rows();
  const std::size_t n = static_cast<std::size_t>(tri_size(m));
  c.zbar.resize(n);
  c.dzs.resize(n);
  c.dz2.resize(n);
  c.g.resize(n);
  c.gq.resize(n);
  const double inv2l2 = 0.5 / s.ell2;
  std::size_t idx = 0;
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index bb = a; bb < m; ++bb, ++idx) {
      const double d = s.z(a, 0) - s.z(bb, 0);
      c.zbar[idx] = 0.5 * (s.z(a, 0) + s.z(bb, 0));
      c.dzs[idx] = d * inv2l2;
      c.dz2[idx] = 0.5 * d * d * inv2l2;
      c.g[idx] = std::exp(-c.dz2[idx]);
      c.gq[idx] = (a == bb ? 1.0 : 2.0) * c.g[idx] * s.q(a, bb);
    }
  }
}

void edge_forward(const Slice& s, const Matrix& in, Eigen::Index col_mu, Eigen::Index col_var,
                  bool var_needs_grad, EdgeCache& c) {
  const Eigen::Index batch = in.rows();
  const Eigen::Index m = s.z.rows();
  const Eigen::Index pairs = tri_size(m);
  c.psi1.resize(batch, m);
  c.mean.assign(batch, 0.0);
  c.var.assign(batch, 0.0);
  c.clamped.assign(batch, 0);
  c.fast.assign(batch, 0);

  bool any_uncertain = false;
  for (Eigen::Index b = 0; b < batch; ++b)
    if (var_needs_grad || in(b, col_var) != 0.0) any_uncertain = true;
  if (any_uncertain) fill_pair_tables(s, c);
  c.aux.resize(batch, any_uncertain ? std::max(m, pairs) : m);

  const double* z = s.z.data();
  for (Eigen::Index b = 0; b < batch; ++b) {
    const double mu = in(b, col_mu);
    const double t = s.ell2 + in(b, col_var);
    const double c1 = s.sf2 * std::sqrt(s.ell2 / t);
    const double inv2t = 0.5 / t;
    double* p1 = c.psi1.data() + b * m;
    for (Eigen::Index a = 0; a < m; ++a) {
      const double d = z[a] - mu;
      p1[a] = -d * d * inv2t;
    }
    Eigen::Map<Eigen::ArrayXd> p1a(p1, m);
    p1a = c1 * p1a.exp();
  }
  const Vector mean = c.psi1 * s.alpha;
  // Q psi1 rows for deterministic inputs: Psi2 = psi1 psi1^T.
  if (!any_uncertain) c.aux.noalias() = c.psi1 * s.q.transpose();

  for (Eigen::Index b = 0; b < batch; ++b) {
    const double mu = in(b, col_mu);
    const double sv = in(b, col_var);
    const double* p1 = c.psi1.data() + b * m;
    double* aux = c.aux.data() + b * c.aux.cols();
    double e2 = s.sf2;
    const bool fast = sv == 0.0 && !var_needs_grad;
    c.fast[b] = fast ? 1 : 0;
    if (fast) {
      if (any_uncertain) {
        for (Eigen::Index a = 0; a < m; ++a) {
          const double* qa = s.q.data() + a * m;
          double qp = 0.0;
          for (Eigen::Index bb = 0; bb < m; ++bb) qp += qa[bb] * p1[bb];
          aux[a] = qp;
        }
      }
      double quad = 0.0;
      for (Eigen::Index a = 0; a < m; ++a) quad += p1[a] * aux[a];
      e2 += quad;
    } else {
      const double u = s.ell2 + 2.0 * sv;
      const double c2 = s.sf2 * s.sf2 * std::sqrt(s.ell2 / u);
      const double inv_u = 1.0 / u;
      for (Eigen::Index idx = 0; idx < pairs; ++idx) {
        const double w = mu - c.zbar[idx];
        aux[idx] = -w * w * inv_u;
      }
      Eigen::Map<Eigen::ArrayXd> h(aux, pairs);
      h = h.exp();
      e2 += c2 * (h * Eigen::Map<const Eigen::ArrayXd>(c.gq.data(), pairs)).sum();
    }
    double var = e2 - mean(b) * mean(b);
    if (!(var > kVarianceFloor)) {
      var = kVarianceFloor;
      c.clamped[b] = 1;
    }
    c.mean[b] = mean(b);
    c.var[b] = var;
  }
}

struct EdgeGrad {
  Vector dz;
  Vector dalpha;
  Matrix dq;
  double dlog_ell = 0.0;
  double dlog_sf2 = 0.0;
  std::vector<double> dmu;
  std::vector<double> dvar;
};

void edge_backward(const Slice& s, const Matrix& in, Eigen::Index col_mu, Eigen::Index col_var,
                   const EdgeCache& c, const std::vector<double>& gm,
                   const std::vector<double>& gv, EdgeGrad& out) {
  const Eigen::Index batch = in.rows();
  const Eigen::Index m = s.z.rows();
  const Eigen::Index pairs = tri_size(m);
  out.dz = Vector::Zero(m);
  out.dq = Matrix::Zero(m, m);
  out.dmu.assign(batch, 0.0);
  out.dvar.assign(batch, 0.0);
  Vector dpsi(m);
  Vector dmt(batch);
  Matrix fast_w;  // gv-weighted psi1 rows of fast rows
  bool any_fast = false;
  // Packed pair accumulators over the uncertain rows.
  Eigen::ArrayXd hsum, pwu_sum, p, w;
  const Eigen::Map<const Eigen::ArrayXd> gq(c.gq.data(), static_cast<Eigen::Index>(c.gq.size()));
  const Eigen::Map<const Eigen::ArrayXd> zbar(c.zbar.data(),
                                              static_cast<Eigen::Index>(c.zbar.size()));
  double* dz = out.dz.data();
  const double* z = s.z.data();
  const double* alpha = s.alpha.data();

  for (Eigen::Index b = 0; b < batch; ++b) {
    const double gvb = c.clamped[b] ? 0.0 : gv[b];
    dmt(b) = gm[b] - 2.0 * c.mean[b] * gvb;
    const double mu = in(b, col_mu);
    const double sv = in(b, col_var);
    const double* p1 = c.psi1.data() + b * m;
    const double* aux = c.aux.data() + b * c.aux.cols();
    for (Eigen::Index a = 0; a < m; ++a) dpsi(a) = dmt(b) * alpha[a];
    out.dlog_sf2 += gvb * s.sf2;  // psi0 = sf2

    if (gvb != 0.0) {
      if (c.fast[b]) {
        if (!any_fast) fast_w = Matrix::Zero(batch, m);
        any_fast = true;
        double* fw = fast_w.data() + b * m;
        for (Eigen::Index a = 0; a < m; ++a) {
          dpsi(a) += 2.0 * gvb * aux[a];
          fw[a] = gvb * p1[a];
        }
      } else {
        if (hsum.size() == 0) {
          hsum = Eigen::ArrayXd::Zero(pairs);
          pwu_sum = Eigen::ArrayXd::Zero(pairs);
          p.resize(pairs);
          w.resize(pairs);
        }
        const double u = s.ell2 + 2.0 * sv;
        const double inv_u = 1.0 / u;
        const double scale = gvb * s.sf2 * s.sf2 * std::sqrt(s.ell2 * inv_u);
        const Eigen::Map<const Eigen::ArrayXd> h(aux, pairs);
        hsum += scale * h;
        // p counts both orderings of an off-diagonal pair.
        p = scale * gq * h;
        w = mu - zbar;
        const double sp = p.sum();
        const double spw = (p * w).sum();
        const double spw2 = (p * w.square()).sum();
        pwu_sum += inv_u * p * w;
        out.dlog_sf2 += 2.0 * sp;
        out.dlog_ell += sp * (1.0 - s.ell2 * inv_u) + 2.0 * s.ell2 * inv_u * inv_u * spw2;
        out.dmu[b] += -2.0 * inv_u * spw;
        out.dvar[b] += 2.0 * inv_u * inv_u * spw2 - inv_u * sp;
      }
    }

    // psi1_a = sf2 sqrt(l^2 / t) exp(-d_a^2 / (2 t)), t = l^2 + var, d_a = z_a - mu
    const double t = s.ell2 + sv;
    const double inv_t = 1.0 / t;
    double sr = 0.0, srd = 0.0, srd2 = 0.0;
    for (Eigen::Index a = 0; a < m; ++a) {
      const double r = dpsi(a) * p1[a];
      const double d = z[a] - mu;
      const double rd = r * d;
      sr += r;
      srd += rd;
      srd2 += rd * d;
      dz[a] -= rd * inv_t;
    }
    out.dlog_sf2 += sr;
    out.dlog_ell += sr + s.ell2 * (srd2 * inv_t * inv_t - sr * inv_t);
    out.dvar[b] += 0.5 * srd2 * inv_t * inv_t - 0.5 * sr * inv_t;
    out.dmu[b] += srd * inv_t;
  }

  out.dalpha = c.psi1.transpose() * dmt;
  if (any_fast) out.dq.noalias() += c.psi1.transpose() * fast_w;
  if (hsum.size() > 0) {
    // Row-independent pair factors applied once to the batch sums.
    const Eigen::ArrayXd psum = gq * hsum;
    out.dlog_ell += 2.0 * (psum * Eigen::Map<const Eigen::ArrayXd>(c.dz2.data(), pairs)).sum();
    Eigen::Index idx = 0;
    for (Eigen::Index a = 0; a < m; ++a) {
      for (Eigen::Index bb = a; bb < m; ++bb, ++idx) {
        const double v = c.g[idx] * hsum[idx];
        const double pd = psum[idx] * c.dzs[idx];
        out.dq(a, bb) += v;
        if (bb != a) out.dq(bb, a) += v;
        dz[a] += pwu_sum[idx] - pd;
        dz[bb] += pwu_sum[idx] + pd;
      }
    }
  }
}

}  // namespace

Var propagate_moments(Var inputs, const PreparedEdges& edges, std::size_t d_in, std::size_t d_out,
                      double scale) {
  Tape& t = inputs.tape();
  const Matrix& in = inputs.value().at(0);
  const std::size_t count = d_in * d_out;
  if (inputs.count() != 1 || in.cols() != static_cast<Eigen::Index>(2 * d_in))
    throw DimensionMismatch("propagate_moments: inputs must be one B x 2 D_in slice");
  if (edges.z.count() != count) throw DimensionMismatch("propagate_moments: edge count mismatch");

  const bool var_needs_grad = t.needs_grad(inputs);
  auto caches = std::make_shared<std::vector<EdgeCache>>(count);
  const Stack& zv = edges.z.value();
  const Stack& av = edges.alpha.value();
  const Stack& qv = edges.q.value();
  const Stack& lv = edges.log_lengthscale.value();
  const Stack& sv = edges.log_signal_variance.value();

  parallel_for(count, [&](std::size_t e) {
    const std::size_t i = e % d_in;
    const Slice s{zv[e], av[e], qv[e], std::exp(2.0 * lv[e](0, 0)), std::exp(sv[e](0, 0))};
    edge_forward(s, in, static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d_in + i),
                 var_needs_grad, (*caches)[e]);
  });

  const Eigen::Index batch = in.rows();
  Matrix out = Matrix::Zero(batch, static_cast<Eigen::Index>(2 * d_out));
  const double scale2 = scale * scale;
  for (std::size_t j = 0; j < d_out; ++j) {
    for (Eigen::Index b = 0; b < batch; ++b) {
      double mean = 0.0;
      double var = 0.0;
      for (std::size_t i = 0; i < d_in; ++i) {
        const EdgeCache& c = (*caches)[j * d_in + i];
        mean += c.mean[b];
        var += c.var[b];
      }
      out(b, static_cast<Eigen::Index>(j)) = scale * mean;
      out(b, static_cast<Eigen::Index>(d_out + j)) = scale2 * var;
    }
  }

  std::vector<Var> parents{inputs, edges.z, edges.alpha, edges.q, edges.log_lengthscale,
                           edges.log_signal_variance};
  const PreparedEdges e = edges;
  return t.record(single(std::move(out)), parents,
                  [inputs, e, d_in, d_out, scale, caches](const Stack& g, const Stack&) {
    Tape& t = inputs.tape();
    const Matrix& in = inputs.value()[0];
    const Matrix& go = g[0];
    const std::size_t count = d_in * d_out;
    const Eigen::Index batch = in.rows();
    const Stack& zv = e.z.value();
    const Stack& av = e.alpha.value();
    const Stack& qv = e.q.value();
    const Stack& lv = e.log_lengthscale.value();
    const Stack& sv = e.log_signal_variance.value();
    std::vector<EdgeGrad> grads(count);

    parallel_for(count, [&](std::size_t k) {
      const std::size_t j = k / d_in;
      const std::size_t i = k % d_in;
      std::vector<double> gm(batch), gvv(batch);
      for (Eigen::Index b = 0; b < batch; ++b) {
        gm[b] = scale * go(b, static_cast<Eigen::Index>(j));
        gvv[b] = scale * scale * go(b, static_cast<Eigen::Index>(d_out + j));
      }
      const Slice s{zv[k], av[k], qv[k], std::exp(2.0 * lv[k](0, 0)), std::exp(sv[k](0, 0))};
      edge_backward(s, in, static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d_in + i),
                    (*caches)[k], gm, gvv, grads[k]);
    });

    if (t.needs_grad(e.z)) {
      Stack& gz = t.accumulate(e.z);
      for (std::size_t k = 0; k < count; ++k) gz[k].col(0) += grads[k].dz;
    }
    if (t.needs_grad(e.alpha)) {
      Stack& ga = t.accumulate(e.alpha);
      for (std::size_t k = 0; k < count; ++k) ga[k].col(0) += grads[k].dalpha;
    }
    if (t.needs_grad(e.q)) {
      Stack& gq = t.accumulate(e.q);
      for (std::size_t k = 0; k < count; ++k) gq[k] += grads[k].dq;
    }
    if (t.needs_grad(e.log_lengthscale)) {
      Stack& gl = t.accumulate(e.log_lengthscale);
      for (std::size_t k = 0; k < count; ++k) gl[k](0, 0) += grads[k].dlog_ell;
    }
    if (t.needs_grad(e.log_signal_variance)) {
      Stack& gs = t.accumulate(e.log_signal_variance);
      for (std::size_t k = 0; k < count; ++k) gs[k](0, 0) += grads[k].dlog_sf2;
    }
    if (t.needs_grad(inputs)) {
      Matrix& gi = t.accumulate(inputs)[0];
      for (std::size_t i = 0; i < d_in; ++i)
        for (std::size_t j = 0; j < d_out; ++j) {
          const EdgeGrad& eg = grads[j * d_in + i];
          for (Eigen::Index b = 0; b < batch; ++b) {
            gi(b, static_cast<Eigen::Index>(i)) += eg.dmu[b];
            gi(b, static_cast<Eigen::Index>(d_in + i)) += eg.dvar[b];
          }
        }
    }
  });
}

}  // namespace ad

std::vector<Gaussian1D> edge_moments_deterministic(std::span<const double> x, const EdgeState& e) {
  std::vector<Gaussian1D> out(x.size());
  if (x.empty()) return out;
  ad::Tape tape;
  const ad::PreparedEdges prepared = ad::prepare_edges(ad::constant_params(tape, e));
  Matrix in = Matrix::Zero(static_cast<Eigen::Index>(x.size()), 2);
  for (std::size_t b = 0; b < x.size(); ++b) in(static_cast<Eigen::Index>(b), 0) = x[b];
  const ad::Var res = ad::propagate_moments(tape.constant(ad::single(std::move(in))), prepared, 1, 1);
  const Matrix& r = res.value()[0];
  for (std::size_t b = 0; b < x.size(); ++b)
    out[b] = {r(static_cast<Eigen::Index>(b), 0), r(static_cast<Eigen::Index>(b), 1)};
  return out;
}

Gaussian1D edge_moments_uncertain(double mu_in, double var_in, const EdgeState& e) {
  if (var_in < 0.0) throw std::invalid_argument("edge_moments_uncertain: negative input variance");
  ad::Tape tape;
  const ad::PreparedEdges prepared = ad::prepare_edges(ad::constant_params(tape, e));
  Matrix in(1, 2);
  in << mu_in, var_in;
  const ad::Var res = ad::propagate_moments(tape.constant(ad::single(std::move(in))), prepared, 1, 1);
  return {res.value()[0](0, 0), res.value()[0](0, 1)};
}

double kl_to_prior(const EdgeState& e) {
  ad::Tape tape;
  return ad::prepare_edges(ad::constant_params(tape, e)).kl.scalar();
}

}  // namespace svgpkan

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

#include "svgpkan/tape.hpp"

#include "svgpkan/parallel.hpp"

#include <cmath>
#include <exception>
#include <string>
#include <utility>

namespace svgpkan::ad {

Stack zeros_like(const Stack& s) {
  Stack out;
  out.reserve(s.size());
  for (const auto& m : s) out.push_back(Matrix::Zero(m.rows(), m.cols()));
  return out;
}

Stack single(Matrix m) {
  Stack s;
  s.push_back(std::move(m));
  return s;
}

Stack scalar_stack(double v) { return single(Matrix::Constant(1, 1, v)); }

const Stack& Var::value() const { return tape_->value(*this); }

double Var::scalar() const {
  const Stack& v = value();
  if (v.size() != 1 || v[0].size() != 1) throw DimensionMismatch("scalar(): value is not 1x1x1");
  return v[0](0, 0);
}

Var Tape::constant(Stack value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Stack value) {
  nodes_.push_back(Node{std::move(value), {}, {}, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Stack value, const std::vector<Var>& parents, BackwardFn backward) {
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape_ != this) throw std::logic_error("Tape::record: parent from another tape");
    needs = needs || nodes_[p.id()].needs_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : BackwardFn{}, needs});
  return Var(this, nodes_.size() - 1);
}

Stack& Tape::accumulate(Var v) {
  Node& n = nodes_[v.id()];
  if (n.grad.empty()) n.grad = zeros_like(n.value);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (consumed_) throw std::logic_error("Tape::backward: tape already consumed");
  consumed_ = true;
  const double l = loss.scalar();
  if (!std::isfinite(l)) throw NonFiniteError("loss is not finite");
  if (!nodes_[loss.id()].needs_grad) return;
  accumulate(loss)[0](0, 0) += 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(n.grad, n.value);
  }
}

Stack Tape::grad(Var parameter) const {
  const Node& n = nodes_[parameter.id()];
  if (n.grad.empty()) return zeros_like(n.value);
  return n.grad;
}

Stack finite_difference(const std::function<double(const Stack&)>& f, const Stack& x,
                        double step) {
  Stack g = zeros_like(x);
  Stack probe = x;
  for (std::size_t s = 0; s < x.size(); ++s) {
    for (Eigen::Index i = 0; i < x[s].size(); ++i) {
      const double orig = x[s].data()[i];
      probe[s].data()[i] = orig + step;
      const double fp = f(probe);
      probe[s].data()[i] = orig - step;
      const double fm = f(probe);
      probe[s].data()[i] = orig;
      g[s].data()[i] = (fp - fm) / (2.0 * step);
    }
  }
  return g;
}

namespace {

void check_same_shape(const Stack& a, const Stack& b, const char* op) {
  if (a.size() != b.size()) throw DimensionMismatch(std::string(op) + ": slice counts differ");
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a[k].rows() != b[k].rows() || a[k].cols() != b[k].cols())
      throw DimensionMismatch(std::string(op) + ": shapes differ");
}

template <typename F>
Stack map_slices(const Stack& a, F&& f) {
  Stack out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = f(a[k]);
  return out;
}

// Records a single-parent node whose slice adjoint is local(k, g_k, y_k).
template <typename F>
Var unary(Var a, Stack value, F local) {
  return a.tape().record(std::move(value), {a}, [a, local](const Stack& g, const Stack& y) {
    Stack& ga = a.tape().accumulate(a);
    for (std::size_t k = 0; k < g.size(); ++k) ga[k] += local(k, g[k], y[k]);
  });
}

Matrix tril(const Matrix& m) {
  Matrix out = m;
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = i + 1; j < out.cols(); ++j) out(i, j) = 0.0;
  return out;
}

}  // namespace

Var add(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "add");
  Stack out(a.count());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = a.value()[k] + b.value()[k];
  return a.tape().record(std::move(out), {a, b}, [a, b](const Stack& g, const Stack&) {
    Tape& t = a.tape();
    if (t.needs_grad(a)) {
      Stack& ga = t.accumulate(a);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
    }
    if (t.needs_grad(b)) {
      Stack& gb = t.accumulate(b);
      for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k];
    }
  });
}

Var sub(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "sub");
  Stack out(a.count());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = a.value()[k] - b.value()[k];
  return a.tape().record(std::move(out), {a, b}, [a, b](const Stack& g, const Stack&) {
    Tape& t = a.tape();
    if (t.needs_grad(a)) {
      Stack& ga = t.accumulate(a);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
    }
    if (t.needs_grad(b)) {
      Stack& gb = t.accumulate(b);
      for (std::size_t k = 0; k < g.size(); ++k) gb[k] -= g[k];
    }
  });
}

Var mul(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "mul");
  Stack out(a.count());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = a.value()[k].cwiseProduct(b.value()[k]);
  return a.tape().record(std::move(out), {a, b}, [a, b](const Stack& g, const Stack&) {
    Tape& t = a.tape();
    if (t.needs_grad(a)) {
      Stack& ga = t.accumulate(a);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k].cwiseProduct(b.value()[k]);
    }
    if (t.needs_grad(b)) {
      Stack& gb = t.accumulate(b);
      for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k].cwiseProduct(a.value()[k]);
    }
  });
}

Var divide(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "divide");
  Stack out(a.count());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = a.value()[k].cwiseQuotient(b.value()[k]);
  return a.tape().record(std::move(out), {a, b}, [a, b](const Stack& g, const Stack& y) {
    Tape& t = a.tape();
    if (t.needs_grad(a)) {
      Stack& ga = t.accumulate(a);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k].cwiseQuotient(b.value()[k]);
    }
    if (t.needs_grad(b)) {
      Stack& gb = t.accumulate(b);
      for (std::size_t k = 0; k < g.size(); ++k)
        gb[k] -= g[k].cwiseProduct(y[k]).cwiseQuotient(b.value()[k]);
    }
  });
}

Var scale(Var a, double c) {
  Stack out = map_slices(a.value(), [c](const Matrix& m) -> Matrix { return c * m; });
  return unary(a, std::move(out),
               [c](std::size_t, const Matrix& g, const Matrix&) -> Matrix { return c * g; });
}

Var shift(Var a, double c) {
  Stack out =
      map_slices(a.value(), [c](const Matrix& m) -> Matrix { return (m.array() + c).matrix(); });
  return unary(a, std::move(out),
               [](std::size_t, const Matrix& g, const Matrix&) -> Matrix { return g; });
}

Var exp(Var a) {
  Stack out = map_slices(a.value(), [](const Matrix& m) -> Matrix { return m.array().exp().matrix(); });
  return unary(a, std::move(out), [](std::size_t, const Matrix& g, const Matrix& y) -> Matrix {
    return g.cwiseProduct(y);
  });
}

Var log(Var a) {
  Stack out = map_slices(a.value(), [](const Matrix& m) -> Matrix { return m.array().log().matrix(); });
  return unary(a, std::move(out), [a](std::size_t k, const Matrix& g, const Matrix&) -> Matrix {
    return g.cwiseQuotient(a.value()[k]);
  });
}

Var sqrt(Var a) {
  Stack out = map_slices(a.value(), [](const Matrix& m) -> Matrix { return m.array().sqrt().matrix(); });
  return unary(a, std::move(out), [](std::size_t, const Matrix& g, const Matrix& y) -> Matrix {
    return (g.array() / (2.0 * y.array())).matrix();
  });
}

Var square(Var a) {
  Stack out = map_slices(a.value(), [](const Matrix& m) -> Matrix { return m.array().square().matrix(); });
  return unary(a, std::move(out), [a](std::size_t k, const Matrix& g, const Matrix&) -> Matrix {
    return (2.0 * g.array() * a.value()[k].array()).matrix();
  });
}

Var softplus(Var a) {
  // log(1 + e^x) = max(x, 0) + log1p(e^{-|x|})
  Stack out = map_slices(a.value(), [](const Matrix& m) -> Matrix {
    return m.unaryExpr([](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); });
  });
  return unary(a, std::move(out), [a](std::size_t k, const Matrix& g, const Matrix&) -> Matrix {
    const Matrix sig = a.value()[k].unaryExpr([](double x) {
      return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    });
    return g.cwiseProduct(sig);
  });
}

Var transpose(Var a) {
  Stack out = map_slices(a.value(), [](const Matrix& m) -> Matrix { return m.transpose(); });
  return unary(a, std::move(out), [](std::size_t, const Matrix& g, const Matrix&) -> Matrix {
    return g.transpose();
  });
}

Var matmul(Var a, Var b) {
  const Stack& av = a.value();
  const Stack& bv = b.value();
  if (av.size() != bv.size()) throw DimensionMismatch("matmul: slice counts differ");
  if (av.front().cols() != bv.front().rows()) throw DimensionMismatch("matmul: inner dimensions differ");
  Stack out(av.size());
  parallel_for(av.size(), [&](std::size_t k) { out[k].noalias() = av[k] * bv[k]; });
  return a.tape().record(std::move(out), {a, b}, [a, b](const Stack& g, const Stack&) {
    Tape& t = a.tape();
    const Stack& av = a.value();
    const Stack& bv = b.value();
    if (t.needs_grad(a)) {
      Stack& ga = t.accumulate(a);
      parallel_for(g.size(), [&](std::size_t k) { ga[k].noalias() += g[k] * bv[k].transpose(); });
    }
    if (t.needs_grad(b)) {
      Stack& gb = t.accumulate(b);
      parallel_for(g.size(), [&](std::size_t k) { gb[k].noalias() += av[k].transpose() * g[k]; });
    }
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (const auto& m : a.value()) total += m.sum();
  return a.tape().record(scalar_stack(total), {a}, [a](const Stack& g, const Stack&) {
    Stack& ga = a.tape().accumulate(a);
    const double gv = g[0](0, 0);
    for (auto& m : ga) m.array() += gv;
  });
}

Var sum_each(Var a) {
  Stack out =
      map_slices(a.value(), [](const Matrix& m) -> Matrix { return Matrix::Constant(1, 1, m.sum()); });
  return unary(a, std::move(out), [a](std::size_t k, const Matrix& g, const Matrix&) -> Matrix {
    return Matrix::Constant(a.value()[k].rows(), a.value()[k].cols(), g(0, 0));
  });
}

Var trace(Var a) {
  Stack out =
      map_slices(a.value(), [](const Matrix& m) -> Matrix { return Matrix::Constant(1, 1, m.trace()); });
  return unary(a, std::move(out), [a](std::size_t k, const Matrix& g, const Matrix&) -> Matrix {
    const Matrix& v = a.value()[k];
    Matrix d = Matrix::Zero(v.rows(), v.cols());
    d.diagonal().array() = g(0, 0);
    return d;
  });
}

Var diag(Var a) {
  Stack out = map_slices(a.value(), [](const Matrix& m) -> Matrix { return m.diagonal(); });
  return unary(a, std::move(out), [a](std::size_t k, const Matrix& g, const Matrix&) -> Matrix {
    const Matrix& v = a.value()[k];
    Matrix d = Matrix::Zero(v.rows(), v.cols());
    d.diagonal() = g.col(0);
    return d;
  });
}

Var cholesky(Var a, std::vector<double>* jitters) {
  const Stack& av = a.value();
  Stack out(av.size());
  std::vector<double> applied(av.size(), 0.0);
  std::vector<std::exception_ptr> errors(av.size());
  parallel_for(av.size(), [&](std::size_t k) {
    try {
      CholeskyFactor f = svgpkan::cholesky(av[k]);
      out[k] = std::move(f.L);
      applied[k] = f.jitter;
    } catch (...) {
      errors[k] = std::current_exception();
    }
  });
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  if (jitters != nullptr) *jitters = applied;
  // Adjoint: S = L^{-T} Phi(L^T Lbar) L^{-1}, Abar = (S + S^T) / 2, with Phi
  // taking the lower triangle and halving the diagonal.
  return a.tape().record(std::move(out), {a}, [a](const Stack& g, const Stack& l) {
    Stack& ga = a.tape().accumulate(a);
    parallel_for(g.size(), [&](std::size_t k) {
      const Matrix& lk = l[k];
      Matrix p = tril(lk.transpose() * tril(g[k]));
      p.diagonal() *= 0.5;
      // S = L^{-T} P L^{-1}; S^T = L^{-T} (L^{-T} P)^T.
      const Matrix left = svgpkan::solve_upper(lk, p);
      const Matrix st = svgpkan::solve_upper(lk, Matrix(left.transpose()));
      ga[k] += 0.5 * (st + st.transpose());
    });
  });
}

Var solve_lower(Var l, Var b) {
  const Stack& lv = l.value();
  const Stack& bv = b.value();
  if (lv.size() != bv.size()) throw DimensionMismatch("solve_lower: slice counts differ");
  Stack out(lv.size());
  parallel_for(lv.size(), [&](std::size_t k) { out[k] = svgpkan::solve_lower(lv[k], bv[k]); });
  return l.tape().record(std::move(out), {l, b}, [l, b](const Stack& g, const Stack& x) {
    Tape& t = l.tape();
    const Stack& lv = l.value();
    const bool want_l = t.needs_grad(l);
    const bool want_b = t.needs_grad(b);
    Stack* gl = want_l ? &t.accumulate(l) : nullptr;
    Stack* gb = want_b ? &t.accumulate(b) : nullptr;
    parallel_for(g.size(), [&](std::size_t k) {
      const Matrix bbar = svgpkan::solve_upper(lv[k], g[k]);
      if (gb != nullptr) (*gb)[k] += bbar;
      if (gl != nullptr) (*gl)[k] -= tril(bbar * x[k].transpose());
    });
  });
}

Var solve_upper(Var l, Var b) {
  const Stack& lv = l.value();
  const Stack& bv = b.value();
  if (lv.size() != bv.size()) throw DimensionMismatch("solve_upper: slice counts differ");
  Stack out(lv.size());
  parallel_for(lv.size(), [&](std::size_t k) { out[k] = svgpkan::solve_upper(lv[k], bv[k]); });
  return l.tape().record(std::move(out), {l, b}, [l, b](const Stack& g, const Stack& x) {
    Tape& t = l.tape();
    const Stack& lv = l.value();
    const bool want_l = t.needs_grad(l);
    const bool want_b = t.needs_grad(b);
    Stack* gl = want_l ? &t.accumulate(l) : nullptr;
    Stack* gb = want_b ? &t.accumulate(b) : nullptr;
    parallel_for(g.size(), [&](std::size_t k) {
      const Matrix bbar = svgpkan::solve_lower(lv[k], g[k]);
      if (gb != nullptr) (*gb)[k] += bbar;
      if (gl != nullptr) (*gl)[k] -= tril(x[k] * bbar.transpose());
    });
  });
}

Var lower_from_raw(Var raw) {
  Stack out = map_slices(raw.value(), [](const Matrix& m) -> Matrix {
    if (m.rows() != m.cols()) throw DimensionMismatch("lower_from_raw: matrix must be square");
    Matrix l = tril(m);
    l.diagonal() = m.diagonal().array().exp().matrix();
    return l;
  });
  return unary(raw, std::move(out), [](std::size_t, const Matrix& g, const Matrix& y) -> Matrix {
    Matrix d = tril(g);
    d.diagonal() = g.diagonal().cwiseProduct(y.diagonal());
    return d;
  });
}

}  // namespace svgpkan::ad

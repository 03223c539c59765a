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

// Reverse-mode gradient engine over stacks of matrices.
//
// Every value on the tape is a Stack: a list of equally shaped matrices, one
// per GP edge of a layer (or a single matrix for batch-level quantities).
// Operations act slice by slice, so one recorded node covers all edges of a
// layer and the per-node bookkeeping does not grow with the edge count.

#ifndef SVGPKAN_TAPE_HPP_
#define SVGPKAN_TAPE_HPP_

#include "svgpkan/numerics.hpp"

#include <cstddef>
#include <deque>
#include <functional>
#include <stdexcept>
#include <vector>

namespace svgpkan::ad {

using Stack = std::vector<Matrix>;

Stack zeros_like(const Stack& s);
Stack single(Matrix m);
Stack scalar_stack(double v);

class Tape;

class Var {
 public:
  Var() = default;

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Stack& value() const;
  std::size_t count() const { return value().size(); }
  Eigen::Index rows() const { return value().front().rows(); }
  Eigen::Index cols() const { return value().front().cols(); }
  // Value of a 1x1x1 node.
  double scalar() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Tape {
 public:
  // Receives the adjoint and the value of the node's output; accumulates
  // into parents through Tape::accumulate.
  using BackwardFn = std::function<void(const Stack& out_grad, const Stack& out_value)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Stack value);
  Var parameter(Stack value);
  Var record(Stack value, const std::vector<Var>& parents, BackwardFn backward);

  const Stack& value(Var v) const { return nodes_[v.id()].value; }
  bool needs_grad(Var v) const { return nodes_[v.id()].needs_grad; }

  // Adjoint buffer of a node that needs gradients; zero-initialized on first
  // access. Only valid during backward().
  Stack& accumulate(Var v);

  // Seeds d(loss)/d(loss) = 1 and runs every recorded backward function once.
  // The loss must be a finite 1x1x1 value; a tape supports one pass.
  void backward(Var loss);

  // Gradient with respect to a parameter after backward(). Parameters the
  // loss does not depend on get exact zeros.
  Stack grad(Var parameter) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Stack value;
    Stack grad;
    BackwardFn backward;
    bool needs_grad = false;
  };

  std::deque<Node> nodes_;
  bool consumed_ = false;
};

// Central finite-difference gradient of f at x, perturbing each raw entry by
// +-step. Used by tests as the independent oracle.
Stack finite_difference(const std::function<double(const Stack&)>& f, const Stack& x,
                        double step = 1e-5);

// --- elementwise and structural operations (slice-wise) ---------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var divide(Var a, Var b);
Var scale(Var a, double c);
Var shift(Var a, double c);
Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var square(Var a);
Var softplus(Var a);
Var transpose(Var a);
Var matmul(Var a, Var b);

// Sum of all entries of all slices, 1x1x1.
Var sum(Var a);
// Per-slice sum of entries, count x 1 x 1.
Var sum_each(Var a);
// Per-slice trace, count x 1 x 1.
Var trace(Var a);
// Per-slice diagonal as a column, count x n x 1.
Var diag(Var a);

// --- factorizations ----------------------------------------------------------

// Per-slice jittered Cholesky (see svgpkan::cholesky). The applied jitters are
// written to *jitters when given. Jitter is treated as a constant by backward.
Var cholesky(Var a, std::vector<double>* jitters = nullptr);
// L X = B per slice; L must be lower triangular.
Var solve_lower(Var l, Var b);
// L^T X = B per slice.
Var solve_upper(Var l, Var b);
// Lower-triangular matrix from an unconstrained square: strictly lower part
// copied, diagonal exponentiated, upper part zero.
Var lower_from_raw(Var raw);

}  // namespace svgpkan::ad

#endif  // SVGPKAN_TAPE_HPP_

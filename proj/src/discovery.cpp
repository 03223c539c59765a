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


#include "svgpkan/discovery.hpp"

#include "svgpkan/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace svgpkan {

namespace {

constexpr std::uint64_t kPermutationStream = 0x7065726dULL;

double mse(const Vector& a, const Vector& b) {
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

}  // namespace

const char* to_string(EdgeClass c) {
  switch (c) {
    case EdgeClass::kLinear:
      return "linear";
    case EdgeClass::kHighFrequency:
      return "high-frequency";
    case EdgeClass::kSmoothNonlinear:
      break;
  }
  return "smooth-nonlinear";
}

ImportanceReport permutation_importance(const Model& model, const Matrix& x_test,
                                        const Vector& y_test, std::size_t repeats,
                                        std::uint64_t seed, bool identity) {
  if (x_test.rows() == 0) throw std::invalid_argument("permutation_importance: empty test set");
  if (x_test.rows() < 2) throw std::invalid_argument("permutation_importance: need at least 2 rows");
  if (x_test.rows() != y_test.size()) throw DimensionMismatch("permutation_importance: row mismatch");
  if (repeats == 0) throw std::invalid_argument("permutation_importance: repeats must be at least 1");
  const std::size_t d = static_cast<std::size_t>(x_test.cols());
  const std::size_t n = static_cast<std::size_t>(x_test.rows());

  ImportanceReport report;
  report.repeats = repeats;
  report.seed = seed;
  report.baseline_mse = mse(predict(model, x_test).mean, y_test);
  report.mean_delta.assign(d, 0.0);
  report.sd_delta.assign(d, 0.0);

  const std::uint64_t base = derive_seed(seed, kPermutationStream);
  for (std::size_t i = 0; i < d; ++i) {
    std::vector<double> deltas(repeats);
    for (std::size_t r = 0; r < repeats; ++r) {
      Matrix xp = x_test;
      if (!identity) {
        Rng rng(derive_seed(base, i), r);
        const std::vector<std::size_t> perm = rng.permutation(n);
        for (std::size_t b = 0; b < n; ++b)
          xp(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(i)) =
              x_test(static_cast<Eigen::Index>(perm[b]), static_cast<Eigen::Index>(i));
      }
      deltas[r] = mse(predict(model, xp).mean, y_test) - report.baseline_mse;
    }
    double mean = 0.0;
    for (double v : deltas) mean += v;
    mean /= static_cast<double>(repeats);
    double ss = 0.0;
    for (double v : deltas) ss += (v - mean) * (v - mean);
    report.mean_delta[i] = mean;
    report.sd_delta[i] = repeats > 1 ? std::sqrt(ss / static_cast<double>(repeats - 1)) : 0.0;
  }
  report.selected = select_features(report.mean_delta, report.tau);
  return report;
}

std::vector<std::size_t> select_features(std::span<const double> importance, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("select_features: tau must lie in (0, 1)");
  std::vector<std::size_t> out;
  if (importance.empty()) return out;
  const double top = *std::max_element(importance.begin(), importance.end());
  if (!(top > 0.0)) return out;
  for (std::size_t i = 0; i < importance.size(); ++i)
    if (importance[i] > tau * top) out.push_back(i);
  return out;
}

std::vector<double> selection_stability(const std::vector<std::vector<std::size_t>>& selections,
                                        std::size_t d) {
  std::vector<double> rate(d, 0.0);
  if (selections.empty()) return rate;
  for (const auto& s : selections)
    for (std::size_t i : s) {
      if (i >= d) throw std::out_of_range("selection_stability: feature index out of range");
      rate[i] += 1.0;
    }
  for (double& r : rate) r /= static_cast<double>(selections.size());
  return rate;
}

EdgeClass classify_lengthscale(double lengthscale, double range) {
  if (!(range > 0.0)) throw std::invalid_argument("classify_lengthscale: range must be positive");
  const double ratio = lengthscale / range;
  if (ratio > kLinearRatio) return EdgeClass::kLinear;
  if (ratio < kHighFrequencyRatio) return EdgeClass::kHighFrequency;
  return EdgeClass::kSmoothNonlinear;
}

std::vector<EdgeLabel> classify_edges(const Model& model, std::span<const double> ranges) {
  const LayerState& layer = model.layers.front();
  if (ranges.size() != layer.d_in) throw DimensionMismatch("classify_edges: one range per input feature");
  std::vector<EdgeLabel> out;
  for (std::size_t j = 0; j < layer.d_out; ++j)
    for (std::size_t i = 0; i < layer.d_in; ++i) {
      const double ell = std::exp(layer.log_lengthscale[layer.index(i, j)](0, 0));
      out.push_back({i, j, ell, ranges[i], classify_lengthscale(ell, ranges[i])});
    }
  return out;
}

std::vector<double> standardized_ranges(const Model& model, const Matrix& x) {
  const Matrix xs = model.standardizer.apply_x(x);
  std::vector<double> out(static_cast<std::size_t>(xs.cols()));
  for (Eigen::Index c = 0; c < xs.cols(); ++c)
    out[static_cast<std::size_t>(c)] = xs.col(c).maxCoeff() - xs.col(c).minCoeff();
  return out;
}

nlohmann::json to_json(const ImportanceReport& r) {
  nlohmann::json features = nlohmann::json::array();
  for (std::size_t i = 0; i < r.mean_delta.size(); ++i) {
    const bool sel = std::find(r.selected.begin(), r.selected.end(), i) != r.selected.end();
    features.push_back({{"name", i < r.feature_names.size() ? r.feature_names[i] : "x" + std::to_string(i)},
                        {"mean_delta_mse", r.mean_delta[i]},
                        {"sd_delta_mse", r.sd_delta[i]},
                        {"selected", sel}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : r.edges)
    edges.push_back({{"input", e.input},
                     {"output", e.output},
                     {"lengthscale", e.lengthscale},
                     {"range", e.range},
                     {"ratio", e.lengthscale / e.range},
                     {"label", to_string(e.label)}});
  return {{"baseline_mse", r.baseline_mse},
          {"repeats", r.repeats},
          {"seed", r.seed},
          {"tau", r.tau},
          {"features", features},
          {"selected", r.selected},
          {"edges", edges}};
}

}  // namespace svgpkan

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


#ifndef SVGPKAN_DISCOVERY_HPP_
#define SVGPKAN_DISCOVERY_HPP_

#include "svgpkan/model.hpp"

#include "json.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace svgpkan {

inline constexpr double kDefaultTau = 0.05;
inline constexpr std::size_t kDefaultRepeats = 10;
inline constexpr double kLinearRatio = 1.5;
inline constexpr double kHighFrequencyRatio = 0.25;

enum class EdgeClass { kLinear, kSmoothNonlinear, kHighFrequency };

const char* to_string(EdgeClass c);

struct EdgeLabel {
  std::size_t input = 0;
  std::size_t output = 0;
  double lengthscale = 0.0;
  double range = 0.0;
  EdgeClass label = EdgeClass::kSmoothNonlinear;
};

struct ImportanceReport {
  std::vector<std::string> feature_names;
  double baseline_mse = 0.0;
  std::vector<double> mean_delta;
  std::vector<double> sd_delta;
  std::size_t repeats = 0;
  std::uint64_t seed = 0;
  double tau = kDefaultTau;
  std::vector<std::size_t> selected;
  std::vector<EdgeLabel> edges;
};

// Mean and sample standard deviation over repeats of the test-MSE increase
// when one raw input column is permuted. Every (feature, repeat) pair draws
// its permutation from its own stream, so results do not depend on the
// order features are visited. identity forces the null permutation.
ImportanceReport permutation_importance(const Model& model, const Matrix& x_test,
                                        const Vector& y_test, std::size_t repeats,
                                        std::uint64_t seed, bool identity = false);

// Indices i with importance_i > tau * max_k importance_k.
std::vector<std::size_t> select_features(std::span<const double> importance, double tau = kDefaultTau);

// Fraction of trials selecting each of d features.
std::vector<double> selection_stability(const std::vector<std::vector<std::size_t>>& selections,
                                        std::size_t d);

EdgeClass classify_lengthscale(double lengthscale, double range);

// Labels for the first-layer edges; ranges[i] is the extent of feature i in
// the model's standardized input units.
std::vector<EdgeLabel> classify_edges(const Model& model, std::span<const double> ranges);

// max - min of each standardized feature column.
std::vector<double> standardized_ranges(const Model& model, const Matrix& x);

nlohmann::json to_json(const ImportanceReport& r);

}  // namespace svgpkan

#endif  // SVGPKAN_DISCOVERY_HPP_

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


#ifndef SVGPKAN_DATA_HPP_
#define SVGPKAN_DATA_HPP_

#include "svgpkan/numerics.hpp"

#include <Eigen/Dense>
#include "json.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace svgpkan {

using Vector = Eigen::VectorXd;

inline const double kExp1NoiseSd = std::sqrt(0.1);
inline constexpr double kExp2NoiseSd = 0.1;
inline constexpr double kFriedmanNoiseSd = 0.1;

struct Provenance {
  std::string generator;
  std::uint64_t seed = 0;
  double noise_sd = 0.0;
  double domain_lo = 0.0;
  double domain_hi = 0.0;
};

struct Dataset {
  Matrix x;
  Vector y;
  std::vector<std::string> feature_names;
  std::string target_name = "y";
  std::optional<Provenance> provenance;

  std::size_t size() const { return static_cast<std::size_t>(x.rows()); }
  std::size_t dims() const { return static_cast<std::size_t>(x.cols()); }
  Dataset subset(const std::vector<std::size_t>& rows) const;
};

double exp1_function(double x1, double x2);
double exp2_function(double x1, double x2);
// Uses the first five entries of x.
double friedman1_function(const double* x);

// Features are drawn column by column, each from its own stream, so a
// column's values do not depend on how many other columns exist.
Dataset gen_exp1(std::size_t n, double noise_sd, std::uint64_t seed);
Dataset gen_exp2(std::size_t n, double noise_sd, std::uint64_t seed, double lo = -1.0,
                 double hi = 1.0);
Dataset gen_friedman1(std::size_t n, std::size_t d, double noise_sd, std::uint64_t seed);

// Dataset by generator name: exp1, exp2 or friedman1. Throws
// std::invalid_argument on an unknown name.
Dataset generate(const std::string& name, std::size_t n, double noise_sd, std::uint64_t seed,
                 std::size_t d = 10);

std::pair<Dataset, Dataset> split(const Dataset& ds, double test_fraction, std::uint64_t seed);

struct Standardizer {
  Vector x_mean;
  Vector x_scale;
  double y_mean = 0.0;
  double y_scale = 1.0;

  static Standardizer fit(const Dataset& train);
  static Standardizer identity(std::size_t d);

  Matrix apply_x(const Matrix& x) const;
  Vector apply_y(const Vector& y) const;
  Matrix invert_x(const Matrix& x) const;
  Vector invert_y(const Vector& y) const;
  Dataset apply(const Dataset& ds) const;
};

class CsvError : public std::runtime_error {
 public:
  CsvError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Header row of feature names followed by the target column.
Dataset read_csv(std::istream& in);
Dataset read_csv(const std::filesystem::path& path);
void write_csv(std::ostream& out, const Dataset& ds);
void write_csv(const std::filesystem::path& path, const Dataset& ds);

// Generic table writer for plot data.
void write_table(const std::filesystem::path& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows);

// 17 significant digits.
std::string format_double(double v);

nlohmann::json to_json(const Provenance& p);
std::filesystem::path provenance_path(const std::filesystem::path& csv_path);

}  // namespace svgpkan

#endif  // SVGPKAN_DATA_HPP_

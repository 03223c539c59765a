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


#include "doctest.h"

#include "svgpkan/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

using svgpkan::Dataset;
using svgpkan::Matrix;
using svgpkan::Standardizer;

namespace {

double noise_variance(const Dataset& ds, double (*f)(const Dataset&, Eigen::Index)) {
  double s1 = 0.0, s2 = 0.0;
  for (Eigen::Index r = 0; r < ds.x.rows(); ++r) {
    const double e = ds.y(r) - f(ds, r);
    s1 += e;
    s2 += e * e;
  }
  const double n = static_cast<double>(ds.x.rows());
  return s2 / n - (s1 / n) * (s1 / n);
}

}  // namespace

TEST_CASE("noiseless target formulas") {
  CHECK(std::abs(svgpkan::exp1_function(1.0 / 6.0, 1.0) - 2.5) <= 1e-12);
  CHECK(svgpkan::exp1_function(0.0, 0.0) == 0.0);
  CHECK(std::abs(svgpkan::exp2_function(0.0, 0.0) - 1.0) <= 1e-12);
  CHECK(std::abs(svgpkan::exp2_function(0.5, 1.0)) <= 1e-12);
  for (double a : {-0.7, 0.1, 0.9})
    CHECK(std::abs((svgpkan::exp2_function(a, 0.3) - svgpkan::exp2_function(a, -0.4)) -
                   (svgpkan::exp2_function(0.0, 0.3) - svgpkan::exp2_function(0.0, -0.4))) <= 1e-12);
  const double half[5] = {0.5, 0.5, 0.5, 0.5, 0.5};
  CHECK(std::abs(svgpkan::friedman1_function(half) - 14.571067811865476) <= 1e-12);
  const double vertex[5] = {0.2, 0.9, 0.5, 0.0, 0.0};
  CHECK(std::abs(svgpkan::friedman1_function(vertex) - 10.0 * std::sin(std::numbers::pi * 0.18)) <=
        1e-12);
}

TEST_CASE("generators are pure functions of their arguments") {
  const Dataset a = svgpkan::gen_exp1(50, 0.3, 11);
  const Dataset b = svgpkan::gen_exp1(50, 0.3, 11);
  const Dataset c = svgpkan::gen_exp1(50, 0.3, 12);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  CHECK(a.x != c.x);
  CHECK(a.dims() == 3);
  CHECK(a.feature_names == std::vector<std::string>{"x1", "x2", "x3"});
  CHECK(a.x.minCoeff() >= -1.0);
  CHECK(a.x.maxCoeff() < 1.0);
  REQUIRE(a.provenance.has_value());
  CHECK(a.provenance->generator == "exp1");

  const Dataset f = svgpkan::generate("friedman1", 40, 0.1, 3);
  CHECK(f.dims() == 10);
  CHECK(f.feature_names.front() == "x0");
  CHECK(f.x.minCoeff() >= 0.0);
  CHECK(f.x.maxCoeff() < 1.0);
  CHECK_THROWS_AS(svgpkan::generate("nope", 10, 0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(svgpkan::gen_friedman1(10, 4, 0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(svgpkan::gen_exp1(0, 0.1, 1), std::invalid_argument);
}

TEST_CASE("irrelevant Friedman columns do not move the target") {
  const Dataset a = svgpkan::gen_friedman1(200, 10, 0.0, 5);
  const Dataset b = svgpkan::gen_friedman1(200, 5, 0.0, 5);
  CHECK(a.x.leftCols(5) == b.x);
  CHECK(a.y == b.y);
  Matrix regenerated = a.x;
  regenerated.rightCols(5) = svgpkan::gen_friedman1(200, 10, 0.0, 6).x.rightCols(5);
  for (Eigen::Index r = 0; r < regenerated.rows(); ++r) {
    const Eigen::RowVectorXd row = regenerated.row(r);
    CHECK(svgpkan::friedman1_function(row.data()) == a.y(r));
  }
}

TEST_CASE("empirical noise variance matches the configuration") {
  const Dataset e1 = svgpkan::gen_exp1(100000, svgpkan::kExp1NoiseSd, 21);
  const double v1 = noise_variance(e1, [](const Dataset& d, Eigen::Index r) {
    return svgpkan::exp1_function(d.x(r, 0), d.x(r, 1));
  });
  CHECK(std::abs(v1 / 0.1 - 1.0) <= 0.05);

  const Dataset e2 = svgpkan::gen_exp2(100000, 0.1, 22);
  const double v2 = noise_variance(e2, [](const Dataset& d, Eigen::Index r) {
    return svgpkan::exp2_function(d.x(r, 0), d.x(r, 1));
  });
  CHECK(std::abs(v2 / 0.01 - 1.0) <= 0.05);

  const Dataset f = svgpkan::gen_friedman1(100000, 10, 0.1, 23);
  const double v3 = noise_variance(f, [](const Dataset& d, Eigen::Index r) {
    const Eigen::RowVectorXd row = d.x.row(r);
    return svgpkan::friedman1_function(row.data());
  });
  CHECK(std::abs(v3 / 0.01 - 1.0) <= 0.05);
}

TEST_CASE("exp2 domain override") {
  const Dataset d = svgpkan::gen_exp2(500, 0.0, 4, -1.5, 1.5);
  CHECK(d.x.minCoeff() >= -1.5);
  CHECK(d.x.maxCoeff() < 1.5);
  CHECK(d.x.cwiseAbs().maxCoeff() > 1.0);
  CHECK_THROWS_AS(svgpkan::gen_exp2(10, 0.1, 1, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("split partitions the rows") {
  Dataset ds = svgpkan::gen_exp1(10, 0.0, 1);
  for (Eigen::Index r = 0; r < 10; ++r) ds.y(r) = static_cast<double>(r);
  const auto [train, test] = svgpkan::split(ds, 0.2, 7);
  CHECK(train.size() == 8);
  CHECK(test.size() == 2);
  std::set<double> seen;
  for (Eigen::Index r = 0; r < train.y.size(); ++r) seen.insert(train.y(r));
  for (Eigen::Index r = 0; r < test.y.size(); ++r) seen.insert(test.y(r));
  CHECK(seen.size() == 10);
  CHECK(*seen.begin() == 0.0);
  CHECK(*seen.rbegin() == 9.0);

  const auto again = svgpkan::split(ds, 0.2, 7);
  CHECK(again.first.y == train.y);
  CHECK(again.second.y == test.y);
  CHECK_THROWS_AS(svgpkan::split(ds, 0.0, 7), std::invalid_argument);
  CHECK_THROWS_AS(svgpkan::split(ds, 0.01, 7), std::invalid_argument);
  CHECK_THROWS_AS(svgpkan::split(ds, 0.99, 7), std::invalid_argument);
}

TEST_CASE("standardizer moments and round trip") {
  Dataset ds = svgpkan::gen_friedman1(300, 6, 0.1, 9);
  ds.x.col(5).setConstant(3.0);
  const Standardizer s = Standardizer::fit(ds);
  CHECK(s.x_scale(5) == 1.0);
  const Dataset z = s.apply(ds);
  for (Eigen::Index c = 0; c < z.x.cols(); ++c) {
    const double mean = z.x.col(c).mean();
    CHECK(std::abs(mean) <= 1e-10);
    if (c < 5) {
      const double sd = std::sqrt((z.x.col(c).array() - mean).square().mean());
      CHECK(std::abs(sd - 1.0) <= 1e-10);
    }
  }
  CHECK(z.x.col(5).cwiseAbs().maxCoeff() == 0.0);
  CHECK(std::abs(z.y.mean()) <= 1e-10);
  CHECK((s.invert_x(z.x) - ds.x).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + ds.x.cwiseAbs().maxCoeff()));
  CHECK((s.invert_y(z.y) - ds.y).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + ds.y.cwiseAbs().maxCoeff()));
  CHECK((s.apply_x(s.invert_x(z.x)) - z.x).cwiseAbs().maxCoeff() <= 1e-12);

  const Dataset test = s.apply(svgpkan::gen_friedman1(50, 6, 0.1, 10));
  CHECK(test.x.allFinite());
  CHECK_THROWS_AS(s.apply_x(Matrix::Zero(2, 3)), svgpkan::DimensionMismatch);

  const Standardizer id = Standardizer::identity(3);
  CHECK(id.apply_x(ds.x.leftCols(3)) == ds.x.leftCols(3));
}

TEST_CASE("CSV round trip is exact") {
  Dataset ds = svgpkan::gen_exp2(25, 0.1, 13);
  ds.x(0, 0) = 1e-300;
  ds.y(1) = -123456789.123456789;
  ds.feature_names = {"plain", "with,comma \"quoted\""};
  std::stringstream buf;
  svgpkan::write_csv(buf, ds);
  const Dataset back = svgpkan::read_csv(buf);
  CHECK(back.feature_names == ds.feature_names);
  CHECK(back.target_name == "y");
  CHECK(back.x == ds.x);
  CHECK(back.y == ds.y);
  CHECK(svgpkan::format_double(0.1) == "0.10000000000000001");
}

TEST_CASE("CSV parsing accepts quoting and scientific notation") {
  std::istringstream in("\"a\",b,target\r\n1e-3,\"2.5E+2\",-3\n\n4,5,6\n");
  const Dataset ds = svgpkan::read_csv(in);
  REQUIRE(ds.size() == 2);
  CHECK(ds.x(0, 0) == 1e-3);
  CHECK(ds.x(0, 1) == 250.0);
  CHECK(ds.y(0) == -3.0);
  CHECK(ds.y(1) == 6.0);

  std::istringstream header_only("x,y\n");
  CHECK(svgpkan::read_csv(header_only).size() == 0);
}

TEST_CASE("malformed CSV reports the line") {
  auto line_of = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      (void)svgpkan::read_csv(in);
    } catch (const svgpkan::CsvError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("") == 1);
  CHECK(line_of("only\n1\n") == 1);
  CHECK(line_of("a,y\n1,2\n3\n") == 3);
  CHECK(line_of("a,y\n1,2\n3,abc\n") == 3);
  CHECK(line_of("a,y\n1,2\n\"3,4\n") == 3);
  CHECK(line_of("a,y\n1,nan\n") == 2);
}

TEST_CASE("files and provenance sidecar path") {
  const auto dir = std::filesystem::temp_directory_path() / "svgpkan_test_data";
  std::filesystem::create_directories(dir);
  const Dataset ds = svgpkan::gen_exp1(12, 0.1, 3);
  svgpkan::write_csv(dir / "d.csv", ds);
  const Dataset back = svgpkan::read_csv(dir / "d.csv");
  CHECK(back.x == ds.x);
  CHECK(svgpkan::provenance_path(dir / "d.csv") == dir / "d.provenance.json");
  const auto j = svgpkan::to_json(*ds.provenance);
  CHECK(j.at("generator") == "exp1");
  CHECK(j.at("seed") == 3);
  CHECK_THROWS(svgpkan::read_csv(dir / "missing.csv"));
  std::filesystem::remove_all(dir);
}

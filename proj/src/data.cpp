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


#include "svgpkan/data.hpp"

#include "svgpkan/rng.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace svgpkan {

namespace {

constexpr std::uint64_t kNoiseStream = 0x6e6f697365ULL;
constexpr std::uint64_t kSplitStream = 0x73706c6974ULL;

Dataset sample_uniform(std::size_t n, std::size_t d, double lo, double hi, std::uint64_t seed,
                       const std::string& prefix, int first_index) {
  Dataset ds;
  ds.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t c = 0; c < d; ++c) {
    Rng rng(seed, c + 1);
    for (std::size_t r = 0; r < n; ++r)
      ds.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rng.uniform(lo, hi);
    ds.feature_names.push_back(prefix + std::to_string(first_index + static_cast<int>(c)));
  }
  ds.y.resize(static_cast<Eigen::Index>(n));
  return ds;
}

void add_noise(Dataset& ds, double noise_sd, std::uint64_t seed) {
  if (!(noise_sd >= 0.0)) throw std::invalid_argument("noise sd must be nonnegative");
  if (noise_sd == 0.0) return;
  Rng rng(seed, kNoiseStream);
  for (Eigen::Index r = 0; r < ds.y.size(); ++r) ds.y(r) += noise_sd * rng.normal();
}

void require_rows(std::size_t n) {
  if (n == 0) throw std::invalid_argument("dataset size must be at least 1");
}

}  // namespace

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.feature_names = feature_names;
  out.target_name = target_name;
  out.provenance = provenance;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.x.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(rows[r]));
    out.y(static_cast<Eigen::Index>(r)) = y(static_cast<Eigen::Index>(rows[r]));
  }
  return out;
}

double exp1_function(double x1, double x2) {
  return std::sin(3.0 * std::numbers::pi * x1) + 1.5 * x2;
}

double exp2_function(double x1, double x2) {
  return std::sin(std::numbers::pi * x1) + std::cos(std::numbers::pi * x2);
}

double friedman1_function(const double* x) {
  const double q = x[2] - 0.5;
  return 10.0 * std::sin(std::numbers::pi * x[0] * x[1]) + 20.0 * q * q + 10.0 * x[3] +
         5.0 * x[4];
}

Dataset gen_exp1(std::size_t n, double noise_sd, std::uint64_t seed) {
  require_rows(n);
  Dataset ds = sample_uniform(n, 3, -1.0, 1.0, seed, "x", 1);
  for (Eigen::Index r = 0; r < ds.x.rows(); ++r) ds.y(r) = exp1_function(ds.x(r, 0), ds.x(r, 1));
  add_noise(ds, noise_sd, seed);
  ds.provenance = Provenance{"exp1", seed, noise_sd, -1.0, 1.0};
  return ds;
}

Dataset gen_exp2(std::size_t n, double noise_sd, std::uint64_t seed, double lo, double hi) {
  require_rows(n);
  if (!(lo < hi)) throw std::invalid_argument("gen_exp2: empty domain");
  Dataset ds = sample_uniform(n, 2, lo, hi, seed, "x", 1);
  for (Eigen::Index r = 0; r < ds.x.rows(); ++r) ds.y(r) = exp2_function(ds.x(r, 0), ds.x(r, 1));
  add_noise(ds, noise_sd, seed);
  ds.provenance = Provenance{"exp2", seed, noise_sd, lo, hi};
  return ds;
}

Dataset gen_friedman1(std::size_t n, std::size_t d, double noise_sd, std::uint64_t seed) {
  require_rows(n);
  if (d < 5) throw std::invalid_argument("gen_friedman1: needs at least 5 features");
  Dataset ds = sample_uniform(n, d, 0.0, 1.0, seed, "x", 0);
  for (Eigen::Index r = 0; r < ds.x.rows(); ++r) {
    const Eigen::RowVectorXd row = ds.x.row(r);
    ds.y(r) = friedman1_function(row.data());
  }
  add_noise(ds, noise_sd, seed);
  ds.provenance = Provenance{"friedman1", seed, noise_sd, 0.0, 1.0};
  return ds;
}

Dataset generate(const std::string& name, std::size_t n, double noise_sd, std::uint64_t seed,
                 std::size_t d) {
  if (name == "exp1") return gen_exp1(n, noise_sd, seed);
  if (name == "exp2") return gen_exp2(n, noise_sd, seed);
  if (name == "friedman1") return gen_friedman1(n, d, noise_sd, seed);
  throw std::invalid_argument("unknown dataset '" + name + "' (expected exp1, exp2 or friedman1)");
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("split: test fraction must lie in (0, 1)");
  const std::size_t n = ds.size();
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  if (n_test == 0 || n_test >= n) throw std::invalid_argument("split: empty partition");
  Rng rng(seed, kSplitStream);
  const std::vector<std::size_t> perm = rng.permutation(n);
  std::vector<std::size_t> test(perm.begin(), perm.begin() + static_cast<long>(n_test));
  std::vector<std::size_t> train(perm.begin() + static_cast<long>(n_test), perm.end());
  return {ds.subset(train), ds.subset(test)};
}

Standardizer Standardizer::fit(const Dataset& train) {
  if (train.size() == 0) throw std::invalid_argument("Standardizer::fit: empty dataset");
  const double n = static_cast<double>(train.size());
  Standardizer s;
  s.x_mean = train.x.colwise().mean().transpose();
  s.x_scale.resize(train.x.cols());
  for (Eigen::Index c = 0; c < train.x.cols(); ++c) {
    const double var = (train.x.col(c).array() - s.x_mean(c)).square().sum() / n;
    s.x_scale(c) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  s.y_mean = train.y.mean();
  const double vy = (train.y.array() - s.y_mean).square().sum() / n;
  s.y_scale = vy > 0.0 ? std::sqrt(vy) : 1.0;
  return s;
}

Standardizer Standardizer::identity(std::size_t d) {
  Standardizer s;
  s.x_mean = Vector::Zero(static_cast<Eigen::Index>(d));
  s.x_scale = Vector::Ones(static_cast<Eigen::Index>(d));
  return s;
}

Matrix Standardizer::apply_x(const Matrix& x) const {
  if (x.cols() != x_mean.size()) throw DimensionMismatch("Standardizer: feature count mismatch");
  return ((x.rowwise() - x_mean.transpose()).array().rowwise() / x_scale.transpose().array())
      .matrix();
}

Vector Standardizer::apply_y(const Vector& y) const {
  return ((y.array() - y_mean) / y_scale).matrix();
}

Matrix Standardizer::invert_x(const Matrix& x) const {
  if (x.cols() != x_mean.size()) throw DimensionMismatch("Standardizer: feature count mismatch");
  return ((x.array().rowwise() * x_scale.transpose().array()).matrix().rowwise() +
          x_mean.transpose());
}

Vector Standardizer::invert_y(const Vector& y) const {
  return (y.array() * y_scale + y_mean).matrix();
}

Dataset Standardizer::apply(const Dataset& ds) const {
  Dataset out = ds;
  out.x = apply_x(ds.x);
  out.y = apply_y(ds.y);
  return out;
}

CsvError::CsvError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

namespace {

// One RFC 4180 record. Returns false at end of input. Quoted fields may
// contain separators, doubled quotes and line breaks; *line tracks the
// physical line number.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t* line) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  const std::size_t start = *line;
  while (true) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) {
      if (quoted) throw CsvError(start, "unterminated quoted field");
      fields.push_back(field);
      return true;
    }
    const char ch = static_cast<char>(c);
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get();
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        if (ch == '\n') ++*line;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"') {
      if (!field.empty() || was_quoted) throw CsvError(*line, "stray quote inside field");
      quoted = true;
      was_quoted = true;
    } else if (ch == ',') {
      fields.push_back(field);
      field.clear();
      was_quoted = false;
    } else if (ch == '\r') {
      if (in.peek() == '\n') in.get();
      ++*line;
      fields.push_back(field);
      return true;
    } else if (ch == '\n') {
      ++*line;
      fields.push_back(field);
      return true;
    } else {
      field.push_back(ch);
    }
  }
}

double parse_number(const std::string& s, std::size_t line, std::size_t column) {
  const char* begin = s.c_str();
  while (*begin == ' ' || *begin == '\t') ++begin;
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  while (end && (*end == ' ' || *end == '\t')) ++end;
  if (end == begin || *end != '\0' || errno == ERANGE || !std::isfinite(v))
    throw CsvError(line, "column " + std::to_string(column + 1) + ": not a finite number: '" + s +
                             "'");
  return v;
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Dataset read_csv(std::istream& in) {
  std::size_t line = 1;
  std::vector<std::string> header;
  if (!read_record(in, header, &line)) throw CsvError(1, "missing header row");
  if (header.size() < 2)
    throw CsvError(1, "header needs at least one feature column and a target column");
  Dataset ds;
  ds.feature_names.assign(header.begin(), header.end() - 1);
  ds.target_name = header.back();
  const std::size_t d = header.size() - 1;

  std::vector<std::vector<double>> rows;
  std::vector<std::string> fields;
  while (true) {
    const std::size_t row_line = line;
    if (!read_record(in, fields, &line)) break;
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != header.size())
      throw CsvError(row_line, "expected " + std::to_string(header.size()) + " fields, found " +
                                   std::to_string(fields.size()));
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) row[c] = parse_number(fields[c], row_line, c);
    rows.push_back(std::move(row));
  }
  ds.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  ds.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < d; ++c)
      ds.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    ds.y(static_cast<Eigen::Index>(r)) = rows[r][d];
  }
  return ds;
}

Dataset read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open " + path.string());
  return read_csv(in);
}

void write_csv(std::ostream& out, const Dataset& ds) {
  for (const auto& name : ds.feature_names) out << quote(name) << ',';
  out << quote(ds.target_name) << '\n';
  for (Eigen::Index r = 0; r < ds.x.rows(); ++r) {
    for (Eigen::Index c = 0; c < ds.x.cols(); ++c) out << format_double(ds.x(r, c)) << ',';
    out << format_double(ds.y(r)) << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write " + path.string());
  write_csv(out, ds);
  if (!out) throw std::ios_base::failure("write failed: " + path.string());
}

void write_table(const std::filesystem::path& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write " + path.string());
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << quote(header[c]);
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_double(row[c]);
    out << '\n';
  }
  if (!out) throw std::ios_base::failure("write failed: " + path.string());
}

nlohmann::json to_json(const Provenance& p) {
  return {{"generator", p.generator},
          {"seed", p.seed},
          {"noise_sd", p.noise_sd},
          {"domain", {p.domain_lo, p.domain_hi}},
          {"rng", "mt19937_64, splitmix64 stream derivation"}};
}

std::filesystem::path provenance_path(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  p.replace_extension(".provenance.json");
  return p;
}

}  // namespace svgpkan

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


#ifndef SVGPKAN_RNG_HPP_
#define SVGPKAN_RNG_HPP_

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace svgpkan {

// SplitMix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

// Seed of an independent stream: splitmix64(seed ^ splitmix64(stream)).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Seedable generator with reproducible output on every platform. The engine
// is std::mt19937_64 (its output sequence is fixed by the standard); the
// distributions below are implemented here because the standard library's
// are not.
//
//   uniform(): (next() >> 11) * 2^-53, in [0, 1)
//   normal():  Box-Muller on two uniforms, both outputs used in turn
//   shuffle(): Fisher-Yates from the last index down, bounded draws by
//              rejection
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace svgpkan

#endif  // SVGPKAN_RNG_HPP_

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

#include "svgpkan/parallel.hpp"

#include <atomic>
#include <cstdlib>

namespace svgpkan {
namespace {

int initial_limit() {
  const char* env = std::getenv("SVGPKAN_THREADS");
  if (env == nullptr) return 0;
  const int v = std::atoi(env);
  return v < 0 ? 0 : v;
}

std::atomic<int>& limit_slot() {
  static std::atomic<int> slot{initial_limit()};
  return slot;
}

}  // namespace

void set_thread_limit(int threads) { limit_slot().store(threads < 0 ? 0 : threads); }

int thread_limit() { return limit_slot().load(); }

}  // namespace svgpkan

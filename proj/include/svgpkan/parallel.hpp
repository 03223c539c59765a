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

#ifndef SVGPKAN_PARALLEL_HPP_
#define SVGPKAN_PARALLEL_HPP_

#include <cstddef>

#ifdef SVGPKAN_USE_OPENMP
#include <omp.h>
#endif

namespace svgpkan {

// Upper bound on worker threads for edge-wise kernels. 0 selects the
// runtime default. Initialized from SVGPKAN_THREADS on first use.
void set_thread_limit(int threads);
int thread_limit();

// Runs body(i) for i in [0, n). Each index must write only to its own
// output slot so results do not depend on the thread count.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
#ifdef SVGPKAN_USE_OPENMP
  const int threads = thread_limit();
  if (n > 1 && threads != 1) {
    const long count = static_cast<long>(n);
#pragma omp parallel for schedule(static) num_threads(threads > 0 ? threads : omp_get_max_threads())
    for (long i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
    return;
  }
#endif
  for (std::size_t i = 0; i < n; ++i) body(i);
}

}  // namespace svgpkan

#endif  // SVGPKAN_PARALLEL_HPP_

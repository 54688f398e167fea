// Copyright 2026 SpikeStream Contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <exception>

#include "spikestream/kernels.hpp"

namespace spikestream {

// Batch items are independent; exceptions are captured and rethrown after
// the region. Reductions over the results stay with the caller, in item
// order, so outputs do not depend on the thread count.
template <typename F>
void parallel_for_items(int64_t n, F&& fn) {
  const bool parallel = kernels::mode() == kernels::Mode::kOpenMP;
  std::exception_ptr err = nullptr;
#pragma omp parallel for schedule(static) if (parallel)
  for (int64_t i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
#pragma omp critical
      if (err == nullptr) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace spikestream

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

#include "spikestream/kernels.hpp"

#include <algorithm>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace spikestream::kernels {

namespace {
Mode g_mode = Mode::kOpenMP;
constexpr int64_t kSumChunk = 4096;
}  // namespace

void set_mode(Mode mode) { g_mode = mode; }
Mode mode() { return g_mode; }

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

// Each row of c is produced by exactly one thread, accumulating over k in
// index order, so the omp variant matches the serial one bit for bit.
void matmul_serial(const float* a, const float* b, float* c, int64_t m,
                   int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    std::fill(crow, crow + n, 0.0f);
    const float* arow = a + i * k;
    for (int64_t l = 0; l < k; ++l) {
      const float av = arow[l];
      const float* brow = b + l * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_omp(const float* a, const float* b, float* c, int64_t m, int64_t k,
                int64_t n) {
#pragma omp parallel for schedule(static) if (m * k * n > 8192)
  for (int64_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    std::fill(crow, crow + n, 0.0f);
    const float* arow = a + i * k;
    for (int64_t l = 0; l < k; ++l) {
      const float av = arow[l];
      const float* brow = b + l * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul(const float* a, const float* b, float* c, int64_t m, int64_t k,
            int64_t n) {
  if (g_mode == Mode::kOpenMP)
    matmul_omp(a, b, c, m, k, n);
  else
    matmul_serial(a, b, c, m, k, n);
}

void matmul_acc_abt_serial(const float* dc, const float* b, float* da,
                           int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const float* dcrow = dc + i * n;
    float* darow = da + i * k;
    for (int64_t j = 0; j < n; ++j) {
      const float dv = dcrow[j];
      for (int64_t l = 0; l < k; ++l) darow[l] += dv * b[l * n + j];
    }
  }
}

void matmul_acc_abt_omp(const float* dc, const float* b, float* da, int64_t m,
                        int64_t k, int64_t n) {
#pragma omp parallel for schedule(static) if (m * k * n > 8192)
  for (int64_t i = 0; i < m; ++i) {
    const float* dcrow = dc + i * n;
    float* darow = da + i * k;
    for (int64_t j = 0; j < n; ++j) {
      const float dv = dcrow[j];
      for (int64_t l = 0; l < k; ++l) darow[l] += dv * b[l * n + j];
    }
  }
}

void matmul_acc_abt(const float* dc, const float* b, float* da, int64_t m,
                    int64_t k, int64_t n) {
  if (g_mode == Mode::kOpenMP)
    matmul_acc_abt_omp(dc, b, da, m, k, n);
  else
    matmul_acc_abt_serial(dc, b, da, m, k, n);
}

void matmul_acc_atb_serial(const float* a, const float* dc, float* db,
                           int64_t m, int64_t k, int64_t n) {
  for (int64_t l = 0; l < k; ++l) {
    float* dbrow = db + l * n;
    for (int64_t i = 0; i < m; ++i) {
      const float av = a[i * k + l];
      const float* dcrow = dc + i * n;
      for (int64_t j = 0; j < n; ++j) dbrow[j] += av * dcrow[j];
    }
  }
}

void matmul_acc_atb_omp(const float* a, const float* dc, float* db, int64_t m,
                        int64_t k, int64_t n) {
#pragma omp parallel for schedule(static) if (m * k * n > 8192)
  for (int64_t l = 0; l < k; ++l) {
    float* dbrow = db + l * n;
    for (int64_t i = 0; i < m; ++i) {
      const float av = a[i * k + l];
      const float* dcrow = dc + i * n;
      for (int64_t j = 0; j < n; ++j) dbrow[j] += av * dcrow[j];
    }
  }
}

void matmul_acc_atb(const float* a, const float* dc, float* db, int64_t m,
                    int64_t k, int64_t n) {
  if (g_mode == Mode::kOpenMP)
    matmul_acc_atb_omp(a, dc, db, m, k, n);
  else
    matmul_acc_atb_serial(a, dc, db, m, k, n);
}

double sum_f64_serial(const float* x, int64_t n) {
  const int64_t chunks = (n + kSumChunk - 1) / kSumChunk;
  double total = 0.0;
  for (int64_t c = 0; c < chunks; ++c) {
    const int64_t lo = c * kSumChunk;
    const int64_t hi = std::min(n, lo + kSumChunk);
    double part = 0.0;
    for (int64_t i = lo; i < hi; ++i) part += static_cast<double>(x[i]);
    total += part;
  }
  return total;
}

double sum_f64_omp(const float* x, int64_t n) {
  const int64_t chunks = (n + kSumChunk - 1) / kSumChunk;
  if (chunks <= 1) return sum_f64_serial(x, n);
  std::vector<double> parts(static_cast<size_t>(chunks), 0.0);
#pragma omp parallel for schedule(static)
  for (int64_t c = 0; c < chunks; ++c) {
    const int64_t lo = c * kSumChunk;
    const int64_t hi = std::min(n, lo + kSumChunk);
    double part = 0.0;
    for (int64_t i = lo; i < hi; ++i) part += static_cast<double>(x[i]);
    parts[static_cast<size_t>(c)] = part;
  }
  double total = 0.0;
  for (double p : parts) total += p;
  return total;
}

double sum_f64(const float* x, int64_t n) {
  if (g_mode == Mode::kOpenMP) return sum_f64_omp(x, n);
  return sum_f64_serial(x, n);
}

}  // namespace spikestream::kernels

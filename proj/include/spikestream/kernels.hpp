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

namespace spikestream::kernels {

// Every kernel has a serial reference and an OpenMP variant. Both walk each
// output element with the same per-element accumulation order, so results are
// bit-identical regardless of mode or thread count. The serial path stays as
// the reference the tests compare against.
enum class Mode { kSerial, kOpenMP };

void set_mode(Mode mode);
Mode mode();
int max_threads();
void set_threads(int n);  // 0 keeps the OpenMP default

// c = a(m x k) * b(k x n), row-major, c overwritten.
void matmul(const float* a, const float* b, float* c, int64_t m, int64_t k,
            int64_t n);
void matmul_serial(const float* a, const float* b, float* c, int64_t m,
                   int64_t k, int64_t n);
void matmul_omp(const float* a, const float* b, float* c, int64_t m, int64_t k,
                int64_t n);

// da(m x k) += dc(m x n) * b(k x n)^T   -- reverse-mode lhs accumulation
void matmul_acc_abt(const float* dc, const float* b, float* da, int64_t m,
                    int64_t k, int64_t n);
void matmul_acc_abt_serial(const float* dc, const float* b, float* da,
                           int64_t m, int64_t k, int64_t n);
void matmul_acc_abt_omp(const float* dc, const float* b, float* da, int64_t m,
                        int64_t k, int64_t n);

// db(k x n) += a(m x k)^T * dc(m x n)   -- reverse-mode rhs accumulation
void matmul_acc_atb(const float* a, const float* dc, float* db, int64_t m,
                    int64_t k, int64_t n);
void matmul_acc_atb_serial(const float* a, const float* dc, float* db,
                           int64_t m, int64_t k, int64_t n);
void matmul_acc_atb_omp(const float* a, const float* dc, float* db, int64_t m,
                        int64_t k, int64_t n);

// Deterministic sum: fixed 4096-element chunks, double partials, chunks
// combined in index order. Same bits in both modes.
double sum_f64(const float* x, int64_t n);
double sum_f64_serial(const float* x, int64_t n);
double sum_f64_omp(const float* x, int64_t n);

}  // namespace spikestream::kernels

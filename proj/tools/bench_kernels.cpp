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

// Serial reference vs OpenMP kernels, plus the LIF sweep they feed.

#include <benchmark/benchmark.h>

#include <vector>

#include "spikestream/kernels.hpp"
#include "spikestream/lif.hpp"
#include "spikestream/rng.hpp"
#include "spikestream/tensor.hpp"

using namespace spikestream;

namespace {

std::vector<float> random_buf(int64_t n, uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(static_cast<size_t>(n));
  for (float& x : v) x = rng.uniform(-1.0f, 1.0f);
  return v;
}

void BM_MatmulSerial(benchmark::State& state) {
  const int64_t n = state.range(0);
  const auto a = random_buf(n * n, 1);
  const auto b = random_buf(n * n, 2);
  std::vector<float> c(static_cast<size_t>(n * n));
  for (auto _ : state) {
    kernels::matmul_serial(a.data(), b.data(), c.data(), n, n, n);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * n * n * n);
}

void BM_MatmulOmp(benchmark::State& state) {
  const int64_t n = state.range(0);
  const auto a = random_buf(n * n, 1);
  const auto b = random_buf(n * n, 2);
  std::vector<float> c(static_cast<size_t>(n * n));
  for (auto _ : state) {
    kernels::matmul_omp(a.data(), b.data(), c.data(), n, n, n);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * n * n * n);
}

void BM_MatmulBackwardSerial(benchmark::State& state) {
  const int64_t n = state.range(0);
  const auto dc = random_buf(n * n, 3);
  const auto b = random_buf(n * n, 4);
  std::vector<float> da(static_cast<size_t>(n * n), 0.0f);
  for (auto _ : state) {
    kernels::matmul_acc_abt_serial(dc.data(), b.data(), da.data(), n, n, n);
    benchmark::ClobberMemory();
  }
}

void BM_MatmulBackwardOmp(benchmark::State& state) {
  const int64_t n = state.range(0);
  const auto dc = random_buf(n * n, 3);
  const auto b = random_buf(n * n, 4);
  std::vector<float> da(static_cast<size_t>(n * n), 0.0f);
  for (auto _ : state) {
    kernels::matmul_acc_abt_omp(dc.data(), b.data(), da.data(), n, n, n);
    benchmark::ClobberMemory();
  }
}

void BM_SumSerial(benchmark::State& state) {
  const auto x = random_buf(state.range(0), 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::sum_f64_serial(x.data(), state.range(0)));
  }
}

void BM_SumOmp(benchmark::State& state) {
  const auto x = random_buf(state.range(0), 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::sum_f64_omp(x.data(), state.range(0)));
  }
}

void bench_encode(benchmark::State& state, kernels::Mode mode) {
  kernels::set_mode(mode);
  LifParams p;
  Rng rng(6);
  const Tensor x = Tensor::uniform({state.range(0)}, -1.0f, 1.5f, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(encode_constant(x, 4, p));
  }
  kernels::set_mode(kernels::Mode::kOpenMP);
}

void BM_LifEncodeSerial(benchmark::State& state) {
  bench_encode(state, kernels::Mode::kSerial);
}

void BM_LifEncodeOmp(benchmark::State& state) {
  bench_encode(state, kernels::Mode::kOpenMP);
}

}  // namespace

BENCHMARK(BM_MatmulSerial)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_MatmulOmp)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_MatmulBackwardSerial)->Arg(128)->Arg(256);
BENCHMARK(BM_MatmulBackwardOmp)->Arg(128)->Arg(256);
BENCHMARK(BM_SumSerial)->Arg(1 << 20);
BENCHMARK(BM_SumOmp)->Arg(1 << 20);
BENCHMARK(BM_LifEncodeSerial)->Arg(1 << 16);
BENCHMARK(BM_LifEncodeOmp)->Arg(1 << 16);

BENCHMARK_MAIN();

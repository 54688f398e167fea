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
#include <vector>

#include "spikestream/graph.hpp"
#include "spikestream/tensor.hpp"

namespace spikestream {

// First-order leaky integrate-and-fire dynamics with soft reset:
//   U_t = I_t + decay * U_{t-1} - S_{t-1} * threshold
//   S_t = 1 iff U_t >= threshold
// The reset term is not scaled by the decay, and the potential may go
// negative; both follow from the update rule as written.

struct LifParams {
  float threshold = 1.0f;
  float decay = 0.9f;           // in (0, 1]
  float surrogate_alpha = 1.0f; // triangle half-width

  void validate() const;
};

struct LifState {
  Tensor membrane;     // U_{t-1}, one per neuron
  Tensor prev_spikes;  // S_{t-1}, entries in {0,1}

  static LifState zeros(const std::vector<int64_t>& shape);
};

// Binary activation train with a leading time axis of length time_steps.
struct SpikeTensor {
  int64_t time_steps = 0;
  Tensor values;  // shape [T, ...], every entry exactly 0.0f or 1.0f

  std::vector<int64_t> element_shape() const;
  int64_t slots_per_step() const;
  Tensor slice(int64_t t) const;
};

// Triangle surrogate: grad(u) = max(0, 1 - |u - thr|/alpha) / alpha, and the
// piecewise-quadratic ramp whose exact derivative it is (used for the relaxed
// forward in gradient checks).
float triangle_surrogate(float membrane, float threshold, float alpha);
float triangle_relaxed(float membrane, float threshold, float alpha);

// Registers the triangle pair as the graph's spike derivative. Idempotent.
void install_triangle_surrogate();

// One update of the dynamics above. `state` is advanced in place and the
// emitted spikes are returned.
Tensor lif_step(const Tensor& input_current, LifState& state,
                const LifParams& params);

// Constant-current coding: the value is replicated over T steps and the
// update rule is applied from an all-zero state with unit input weight.
// Used for normalized pixels and for pre-trained word embeddings alike.
SpikeTensor encode_constant(const Tensor& x, int64_t time_steps,
                            const LifParams& params);

struct ImageU8 {
  int64_t height = 0;
  int64_t width = 0;
  int64_t channels = 0;
  std::vector<uint8_t> data;  // H x W x C row-major
};

// Bilinear resize to (out_h, out_w), then (v/255 - mean_c) / std_c per
// channel. Returns a [C, out_h, out_w] tensor.
Tensor normalize_image(const ImageU8& img, const std::vector<float>& mean,
                       const std::vector<float>& stddev, int64_t out_h,
                       int64_t out_w);

/**
 * Stateful LIF stage inside an autodiff graph: holds the membrane and
 * previous-spike handles across time steps so backward unrolls through the
 * full recurrence. Arithmetic matches lif_step bit for bit, including the
 * explicit zero-state terms of the first step.
 */
class GraphLifCell {
 public:
  GraphLifCell(Graph& graph, std::vector<int64_t> shape, LifParams params);

  Var step(Var input_current);

 private:
  Graph* graph_;
  LifParams params_;
  Var membrane_;
  Var spikes_;
};

namespace instrumentation {

// Process-wide count of spike-tensor entries observed outside {0,1}.
int64_t binarity_violations();
void reset_binarity_violations();

}  // namespace instrumentation

// Scans a supposed spike tensor; counts violations and returns whether the
// tensor is clean. Exact comparison: spikes are written as 0.0f or 1.0f.
bool check_binary(const Tensor& t, const char* where);

}  // namespace spikestream

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

#include "spikestream/lif.hpp"

#include <atomic>
#include <cmath>
#include <string>

#include "spikestream/error.hpp"

namespace spikestream {

void LifParams::validate() const {
  if (!(threshold > 0.0f))
    throw contract_error("lif threshold must be positive");
  if (!(decay > 0.0f && decay <= 1.0f))
    throw contract_error("lif decay must lie in (0, 1]");
  if (!(surrogate_alpha > 0.0f))
    throw contract_error("surrogate width must be positive");
}

LifState LifState::zeros(const std::vector<int64_t>& shape) {
  LifState s;
  s.membrane = Tensor::zeros(shape);
  s.prev_spikes = Tensor::zeros(shape);
  return s;
}

std::vector<int64_t> SpikeTensor::element_shape() const {
  return std::vector<int64_t>(values.shape.begin() + 1, values.shape.end());
}

int64_t SpikeTensor::slots_per_step() const {
  return time_steps > 0 ? values.numel() / time_steps : 0;
}

Tensor SpikeTensor::slice(int64_t t) const {
  if (t < 0 || t >= time_steps)
    throw dimension_error("spike train slice " + std::to_string(t) +
                          " out of range");
  const int64_t n = slots_per_step();
  Tensor out = Tensor::zeros(element_shape());
  const float* src = values.data.data() + t * n;
  for (int64_t i = 0; i < n; ++i) out.data[i] = src[i];
  return out;
}

float triangle_surrogate(float membrane, float threshold, float alpha) {
  const float d = std::fabs(membrane - threshold);
  if (d >= alpha) return 0.0f;
  return (1.0f - d / alpha) / alpha;
}

float triangle_relaxed(float membrane, float threshold, float alpha) {
  if (membrane <= threshold - alpha) return 0.0f;
  if (membrane >= threshold + alpha) return 1.0f;
  if (membrane <= threshold) {
    const float s = (membrane - (threshold - alpha)) / alpha;
    return 0.5f * s * s;
  }
  const float r = ((threshold + alpha) - membrane) / alpha;
  return 1.0f - 0.5f * r * r;
}

void install_triangle_surrogate() {
  if (!spike_surrogate_registered())
    set_spike_surrogate({triangle_surrogate, triangle_relaxed});
}

Tensor lif_step(const Tensor& input_current, LifState& state,
                const LifParams& params) {
  params.validate();
  if (!input_current.same_shape(state.membrane))
    throw dimension_error("lif input " + input_current.shape_str() +
                          " does not match state " +
                          state.membrane.shape_str());
  check_finite(input_current, "lif_step");

  const int64_t n = input_current.numel();
  Tensor spikes = Tensor::zeros(input_current.shape);
  for (int64_t i = 0; i < n; ++i) {
    const float decayed = params.decay * state.membrane.data[i];
    const float charged = input_current.data[i] + decayed;
    const float reset = state.prev_spikes.data[i] * params.threshold;
    const float u = charged - reset;
    state.membrane.data[i] = u;
    spikes.data[i] = u >= params.threshold ? 1.0f : 0.0f;
  }
  state.prev_spikes = spikes;
  return spikes;
}

SpikeTensor encode_constant(const Tensor& x, int64_t time_steps,
                            const LifParams& params) {
  if (time_steps <= 0)
    throw contract_error("encode_constant needs a positive step count");
  check_finite(x, "encode_constant");

  LifState state = LifState::zeros(x.shape);
  std::vector<int64_t> shape;
  shape.push_back(time_steps);
  shape.insert(shape.end(), x.shape.begin(), x.shape.end());

  SpikeTensor train;
  train.time_steps = time_steps;
  train.values = Tensor::zeros(shape);
  const int64_t n = x.numel();
  for (int64_t t = 0; t < time_steps; ++t) {
    const Tensor spikes = lif_step(x, state, params);
    float* dst = train.values.data.data() + t * n;
    for (int64_t i = 0; i < n; ++i) dst[i] = spikes.data[i];
  }
  check_binary(train.values, "encode_constant");
  return train;
}

Tensor normalize_image(const ImageU8& img, const std::vector<float>& mean,
                       const std::vector<float>& stddev, int64_t out_h,
                       int64_t out_w) {
  if (img.height <= 0 || img.width <= 0 || img.channels <= 0)
    throw dimension_error("image dimensions must be positive");
  if (static_cast<int64_t>(img.data.size()) !=
      img.height * img.width * img.channels)
    throw dimension_error("image buffer does not match its dimensions");
  if (static_cast<int64_t>(mean.size()) != img.channels ||
      static_cast<int64_t>(stddev.size()) != img.channels)
    throw dimension_error("per-channel mean/std count must equal channels");
  for (float s : stddev)
    if (!(s > 0.0f)) throw domain_error("channel std must be positive");
  if (out_h <= 0 || out_w <= 0)
    throw dimension_error("target size must be positive");

  Tensor out = Tensor::zeros({img.channels, out_h, out_w});
  const double sy = static_cast<double>(img.height) / out_h;
  const double sx = static_cast<double>(img.width) / out_w;
  for (int64_t y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    if (fy < 0.0) fy = 0.0;
    int64_t y0 = static_cast<int64_t>(fy);
    if (y0 > img.height - 1) y0 = img.height - 1;
    const int64_t y1 = y0 + 1 < img.height ? y0 + 1 : y0;
    const float wy = static_cast<float>(fy - y0);
    for (int64_t x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      if (fx < 0.0) fx = 0.0;
      int64_t x0 = static_cast<int64_t>(fx);
      if (x0 > img.width - 1) x0 = img.width - 1;
      const int64_t x1 = x0 + 1 < img.width ? x0 + 1 : x0;
      const float wx = static_cast<float>(fx - x0);
      for (int64_t c = 0; c < img.channels; ++c) {
        const auto px = [&](int64_t yy, int64_t xx) {
          return static_cast<float>(
              img.data[(yy * img.width + xx) * img.channels + c]);
        };
        const float top = px(y0, x0) + wx * (px(y0, x1) - px(y0, x0));
        const float bot = px(y1, x0) + wx * (px(y1, x1) - px(y1, x0));
        const float v = top + wy * (bot - top);
        out.data[(c * out_h + y) * out_w + x] =
            (v / 255.0f - mean[c]) / stddev[c];
      }
    }
  }
  return out;
}

GraphLifCell::GraphLifCell(Graph& graph, std::vector<int64_t> shape,
                           LifParams params)
    : graph_(&graph), params_(params) {
  params_.validate();
  install_triangle_surrogate();
  membrane_ = graph_->constant(Tensor::zeros(shape));
  spikes_ = graph_->constant(Tensor::zeros(std::move(shape)));
}

Var GraphLifCell::step(Var input_current) {
  Graph& g = *graph_;
  Var charged = g.add(input_current, g.scale(membrane_, params_.decay));
  Var u = g.sub(charged, g.scale(spikes_, params_.threshold));
  Var s = g.spike(u, params_.threshold, params_.surrogate_alpha);
  membrane_ = u;
  spikes_ = s;
  return s;
}

namespace instrumentation {

namespace {
std::atomic<int64_t> g_binarity_violations{0};
}

int64_t binarity_violations() { return g_binarity_violations.load(); }
void reset_binarity_violations() { g_binarity_violations.store(0); }

void record_binarity_violations(int64_t count) {
  if (count > 0) g_binarity_violations.fetch_add(count);
}

}  // namespace instrumentation

bool check_binary(const Tensor& t, const char* where) {
  int64_t bad = 0;
  for (float v : t.data)
    if (v != 0.0f && v != 1.0f) ++bad;
  if (bad > 0) {
    instrumentation::record_binarity_violations(bad);
    (void)where;
  }
  return bad == 0;
}

}  // namespace spikestream

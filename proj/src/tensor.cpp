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

#include "spikestream/tensor.hpp"

#include <cmath>
#include <sstream>

#include "spikestream/error.hpp"
#include "spikestream/rng.hpp"

namespace spikestream {

int64_t shape_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t e : shape) {
    if (e <= 0) throw dimension_error("tensor extents must be positive");
    n *= e;
  }
  return n;
}

Tensor::Tensor(std::vector<int64_t> shape_in, std::vector<float> data_in)
    : shape(std::move(shape_in)), data(std::move(data_in)) {
  if (shape_numel(shape) != static_cast<int64_t>(data.size()))
    throw dimension_error("tensor data length " + std::to_string(data.size()) +
                          " does not match shape " + shape_str());
}

Tensor Tensor::zeros(std::vector<int64_t> shape) {
  const int64_t n = shape_numel(shape);
  Tensor t;
  t.shape = std::move(shape);
  t.data.assign(static_cast<size_t>(n), 0.0f);
  return t;
}

Tensor Tensor::full(std::vector<int64_t> shape, float value) {
  Tensor t = zeros(std::move(shape));
  for (float& v : t.data) v = value;
  return t;
}

Tensor Tensor::scalar(float value) { return full({1}, value); }

Tensor Tensor::from(std::vector<int64_t> shape,
                    std::initializer_list<float> values) {
  return Tensor(std::move(shape), std::vector<float>(values));
}

Tensor Tensor::uniform(std::vector<int64_t> shape, float lo, float hi,
                       Rng& rng) {
  Tensor t = zeros(std::move(shape));
  for (float& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

int64_t Tensor::numel() const { return static_cast<int64_t>(data.size()); }

void Tensor::ensure_grad() {
  requires_grad = true;
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0f);
}

void Tensor::zero_grad() {
  if (requires_grad) grad.assign(data.size(), 0.0f);
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

void check_finite(const float* data, int64_t n, const char* what) {
  for (int64_t i = 0; i < n; ++i) {
    if (!std::isfinite(data[i]))
      throw numeric_error(std::string(what) +
                          " produced a non-finite value at index " +
                          std::to_string(i));
  }
}

void check_finite(const Tensor& t, const char* what) {
  check_finite(t.data.data(), t.numel(), what);
}

int64_t argmax(const Tensor& t) {
  if (t.numel() == 0) throw domain_error("argmax over an empty tensor");
  int64_t best = 0;
  for (int64_t i = 1; i < t.numel(); ++i) {
    if (t.data[static_cast<size_t>(i)] > t.data[static_cast<size_t>(best)])
      best = i;
  }
  return best;
}

}  // namespace spikestream

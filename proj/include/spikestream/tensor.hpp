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
#include <initializer_list>
#include <string>
#include <vector>

namespace spikestream {

class Rng;

/**
 * Dense row-major float32 tensor. Plain value type: copyable, movable, safe
 * to hand between threads. Gradients are accumulated additively into `grad`;
 * the owner zeroes them between steps.
 */
class Tensor {
 public:
  std::vector<int64_t> shape;
  std::vector<float> data;
  bool requires_grad = false;
  std::vector<float> grad;  // same length as data when requires_grad

  Tensor() = default;
  Tensor(std::vector<int64_t> shape_in, std::vector<float> data_in);

  static Tensor zeros(std::vector<int64_t> shape);
  static Tensor full(std::vector<int64_t> shape, float value);
  static Tensor scalar(float value);
  static Tensor from(std::vector<int64_t> shape,
                     std::initializer_list<float> values);
  static Tensor uniform(std::vector<int64_t> shape, float lo, float hi,
                        Rng& rng);

  int64_t numel() const;
  size_t rank() const { return shape.size(); }
  int64_t dim(size_t i) const { return shape[i]; }
  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool is_scalar() const { return numel() == 1; }

  void ensure_grad();
  void zero_grad();

  std::string shape_str() const;
};

int64_t shape_numel(const std::vector<int64_t>& shape);

// Throws a numeric error naming `what` if any element is NaN or Inf.
void check_finite(const Tensor& t, const char* what);
void check_finite(const float* data, int64_t n, const char* what);

// Index of the largest element (first on ties). Non-differentiable by
// construction: operates on values, never enters a graph.
int64_t argmax(const Tensor& t);

}  // namespace spikestream

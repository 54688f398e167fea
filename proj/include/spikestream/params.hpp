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

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "spikestream/tensor.hpp"

namespace spikestream {

class Config;

// Named parameters in a stable creation order. Tensors get stable addresses
// so graphs can hold leaf pointers and optimizers can update in place.
class ParamTable {
 public:
  Tensor& add(const std::string& name, Tensor init, bool trainable = true);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const;

  size_t size() const { return entries_.size(); }
  const std::string& name(size_t i) const { return entries_[i].first; }
  Tensor& tensor(size_t i) { return *entries_[i].second; }
  const Tensor& tensor(size_t i) const { return *entries_[i].second; }

  // Pointers to every parameter whose name starts with `prefix`.
  std::vector<Tensor*> with_prefix(const std::string& prefix);

  void zero_grads();

 private:
  std::vector<std::pair<std::string, std::unique_ptr<Tensor>>> entries_;
  std::unordered_map<std::string, size_t> index_;
};

// Plain SGD by default, adaptive moments when configured. Updates are
// serialized by the caller; a step with lr 0 leaves parameters bit-identical.
class Optimizer {
 public:
  Optimizer(std::vector<Tensor*> params, const Config& cfg);

  void step(double lr);
  void zero_grads();

 private:
  std::vector<Tensor*> params_;
  bool adam_ = false;
  float beta1_ = 0.9f;
  float beta2_ = 0.999f;
  float eps_ = 1e-8f;
  int64_t t_ = 0;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
};

}  // namespace spikestream

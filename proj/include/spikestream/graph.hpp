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

#include "spikestream/tensor.hpp"

namespace spikestream {

// Derivative used when backpropagating through the spike threshold, plus the
// matching relaxed forward (its antiderivative) for finite-difference checks.
// The formula is registered from the lif module; the graph only stores the
// hook.
struct SpikeSurrogate {
  float (*grad)(float membrane, float threshold, float alpha);
  float (*relaxed)(float membrane, float threshold, float alpha);
};

void set_spike_surrogate(const SpikeSurrogate& surrogate);
bool spike_surrogate_registered();
const SpikeSurrogate& spike_surrogate();

struct Var {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

/**
 * Reverse-mode tape. Nodes are recorded in forward execution order, which is
 * the topological order; backward visits them exactly once in reverse.
 * A Graph is confined to one thread for a forward/backward pair; disjoint
 * graphs may run concurrently.
 */
class Graph {
 public:
  explicit Graph(uint64_t seed = 0);
  ~Graph();
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) noexcept;
  Graph& operator=(Graph&&) noexcept;

  uint64_t seed() const { return seed_; }

  // Leaves reference caller-owned tensors; gradients flow back into
  // owner->grad for leaves with requires_grad set.
  Var leaf(Tensor* owner);
  Var constant(Tensor value);

  Var matmul(Var a, Var b);

  // Binary elementwise ops broadcast the rhs when it is a scalar or a
  // trailing suffix of the lhs shape.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);

  Var scale(Var a, float c);    // c * a
  Var offset(Var a, float c);   // a + c
  Var exp(Var a);
  Var log(Var a);  // domain error on non-positive input
  Var sqrt(Var a);

  Var sum(Var a);        // -> [1]
  Var mean(Var a);       // -> [1], backward distributes 1/n
  Var sum_axis0(Var a);  // 2-D [r x c] -> [c]
  Var mean_axis0(Var a);
  Var pick(Var a, int64_t index);  // -> [1]
  Var reshape(Var a, std::vector<int64_t> shape);
  Var transpose(Var a);  // 2-D

  // Heaviside threshold with surrogate backward. With relaxed mode on, the
  // forward is the surrogate's antiderivative ramp instead of the hard step
  // (used only by gradient checking).
  Var spike(Var membrane, float threshold, float alpha);

  void set_relaxed_spike(bool on) { relaxed_spike_ = on; }

  const Tensor& value(Var v) const;
  size_t size() const;

  // backward == backward_local + flush_leaf_grads(1). Use the split form
  // when many graphs run in parallel and the owner tensors are shared:
  // compute adjoints concurrently, then flush in a fixed serial order.
  void backward(Var loss);
  void backward_local(Var loss);
  void flush_leaf_grads(float scale = 1.0f);

  // Local adjoint of any node after backward_local; for tests.
  const std::vector<float>& adjoint(Var v) const;

 private:
  struct Node;
  Var push(Node node, const char* op_name);
  const Node& at(Var v) const;

  std::vector<Node> nodes_;
  uint64_t seed_ = 0;
  bool relaxed_spike_ = false;
  bool ran_backward_ = false;
};

}  // namespace spikestream

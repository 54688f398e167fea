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

#include "spikestream/graph.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "spikestream/error.hpp"
#include "spikestream/kernels.hpp"

namespace spikestream {

namespace {

SpikeSurrogate g_surrogate{nullptr, nullptr};

enum class OpKind : uint8_t {
  kLeaf,
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kScale,
  kOffset,
  kExp,
  kLog,
  kSqrt,
  kSumAll,
  kMeanAll,
  kSumAxis0,
  kMeanAxis0,
  kPick,
  kReshape,
  kTranspose,
  kSpike,
};

// Broadcast classes accepted for the rhs of binary elementwise ops.
enum class Bcast : uint8_t { kSame, kScalarRhs, kTrailingRhs };

Bcast classify_broadcast(const Tensor& a, const Tensor& b) {
  if (a.shape == b.shape) return Bcast::kSame;
  if (b.numel() == 1) return Bcast::kScalarRhs;
  if (b.rank() <= a.rank()) {
    const size_t off = a.rank() - b.rank();
    bool suffix = true;
    for (size_t i = 0; i < b.rank(); ++i)
      suffix = suffix && a.shape[off + i] == b.shape[i];
    if (suffix) return Bcast::kTrailingRhs;
  }
  throw dimension_error("broadcast mismatch: lhs " + a.shape_str() + " rhs " +
                        b.shape_str() +
                        " (only same-shape, scalar, or trailing-suffix rhs)");
}

}  // namespace

void set_spike_surrogate(const SpikeSurrogate& surrogate) {
  g_surrogate = surrogate;
}

bool spike_surrogate_registered() {
  return g_surrogate.grad != nullptr && g_surrogate.relaxed != nullptr;
}

const SpikeSurrogate& spike_surrogate() {
  if (!spike_surrogate_registered())
    throw contract_error("no spike surrogate registered");
  return g_surrogate;
}

struct Graph::Node {
  OpKind op = OpKind::kLeaf;
  int32_t in0 = -1;
  int32_t in1 = -1;
  float c0 = 0.0f;   // scale factor / offset / threshold
  float c1 = 0.0f;   // surrogate width
  int64_t index = 0; // pick index
  Tensor value;
  Tensor* owner = nullptr;
  std::vector<float> adj;
};

Graph::Graph(uint64_t seed) : seed_(seed) {}
Graph::~Graph() = default;
Graph::Graph(Graph&&) noexcept = default;
Graph& Graph::operator=(Graph&&) noexcept = default;

size_t Graph::size() const { return nodes_.size(); }

const Graph::Node& Graph::at(Var v) const {
  if (!v.valid() || static_cast<size_t>(v.id) >= nodes_.size())
    throw contract_error("invalid graph handle");
  return nodes_[static_cast<size_t>(v.id)];
}

Var Graph::push(Node node, const char* what) {
  check_finite(node.value, what);
  nodes_.push_back(std::move(node));
  return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

Var Graph::leaf(Tensor* owner) {
  if (owner == nullptr) throw contract_error("leaf requires a tensor");
  Node n;
  n.op = OpKind::kLeaf;
  n.owner = owner;
  n.value = *owner;  // snapshot; the graph never mutates owner data
  return push(std::move(n), "leaf");
}

Var Graph::constant(Tensor value) {
  Node n;
  n.op = OpKind::kLeaf;
  n.value = std::move(value);
  n.value.requires_grad = false;
  return push(std::move(n), "constant");
}

Var Graph::matmul(Var a, Var b) {
  const Tensor& ta = at(a).value;
  const Tensor& tb = at(b).value;
  if (ta.rank() != 2 || tb.rank() != 2)
    throw dimension_error("matmul requires rank-2 tensors, got " +
                          ta.shape_str() + " and " + tb.shape_str());
  if (ta.shape[1] != tb.shape[0])
    throw dimension_error("matmul inner extents disagree: " + ta.shape_str() +
                          " vs " + tb.shape_str());
  Node n;
  n.op = OpKind::kMatmul;
  n.in0 = a.id;
  n.in1 = b.id;
  n.value = Tensor::zeros({ta.shape[0], tb.shape[1]});
  kernels::matmul(ta.data.data(), tb.data.data(), n.value.data.data(),
                  ta.shape[0], ta.shape[1], tb.shape[1]);
  return push(std::move(n), "matmul");
}

namespace {
template <typename F>
Tensor broadcast_apply(const Tensor& a, const Tensor& b, Bcast bc, F f) {
  Tensor out = Tensor::zeros(a.shape);
  const int64_t n = a.numel();
  const int64_t nb = b.numel();
  switch (bc) {
    case Bcast::kSame:
      for (int64_t i = 0; i < n; ++i) out.data[i] = f(a.data[i], b.data[i]);
      break;
    case Bcast::kScalarRhs: {
      const float bv = b.data[0];
      for (int64_t i = 0; i < n; ++i) out.data[i] = f(a.data[i], bv);
      break;
    }
    case Bcast::kTrailingRhs:
      for (int64_t i = 0; i < n; ++i) out.data[i] = f(a.data[i], b.data[i % nb]);
      break;
  }
  return out;
}
}  // namespace

Var Graph::add(Var a, Var b) {
  const Tensor& ta = at(a).value;
  const Tensor& tb = at(b).value;
  const Bcast bc = classify_broadcast(ta, tb);
  Node n;
  n.op = OpKind::kAdd;
  n.in0 = a.id;
  n.in1 = b.id;
  n.value = broadcast_apply(ta, tb, bc, [](float x, float y) { return x + y; });
  return push(std::move(n), "add");
}

Var Graph::sub(Var a, Var b) {
  const Tensor& ta = at(a).value;
  const Tensor& tb = at(b).value;
  const Bcast bc = classify_broadcast(ta, tb);
  Node n;
  n.op = OpKind::kSub;
  n.in0 = a.id;
  n.in1 = b.id;
  n.value = broadcast_apply(ta, tb, bc, [](float x, float y) { return x - y; });
  return push(std::move(n), "sub");
}

Var Graph::mul(Var a, Var b) {
  const Tensor& ta = at(a).value;
  const Tensor& tb = at(b).value;
  const Bcast bc = classify_broadcast(ta, tb);
  Node n;
  n.op = OpKind::kMul;
  n.in0 = a.id;
  n.in1 = b.id;
  n.value = broadcast_apply(ta, tb, bc, [](float x, float y) { return x * y; });
  return push(std::move(n), "mul");
}

Var Graph::div(Var a, Var b) {
  const Tensor& ta = at(a).value;
  const Tensor& tb = at(b).value;
  const Bcast bc = classify_broadcast(ta, tb);
  Node n;
  n.op = OpKind::kDiv;
  n.in0 = a.id;
  n.in1 = b.id;
  n.value = broadcast_apply(ta, tb, bc, [](float x, float y) { return x / y; });
  return push(std::move(n), "div");
}

Var Graph::scale(Var a, float c) {
  Node n;
  n.op = OpKind::kScale;
  n.in0 = a.id;
  n.c0 = c;
  n.value = at(a).value;
  for (float& v : n.value.data) v = c * v;
  return push(std::move(n), "scale");
}

Var Graph::offset(Var a, float c) {
  Node n;
  n.op = OpKind::kOffset;
  n.in0 = a.id;
  n.c0 = c;
  n.value = at(a).value;
  for (float& v : n.value.data) v = v + c;
  return push(std::move(n), "offset");
}

Var Graph::exp(Var a) {
  Node n;
  n.op = OpKind::kExp;
  n.in0 = a.id;
  n.value = at(a).value;
  for (float& v : n.value.data) v = std::exp(v);
  return push(std::move(n), "exp");
}

Var Graph::log(Var a) {
  Node n;
  n.op = OpKind::kLog;
  n.in0 = a.id;
  n.value = at(a).value;
  for (float& v : n.value.data) {
    if (v <= 0.0f)
      throw domain_error("log of non-positive value " + std::to_string(v));
    v = std::log(v);
  }
  return push(std::move(n), "log");
}

Var Graph::sqrt(Var a) {
  Node n;
  n.op = OpKind::kSqrt;
  n.in0 = a.id;
  n.value = at(a).value;
  for (float& v : n.value.data) {
    if (v < 0.0f)
      throw domain_error("sqrt of negative value " + std::to_string(v));
    v = std::sqrt(v);
  }
  return push(std::move(n), "sqrt");
}

Var Graph::sum(Var a) {
  const Tensor& ta = at(a).value;
  Node n;
  n.op = OpKind::kSumAll;
  n.in0 = a.id;
  n.value = Tensor::scalar(
      static_cast<float>(kernels::sum_f64(ta.data.data(), ta.numel())));
  return push(std::move(n), "sum");
}

Var Graph::mean(Var a) {
  const Tensor& ta = at(a).value;
  if (ta.numel() == 0) throw domain_error("mean of empty tensor");
  Node n;
  n.op = OpKind::kMeanAll;
  n.in0 = a.id;
  n.value = Tensor::scalar(
      static_cast<float>(kernels::sum_f64(ta.data.data(), ta.numel()) /
                         static_cast<double>(ta.numel())));
  return push(std::move(n), "mean");
}

Var Graph::sum_axis0(Var a) {
  const Tensor& ta = at(a).value;
  if (ta.rank() != 2) throw dimension_error("sum_axis0 requires a 2-D tensor");
  Node n;
  n.op = OpKind::kSumAxis0;
  n.in0 = a.id;
  n.value = Tensor::zeros({ta.shape[1]});
  for (int64_t r = 0; r < ta.shape[0]; ++r)
    for (int64_t c = 0; c < ta.shape[1]; ++c)
      n.value.data[c] += ta.data[r * ta.shape[1] + c];
  return push(std::move(n), "sum_axis0");
}

Var Graph::mean_axis0(Var a) {
  const Tensor& ta = at(a).value;
  if (ta.rank() != 2) throw dimension_error("mean_axis0 requires a 2-D tensor");
  Node n;
  n.op = OpKind::kMeanAxis0;
  n.in0 = a.id;
  n.value = Tensor::zeros({ta.shape[1]});
  const float inv = 1.0f / static_cast<float>(ta.shape[0]);
  for (int64_t r = 0; r < ta.shape[0]; ++r)
    for (int64_t c = 0; c < ta.shape[1]; ++c)
      n.value.data[c] += ta.data[r * ta.shape[1] + c];
  for (float& v : n.value.data) v *= inv;
  return push(std::move(n), "mean_axis0");
}

Var Graph::pick(Var a, int64_t index) {
  const Tensor& ta = at(a).value;
  if (index < 0 || index >= ta.numel())
    throw dimension_error("pick index " + std::to_string(index) +
                          " out of range for " + ta.shape_str());
  Node n;
  n.op = OpKind::kPick;
  n.in0 = a.id;
  n.index = index;
  n.value = Tensor::scalar(ta.data[static_cast<size_t>(index)]);
  return push(std::move(n), "pick");
}

Var Graph::reshape(Var a, std::vector<int64_t> shape) {
  const Tensor& ta = at(a).value;
  if (shape_numel(shape) != ta.numel())
    throw dimension_error("reshape to incompatible element count");
  Node n;
  n.op = OpKind::kReshape;
  n.in0 = a.id;
  n.value = ta;
  n.value.shape = std::move(shape);
  return push(std::move(n), "reshape");
}

Var Graph::transpose(Var a) {
  const Tensor& ta = at(a).value;
  if (ta.rank() != 2) throw dimension_error("transpose requires a 2-D tensor");
  Node n;
  n.op = OpKind::kTranspose;
  n.in0 = a.id;
  n.value = Tensor::zeros({ta.shape[1], ta.shape[0]});
  for (int64_t r = 0; r < ta.shape[0]; ++r)
    for (int64_t c = 0; c < ta.shape[1]; ++c)
      n.value.data[c * ta.shape[0] + r] = ta.data[r * ta.shape[1] + c];
  return push(std::move(n), "transpose");
}

Var Graph::spike(Var membrane, float threshold, float alpha) {
  if (alpha <= 0.0f) throw contract_error("surrogate width must be positive");
  const Tensor& u = at(membrane).value;
  Node n;
  n.op = OpKind::kSpike;
  n.in0 = membrane.id;
  n.c0 = threshold;
  n.c1 = alpha;
  n.value = u;
  if (relaxed_spike_) {
    const SpikeSurrogate& s = spike_surrogate();
    for (float& v : n.value.data) v = s.relaxed(v, threshold, alpha);
  } else {
    for (float& v : n.value.data) v = v >= threshold ? 1.0f : 0.0f;
  }
  return push(std::move(n), "spike");
}

const Tensor& Graph::value(Var v) const { return at(v).value; }

const std::vector<float>& Graph::adjoint(Var v) const {
  if (!ran_backward_) throw contract_error("adjoint requested before backward");
  return at(v).adj;
}

void Graph::backward(Var loss) {
  backward_local(loss);
  flush_leaf_grads(1.0f);
}

void Graph::backward_local(Var loss) {
  const Node& top = at(loss);
  if (!top.value.is_scalar())
    throw contract_error("backward requires a scalar loss, got " +
                         top.value.shape_str());
  for (Node& n : nodes_) n.adj.assign(n.value.data.size(), 0.0f);
  nodes_[static_cast<size_t>(loss.id)].adj[0] = 1.0f;

  for (size_t idx = static_cast<size_t>(loss.id) + 1; idx-- > 0;) {
    Node& n = nodes_[idx];
    if (n.op == OpKind::kLeaf) continue;
    Node& a = nodes_[static_cast<size_t>(n.in0)];
    const int64_t na = a.value.numel();
    switch (n.op) {
      case OpKind::kMatmul: {
        Node& b = nodes_[static_cast<size_t>(n.in1)];
        const int64_t m = a.value.shape[0];
        const int64_t k = a.value.shape[1];
        const int64_t cols = b.value.shape[1];
        kernels::matmul_acc_abt(n.adj.data(), b.value.data.data(),
                                a.adj.data(), m, k, cols);
        kernels::matmul_acc_atb(a.value.data.data(), n.adj.data(),
                                b.adj.data(), m, k, cols);
        break;
      }
      case OpKind::kAdd:
      case OpKind::kSub:
      case OpKind::kMul:
      case OpKind::kDiv: {
        Node& b = nodes_[static_cast<size_t>(n.in1)];
        const int64_t nb = b.value.numel();
        for (int64_t i = 0; i < na; ++i) {
          const float d = n.adj[i];
          const float av = a.value.data[i];
          const float bv = b.value.data[nb == 1 ? 0 : i % nb];
          const int64_t bi = nb == 1 ? 0 : i % nb;
          switch (n.op) {
            case OpKind::kAdd:
              a.adj[i] += d;
              b.adj[bi] += d;
              break;
            case OpKind::kSub:
              a.adj[i] += d;
              b.adj[bi] -= d;
              break;
            case OpKind::kMul:
              a.adj[i] += d * bv;
              b.adj[bi] += d * av;
              break;
            case OpKind::kDiv:
              a.adj[i] += d / bv;
              b.adj[bi] -= d * av / (bv * bv);
              break;
            default:
              break;
          }
        }
        break;
      }
      case OpKind::kScale:
        for (int64_t i = 0; i < na; ++i) a.adj[i] += n.adj[i] * n.c0;
        break;
      case OpKind::kOffset:
      case OpKind::kReshape:
        for (int64_t i = 0; i < na; ++i) a.adj[i] += n.adj[i];
        break;
      case OpKind::kExp:
        for (int64_t i = 0; i < na; ++i) a.adj[i] += n.adj[i] * n.value.data[i];
        break;
      case OpKind::kLog:
        for (int64_t i = 0; i < na; ++i)
          a.adj[i] += n.adj[i] / a.value.data[i];
        break;
      case OpKind::kSqrt:
        for (int64_t i = 0; i < na; ++i)
          a.adj[i] += n.adj[i] * 0.5f / n.value.data[i];
        break;
      case OpKind::kSumAll:
        for (int64_t i = 0; i < na; ++i) a.adj[i] += n.adj[0];
        break;
      case OpKind::kMeanAll: {
        const float inv = 1.0f / static_cast<float>(na);
        for (int64_t i = 0; i < na; ++i) a.adj[i] += n.adj[0] * inv;
        break;
      }
      case OpKind::kSumAxis0: {
        const int64_t cols = a.value.shape[1];
        for (int64_t i = 0; i < na; ++i) a.adj[i] += n.adj[i % cols];
        break;
      }
      case OpKind::kMeanAxis0: {
        const int64_t cols = a.value.shape[1];
        const float inv = 1.0f / static_cast<float>(a.value.shape[0]);
        for (int64_t i = 0; i < na; ++i) a.adj[i] += n.adj[i % cols] * inv;
        break;
      }
      case OpKind::kPick:
        a.adj[static_cast<size_t>(n.index)] += n.adj[0];
        break;
      case OpKind::kTranspose: {
        const int64_t rows = a.value.shape[0];
        const int64_t cols = a.value.shape[1];
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t c = 0; c < cols; ++c)
            a.adj[r * cols + c] += n.adj[c * rows + r];
        break;
      }
      case OpKind::kSpike: {
        const SpikeSurrogate& s = spike_surrogate();
        for (int64_t i = 0; i < na; ++i)
          a.adj[i] += n.adj[i] * s.grad(a.value.data[i], n.c0, n.c1);
        break;
      }
      case OpKind::kLeaf:
        break;
    }
  }
  ran_backward_ = true;
}

void Graph::flush_leaf_grads(float scale) {
  if (!ran_backward_)
    throw contract_error("flush_leaf_grads before backward_local");
  for (Node& n : nodes_) {
    if (n.op != OpKind::kLeaf || n.owner == nullptr) continue;
    if (!n.owner->requires_grad) continue;
    n.owner->ensure_grad();
    for (size_t i = 0; i < n.adj.size(); ++i)
      n.owner->grad[i] += scale * n.adj[i];
  }
}

}  // namespace spikestream

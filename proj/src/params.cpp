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

#include "spikestream/params.hpp"

#include <cmath>

#include "spikestream/config.hpp"
#include "spikestream/error.hpp"

namespace spikestream {

Tensor& ParamTable::add(const std::string& name, Tensor init, bool trainable) {
  if (index_.count(name)) throw contract_error("duplicate parameter " + name);
  auto t = std::make_unique<Tensor>(std::move(init));
  if (trainable) t->ensure_grad();
  index_[name] = entries_.size();
  entries_.emplace_back(name, std::move(t));
  return *entries_.back().second;
}

Tensor& ParamTable::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw contract_error("unknown parameter " + name);
  return *entries_[it->second].second;
}

const Tensor& ParamTable::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw contract_error("unknown parameter " + name);
  return *entries_[it->second].second;
}

bool ParamTable::has(const std::string& name) const {
  return index_.count(name) != 0;
}

std::vector<Tensor*> ParamTable::with_prefix(const std::string& prefix) {
  std::vector<Tensor*> out;
  for (auto& [name, t] : entries_)
    if (name.rfind(prefix, 0) == 0) out.push_back(t.get());
  return out;
}

void ParamTable::zero_grads() {
  for (auto& [name, t] : entries_) t->zero_grad();
}

Optimizer::Optimizer(std::vector<Tensor*> params, const Config& cfg)
    : params_(std::move(params)) {
  const std::string& kind = cfg.get("optimizer");
  if (kind == "adam") {
    adam_ = true;
    beta1_ = static_cast<float>(cfg.get_f64("adam.beta1"));
    beta2_ = static_cast<float>(cfg.get_f64("adam.beta2"));
    eps_ = static_cast<float>(cfg.get_f64("adam.eps"));
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
      m_[i].assign(params_[i]->data.size(), 0.0f);
      v_[i].assign(params_[i]->data.size(), 0.0f);
    }
  } else if (kind != "sgd") {
    throw config_error("unknown optimizer: " + kind);
  }
}

void Optimizer::step(double lr) {
  const float flr = static_cast<float>(lr);
  if (!adam_) {
    for (Tensor* p : params_) {
      if (!p->requires_grad) continue;
      for (size_t i = 0; i < p->data.size(); ++i)
        p->data[i] -= flr * p->grad[i];
    }
    return;
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(beta1_), t_);
  const double bc2 = 1.0 - std::pow(static_cast<double>(beta2_), t_);
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    Tensor* p = params_[pi];
    if (!p->requires_grad) continue;
    for (size_t i = 0; i < p->data.size(); ++i) {
      const float g = p->grad[i];
      m_[pi][i] = beta1_ * m_[pi][i] + (1.0f - beta1_) * g;
      v_[pi][i] = beta2_ * v_[pi][i] + (1.0f - beta2_) * g * g;
      const double mhat = m_[pi][i] / bc1;
      const double vhat = v_[pi][i] / bc2;
      p->data[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps_));
    }
  }
}

void Optimizer::zero_grads() {
  for (Tensor* p : params_) p->zero_grad();
}

}  // namespace spikestream

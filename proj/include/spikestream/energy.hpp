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
#include <string>
#include <vector>

#include "spikestream/encoders.hpp"

namespace spikestream::energy {

// Theoretical energy accounting: a spiking layer costs accumulate-only
// operations, SOPs = T * gamma * FLOPs, at 0.9 pJ each; the dense baseline
// costs 4.6 pJ per MAC (45nm figures). All per-item.

constexpr double kMacPicojoule = 4.6;
constexpr double kAcPicojoule = 0.9;

enum class LayerKind { kFc, kConv, kAttentionMatmul };

struct LayerSpec {
  LayerKind kind = LayerKind::kFc;
  // fc: in, out. conv: kernel, c_in, c_out, h_out, w_out.
  // attention-matmul: rows (sequence length), inner (total head dim);
  // covers both batched products, score and value.
  int64_t in = 0, out = 0;
  int64_t kernel = 0, c_in = 0, c_out = 0, h_out = 0, w_out = 0;
  int64_t rows = 0, inner = 0;
};

double count_flops(const LayerSpec& spec);

// T * gamma * flops; gamma is the firing rate of the layer's input train.
double sops(double flops, int64_t time_steps, double gamma);

// 1 - (E_AC * T * gamma_bar) / E_MAC.
double ecr(int64_t time_steps, double gamma_bar);

struct EnergyRow {
  std::string name;
  std::string kind;
  double flops = 0;
  double gamma = 0;
  double sops = 0;
  double energy_pj = 0;
};

struct EnergyReport {
  std::vector<EnergyRow> rows;  // spiking layers
  std::vector<EnergyRow> ann_rows;  // real-valued readout layers, MAC energy
  int64_t time_steps = 0;
  int64_t items = 0;
  double total_sops = 0;
  double total_energy_pj = 0;   // E_AC * total SOPs, per item
  double total_energy_mj = 0;   // 1 pJ = 1e-9 mJ
  double ann_energy_pj = 0;     // readout line items, excluded from SOPs
  double mean_firing_rate = 0;  // spike-slot-weighted over all layer inputs
  double mean_firing_rate_unweighted = 0;  // plain per-layer mean
  double reduction_rate = 0;    // from the weighted rate by default

  std::string to_table() const;
  std::string to_records(uint64_t seed) const;
};

// Runs inference with probes over the sample and aggregates. When
// `per_layer_mean` is set the ECR uses the unweighted layer mean instead of
// the slot-weighted firing rate.
EnergyReport profile(DualStreamModel& model,
                     const std::vector<io::DatasetItem>& sample,
                     const std::vector<std::string>& label_prompts,
                     bool per_layer_mean);

// Summary-only report for a pinned firing rate (no model run).
EnergyReport report_for_gamma(int64_t time_steps, double gamma_bar);

}  // namespace spikestream::energy

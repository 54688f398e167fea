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

#include "spikestream/energy.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "spikestream/error.hpp"
#include "spikestream/parallel.hpp"

namespace spikestream::energy {

double count_flops(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::kFc:
      if (spec.in <= 0 || spec.out <= 0)
        throw config_error("fc layer dims must be positive");
      return static_cast<double>(spec.in) * static_cast<double>(spec.out);
    case LayerKind::kConv:
      if (spec.kernel <= 0 || spec.c_in <= 0 || spec.c_out <= 0 ||
          spec.h_out <= 0 || spec.w_out <= 0)
        throw config_error("conv layer dims must be positive");
      return static_cast<double>(spec.kernel) * spec.kernel * spec.c_in *
             spec.c_out * spec.h_out * spec.w_out;
    case LayerKind::kAttentionMatmul:
      if (spec.rows <= 0 || spec.inner <= 0)
        throw config_error("attention layer dims must be positive");
      // score product + value product
      return 2.0 * static_cast<double>(spec.rows) * spec.rows * spec.inner;
  }
  throw config_error("unknown layer kind");
}

double sops(double flops, int64_t time_steps, double gamma) {
  if (time_steps < 1) throw contract_error("sops needs at least one step");
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw domain_error("firing rate " + std::to_string(gamma) +
                       " outside [0,1]");
  if (flops < 0) throw config_error("negative flop count");
  return static_cast<double>(time_steps) * gamma * flops;
}

double ecr(int64_t time_steps, double gamma_bar) {
  if (time_steps < 1) throw contract_error("ecr needs at least one step");
  if (!(gamma_bar >= 0.0 && gamma_bar <= 1.0))
    throw domain_error("mean firing rate " + std::to_string(gamma_bar) +
                       " outside [0,1]");
  return 1.0 -
         (kAcPicojoule * static_cast<double>(time_steps) * gamma_bar) /
             kMacPicojoule;
}

std::string EnergyReport::to_table() const {
  std::ostringstream os;
  char buf[256];
  os << "layer                          kind              flops      gamma   "
        "     sops    energy_pJ\n";
  for (const EnergyRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%-30s %-16s %9.0f  %9.6f %12.2f %12.4f\n",
                  r.name.c_str(), r.kind.c_str(), r.flops, r.gamma, r.sops,
                  r.energy_pj);
    os << buf;
  }
  for (const EnergyRow& r : ann_rows) {
    std::snprintf(buf, sizeof buf, "%-30s %-16s %9.0f          -            "
                  "- %12.4f\n",
                  r.name.c_str(), r.kind.c_str(), r.flops, r.energy_pj);
    os << buf;
  }
  std::snprintf(buf, sizeof buf,
                "total SOPs (per item)          %.2f\n"
                "spiking energy (per item)      %.4f pJ = %.6e mJ\n"
                "readout MAC energy (per item)  %.4f pJ\n"
                "mean firing rate               %.4f%% (unweighted %.4f%%)\n"
                "energy reduction rate          %.4f%%\n",
                total_sops, total_energy_pj, total_energy_mj, ann_energy_pj,
                100.0 * mean_firing_rate, 100.0 * mean_firing_rate_unweighted,
                100.0 * reduction_rate);
  os << buf;
  return os.str();
}

std::string EnergyReport::to_records(uint64_t seed) const {
  std::ostringstream os;
  os << "# seed=" << seed << "\n";
  char buf[256];
  for (const EnergyRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%s\t%s\t%.10g\t%.10g\t%.10g\t%.10g\n",
                  r.name.c_str(), r.kind.c_str(), r.flops, r.gamma, r.sops,
                  r.energy_pj);
    os << buf;
  }
  for (const EnergyRow& r : ann_rows) {
    std::snprintf(buf, sizeof buf, "%s\t%s\t%.10g\t-\t-\t%.10g\n",
                  r.name.c_str(), r.kind.c_str(), r.flops, r.energy_pj);
    os << buf;
  }
  std::snprintf(buf, sizeof buf,
                "summary\ttime_steps\t%lld\n"
                "summary\titems\t%lld\n"
                "summary\ttotal_sops\t%.10g\n"
                "summary\tenergy_pj\t%.10g\n"
                "summary\tenergy_mj\t%.10g\n"
                "summary\tgamma_bar\t%.10g\n"
                "summary\tgamma_bar_unweighted\t%.10g\n"
                "summary\tecr\t%.10g\n",
                static_cast<long long>(time_steps),
                static_cast<long long>(items), total_sops, total_energy_pj,
                total_energy_mj, mean_firing_rate,
                mean_firing_rate_unweighted, reduction_rate);
  os << buf;
  return os.str();
}

EnergyReport profile(DualStreamModel& model,
                     const std::vector<io::DatasetItem>& sample,
                     const std::vector<std::string>& label_prompts,
                     bool per_layer_mean) {
  if (sample.empty()) throw data_error("energy profile needs a nonempty sample");

  const int64_t n = static_cast<int64_t>(sample.size());
  std::vector<ForwardStats> stats(static_cast<size_t>(n));
  parallel_for_items(n, [&](int64_t i) {
    const Tensor raw = io::load_item_tensor(sample[static_cast<size_t>(i)]);
    model.embed_image(raw, &stats[static_cast<size_t>(i)]);
  });
  ForwardStats merged;
  for (const ForwardStats& s : stats) merged.merge(s);

  // Label prompts run through the text stream once per label set; their
  // probes are merged on top so the report covers both encoders.
  ForwardStats text_stats;
  for (const std::string& prompt : label_prompts)
    model.embed_text(prompt, &text_stats);
  if (!label_prompts.empty()) {
    for (const auto& c : text_stats.cost) merged.cost.push_back(c);
    for (const auto& f : text_stats.firing) merged.firing.push_back(f);
    for (const auto& r : text_stats.real) merged.real.push_back(r);
  }

  EnergyReport report;
  report.time_steps = merged.time_steps;
  report.items = merged.items;
  double weighted_spikes = 0, weighted_slots = 0, gamma_sum = 0;
  for (const ForwardStats::Cost& c : merged.cost) {
    EnergyRow row;
    row.name = c.name;
    row.kind = c.kind;
    row.flops = c.macs;
    row.gamma = c.slots > 0 ? c.spikes / c.slots : 0.0;
    row.sops = sops(row.flops, report.time_steps, row.gamma);
    row.energy_pj = kAcPicojoule * row.sops;
    report.rows.push_back(row);
    report.total_sops += row.sops;
    weighted_spikes += c.spikes;
    weighted_slots += c.slots;
    gamma_sum += row.gamma;
  }
  report.total_energy_pj = kAcPicojoule * report.total_sops;
  report.total_energy_mj = report.total_energy_pj * 1e-9;
  for (const ForwardStats::Real& r : merged.real) {
    EnergyRow row;
    row.name = r.name;
    row.kind = "mac";
    row.flops = r.macs;
    row.energy_pj = kMacPicojoule * r.macs;
    report.ann_rows.push_back(row);
    report.ann_energy_pj += row.energy_pj;
  }
  report.mean_firing_rate =
      weighted_slots > 0 ? weighted_spikes / weighted_slots : 0.0;
  report.mean_firing_rate_unweighted =
      report.rows.empty() ? 0.0
                          : gamma_sum / static_cast<double>(report.rows.size());
  report.reduction_rate =
      ecr(report.time_steps,
          per_layer_mean ? report.mean_firing_rate_unweighted
                         : report.mean_firing_rate);
  return report;
}

EnergyReport report_for_gamma(int64_t time_steps, double gamma_bar) {
  EnergyReport report;
  report.time_steps = time_steps;
  report.mean_firing_rate = gamma_bar;
  report.mean_firing_rate_unweighted = gamma_bar;
  report.reduction_rate = ecr(time_steps, gamma_bar);
  return report;
}

}  // namespace spikestream::energy

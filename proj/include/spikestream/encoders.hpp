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
#include <unordered_map>
#include <vector>

#include "spikestream/config.hpp"
#include "spikestream/graph.hpp"
#include "spikestream/io.hpp"
#include "spikestream/lif.hpp"
#include "spikestream/params.hpp"
#include "spikestream/tensor.hpp"

namespace spikestream {

// The dual-stream model: a patch-based spiking transformer for images and a
// spiking MLP over spike-coded word embeddings for text, each closed by a
// readout that turns the spike train into a float embedding. Every signal
// between layers is a binary spike tensor; only the readout path is
// real-valued.

struct ImageEncoderCfg {
  int64_t image_size = 32;
  int64_t channels = 3;
  int64_t patch_size = 8;
  int64_t depth = 4;
  int64_t dim = 384;
  int64_t heads = 6;
  int64_t mlp_ratio = 4;
  float attn_threshold = 0.25f;
  int64_t out_dim = 512;
  int64_t time_steps = 4;
  LifParams neuron;  // threshold 1.0 stages
  std::vector<float> mean;
  std::vector<float> stddev;

  void validate() const;
  int64_t patches_per_side() const { return image_size / patch_size; }
  int64_t patches() const { return patches_per_side() * patches_per_side(); }
  int64_t patch_dim() const { return channels * patch_size * patch_size; }
  int64_t spike_dim() const { return patches() * dim; }
};

struct TextEncoderCfg {
  int64_t embed_dim = 0;  // word-embedding dimension, from the store
  std::vector<int64_t> hidden_dims;
  int64_t max_len = 20;
  int64_t out_dim = 512;
  int64_t time_steps = 4;
  LifParams neuron;

  void validate() const;
  int64_t input_dim() const { return max_len * embed_dim; }
  int64_t spike_dim() const { return hidden_dims.back(); }
};

enum class ReadoutMode { kTdw, kMean, kAd, kAr };

ReadoutMode readout_mode_from(const std::string& name);
const char* readout_mode_name(ReadoutMode mode);

// Integration weights over time plus the projection to embedding space.
// MEAN fixes 1/T; AD is the increasing arithmetic progression summing to 1;
// AR the ratio-2 geometric one; TDW starts at 1/T and trains.
struct ReadoutSpec {
  ReadoutMode mode = ReadoutMode::kTdw;
  Tensor weights;     // [T]
  Tensor projection;  // [spike_dim, out_dim]

  static Tensor init_weights(ReadoutMode mode, int64_t time_steps);
  bool weights_trainable() const { return mode == ReadoutMode::kTdw; }
};

// Spec-level readout: e = projection . (sum_t w_t s_t). Input must be binary.
Tensor readout_apply(const SpikeTensor& spikes, const ReadoutSpec& spec);

// [C,H,W] -> [patches, C*p*p], patches row-major, (c, dy, dx) within a patch.
Tensor patchify(const Tensor& chw, int64_t patch_size);

// Firing statistics and synaptic-cost probes collected during forwards.
// Layers carrying MACs are registered once with their single-pass per-item
// MAC count; spike counts accumulate over time steps and items.
struct ForwardStats {
  struct Cost {
    std::string name;
    std::string kind;  // "fc" | "attention-matmul"
    double macs = 0;   // one inference pass, one item
    double spikes = 0; // input spikes, accumulated over steps and items
    double slots = 0;
  };
  struct Firing {
    std::string name;
    double spikes = 0;  // layer output spikes
    double slots = 0;
  };
  struct Real {
    std::string name;
    double macs = 0;  // real-valued (readout) MACs, one pass, one item
  };

  std::vector<Cost> cost;
  std::vector<Firing> firing;
  std::vector<Real> real;
  int64_t items = 0;
  int64_t time_steps = 0;

  void register_cost(const std::string& name, const std::string& kind,
                     double macs);
  void feed_cost(const std::string& name, double spikes, double slots);
  void add_firing(const std::string& name, double spikes, double slots);
  void register_real(const std::string& name, double macs);
  void merge(const ForwardStats& other);

  double total_input_spikes() const;
  double total_input_slots() const;
};

// Whitespace/punctuation tokenizer, lowercased.
std::vector<std::string> tokenize(const std::string& text);

class DualStreamModel {
 public:
  DualStreamModel(const Config& cfg, io::TeacherStore word_embeddings);

  const ImageEncoderCfg& image_cfg() const { return img_; }
  const TextEncoderCfg& text_cfg() const { return txt_; }
  int64_t out_dim() const { return img_.out_dim; }
  int64_t time_steps() const { return img_.time_steps; }

  // Forward passes build onto the caller's graph and return the embedding
  // handle ([out_dim]). Optional stats collect firing and cost probes.
  Var image_forward(Graph& g, const SpikeTensor& spikes,
                    ForwardStats* stats = nullptr);
  Var text_forward(Graph& g, const std::vector<int64_t>& token_ids,
                   ForwardStats* stats = nullptr);

  // Pixel grid in [0,255] (H x W x C) -> normalized -> constant-current
  // spike train at the configured resolution.
  SpikeTensor encode_image(const Tensor& raw_hwc) const;

  std::vector<int64_t> token_ids(const std::string& text) const;

  // Value-level conveniences (forward only).
  Tensor embed_image(const Tensor& raw_hwc, ForwardStats* stats = nullptr);
  Tensor embed_text(const std::string& text, ForwardStats* stats = nullptr);

  ParamTable& params() { return params_; }
  const ParamTable& params() const { return params_; }
  std::vector<Tensor*> image_trainables();
  std::vector<Tensor*> text_trainables();

  void save_params(io::Checkpoint& ckpt) const;
  void load_params(const io::Checkpoint& ckpt);

 private:
  Var linear(Graph& g, Var x, const std::string& w, const std::string& b);
  Var readout_graph(Graph& g, const std::vector<Var>& step_spikes,
                    const std::string& prefix, bool layer_norm);

  ImageEncoderCfg img_;
  TextEncoderCfg txt_;
  ReadoutMode readout_mode_ = ReadoutMode::kTdw;
  ParamTable params_;
  io::TeacherStore word_embeddings_;
  std::unordered_map<std::string, int64_t> vocab_;  // token -> store row
  int64_t unk_row_ = -1;                            // -1: embed as zeros
};

}  // namespace spikestream

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

#include "spikestream/encoders.hpp"

#include <cctype>
#include <cmath>
#include <unordered_map>

#include "spikestream/error.hpp"
#include "spikestream/kernels.hpp"
#include "spikestream/rng.hpp"

namespace spikestream {

void ImageEncoderCfg::validate() const {
  neuron.validate();
  if (depth < 1) throw config_error("image depth must be at least 1");
  if (dim % heads != 0)
    throw config_error("image dim " + std::to_string(dim) +
                       " not divisible by heads " + std::to_string(heads));
  if (image_size % patch_size != 0)
    throw config_error("image size " + std::to_string(image_size) +
                       " not divisible by patch size " +
                       std::to_string(patch_size));
  if (channels < 1 || out_dim < 1 || time_steps < 1)
    throw config_error("image encoder extents must be positive");
  if (!(attn_threshold > 0.0f))
    throw config_error("attention threshold must be positive");
  if (static_cast<int64_t>(mean.size()) != channels ||
      static_cast<int64_t>(stddev.size()) != channels)
    throw config_error("image.mean/image.std must list one value per channel");
}

void TextEncoderCfg::validate() const {
  neuron.validate();
  if (max_len < 1) throw config_error("text max_len must be at least 1");
  if (embed_dim < 1) throw config_error("word-embedding dim must be positive");
  if (hidden_dims.empty())
    throw config_error("text encoder needs at least one hidden layer");
  for (int64_t h : hidden_dims)
    if (h < 1) throw config_error("text hidden dims must be positive");
  if (out_dim < 1 || time_steps < 1)
    throw config_error("text encoder extents must be positive");
}

ReadoutMode readout_mode_from(const std::string& name) {
  if (name == "tdw") return ReadoutMode::kTdw;
  if (name == "mean") return ReadoutMode::kMean;
  if (name == "ad") return ReadoutMode::kAd;
  if (name == "ar") return ReadoutMode::kAr;
  throw config_error("unknown readout mode: " + name);
}

const char* readout_mode_name(ReadoutMode mode) {
  switch (mode) {
    case ReadoutMode::kTdw: return "tdw";
    case ReadoutMode::kMean: return "mean";
    case ReadoutMode::kAd: return "ad";
    case ReadoutMode::kAr: return "ar";
  }
  return "?";
}

Tensor ReadoutSpec::init_weights(ReadoutMode mode, int64_t time_steps) {
  if (time_steps < 1) throw contract_error("readout needs at least one step");
  Tensor w = Tensor::zeros({time_steps});
  switch (mode) {
    case ReadoutMode::kTdw:
    case ReadoutMode::kMean:
      for (float& v : w.data) v = 1.0f / static_cast<float>(time_steps);
      break;
    case ReadoutMode::kAd: {
      // w_t = t * d with d = 2 / (T (T + 1)); increasing, sums to 1.
      const double d = 2.0 / (static_cast<double>(time_steps) *
                              static_cast<double>(time_steps + 1));
      for (int64_t t = 0; t < time_steps; ++t)
        w.data[t] = static_cast<float>(d * static_cast<double>(t + 1));
      break;
    }
    case ReadoutMode::kAr: {
      // w_t = 2^t / (2^T - 1); increasing, sums to 1.
      const double denom = std::pow(2.0, static_cast<double>(time_steps)) - 1.0;
      for (int64_t t = 0; t < time_steps; ++t)
        w.data[t] = static_cast<float>(std::pow(2.0, static_cast<double>(t)) /
                                       denom);
      break;
    }
  }
  return w;
}

Tensor readout_apply(const SpikeTensor& spikes, const ReadoutSpec& spec) {
  if (spec.weights.numel() != spikes.time_steps)
    throw contract_error("readout has " + std::to_string(spec.weights.numel()) +
                         " weights for " + std::to_string(spikes.time_steps) +
                         " time steps");
  if (spikes.values.rank() != 2)
    throw dimension_error("readout expects a [T x d] spike train");
  if (!check_binary(spikes.values, "readout input"))
    throw numeric_error("readout input is not a binary spike train");
  const int64_t d = spikes.slots_per_step();
  if (spec.projection.rank() != 2 || spec.projection.shape[0] != d)
    throw dimension_error("readout projection expects [d x out_dim]");

  // Built on a throwaway graph so the arithmetic is the one the encoders use.
  Graph g;
  Tensor w = spec.weights;
  Tensor p = spec.projection;
  Var wv = g.constant(w);
  Var pv = g.constant(p);
  Var z;
  for (int64_t t = 0; t < spikes.time_steps; ++t) {
    Tensor slice = spikes.slice(t);
    slice.shape = {1, d};
    Var term = g.mul(g.constant(slice), g.pick(wv, t));
    z = t == 0 ? term : g.add(z, term);
  }
  Var e = g.reshape(g.matmul(z, pv), {spec.projection.shape[1]});
  return g.value(e);
}

Tensor patchify(const Tensor& chw, int64_t patch_size) {
  if (chw.rank() != 3) throw dimension_error("patchify expects [C,H,W]");
  const int64_t c = chw.shape[0], h = chw.shape[1], w = chw.shape[2];
  if (h % patch_size != 0 || w % patch_size != 0)
    throw dimension_error("spatial dims not divisible by patch size");
  const int64_t py = h / patch_size, px = w / patch_size;
  const int64_t n = py * px, pd = c * patch_size * patch_size;
  Tensor out = Tensor::zeros({n, pd});
  for (int64_t gy = 0; gy < py; ++gy)
    for (int64_t gx = 0; gx < px; ++gx) {
      const int64_t patch = gy * px + gx;
      int64_t k = 0;
      for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t dy = 0; dy < patch_size; ++dy)
          for (int64_t dx = 0; dx < patch_size; ++dx) {
            const int64_t yy = gy * patch_size + dy;
            const int64_t xx = gx * patch_size + dx;
            out.data[patch * pd + k++] = chw.data[(ch * h + yy) * w + xx];
          }
    }
  return out;
}

void ForwardStats::register_cost(const std::string& name,
                                 const std::string& kind, double macs) {
  for (auto& c : cost)
    if (c.name == name) {
      if (c.macs != macs || c.kind != kind)
        throw contract_error("cost layer " + name + " re-registered differently");
      return;
    }
  cost.push_back({name, kind, macs, 0.0, 0.0});
}

void ForwardStats::feed_cost(const std::string& name, double spikes,
                             double slots) {
  for (auto& c : cost)
    if (c.name == name) {
      c.spikes += spikes;
      c.slots += slots;
      return;
    }
  throw contract_error("cost layer " + name + " not registered");
}

void ForwardStats::add_firing(const std::string& name, double spikes,
                              double slots) {
  for (auto& f : firing)
    if (f.name == name) {
      f.spikes += spikes;
      f.slots += slots;
      return;
    }
  firing.push_back({name, spikes, slots});
}

void ForwardStats::register_real(const std::string& name, double macs) {
  for (auto& r : real)
    if (r.name == name) return;
  real.push_back({name, macs});
}

void ForwardStats::merge(const ForwardStats& other) {
  if (cost.empty() && firing.empty() && real.empty()) {
    *this = other;
    return;
  }
  if (other.cost.size() != cost.size() || other.firing.size() != firing.size())
    throw contract_error("merging probe stats from different models");
  for (size_t i = 0; i < cost.size(); ++i) {
    if (cost[i].name != other.cost[i].name)
      throw contract_error("merging probe stats from different models");
    cost[i].spikes += other.cost[i].spikes;
    cost[i].slots += other.cost[i].slots;
  }
  for (size_t i = 0; i < firing.size(); ++i) {
    firing[i].spikes += other.firing[i].spikes;
    firing[i].slots += other.firing[i].slots;
  }
  items += other.items;
}

double ForwardStats::total_input_spikes() const {
  double s = 0;
  for (const auto& c : cost) s += c.spikes;
  return s;
}

double ForwardStats::total_input_slots() const {
  double s = 0;
  for (const auto& c : cost) s += c.slots;
  return s;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      cur.push_back(static_cast<char>(
          std::tolower(static_cast<unsigned char>(ch))));
    } else if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

namespace {

// One leaf per parameter per graph.
struct LeafCache {
  Graph& g;
  ParamTable& params;
  std::unordered_map<std::string, Var> vars;

  Var operator()(const std::string& name) {
    auto it = vars.find(name);
    if (it != vars.end()) return it->second;
    Var v = g.leaf(&params.at(name));
    vars.emplace(name, v);
    return v;
  }
};

// LIF step + binarity check + firing probe.
Var lif_probe(Graph& g, GraphLifCell& cell, Var input, const std::string& name,
              ForwardStats* stats) {
  Var s = cell.step(input);
  const Tensor& v = g.value(s);
  check_binary(v, name.c_str());
  if (stats != nullptr)
    stats->add_firing(name, kernels::sum_f64(v.data.data(), v.numel()),
                      static_cast<double>(v.numel()));
  return s;
}

double spike_count(const Graph& g, Var v) {
  const Tensor& t = g.value(v);
  return kernels::sum_f64(t.data.data(), t.numel());
}

}  // namespace

DualStreamModel::DualStreamModel(const Config& cfg,
                                 io::TeacherStore word_embeddings)
    : word_embeddings_(std::move(word_embeddings)) {
  img_.image_size = cfg.get_i64("image.size");
  img_.channels = cfg.get_i64("image.channels");
  img_.patch_size = cfg.get_i64("image.patch_size");
  img_.depth = cfg.get_i64("image.depth");
  img_.dim = cfg.get_i64("image.dim");
  img_.heads = cfg.get_i64("image.heads");
  img_.mlp_ratio = cfg.get_i64("image.mlp_ratio");
  img_.attn_threshold = static_cast<float>(cfg.get_f64("attn_threshold"));
  img_.out_dim = cfg.get_i64("out_dim");
  img_.time_steps = cfg.get_i64("time_steps");
  img_.neuron.threshold = static_cast<float>(cfg.get_f64("threshold"));
  img_.neuron.decay = static_cast<float>(cfg.get_f64("beta"));
  img_.neuron.surrogate_alpha =
      static_cast<float>(cfg.get_f64("surrogate_alpha"));
  img_.mean = cfg.get_floats("image.mean");
  img_.stddev = cfg.get_floats("image.std");
  img_.validate();

  txt_.embed_dim = static_cast<int64_t>(word_embeddings_.dim());
  txt_.hidden_dims = cfg.get_ints("text.hidden");
  txt_.max_len = cfg.get_i64("text.max_len");
  txt_.out_dim = img_.out_dim;
  txt_.time_steps = img_.time_steps;
  txt_.neuron = img_.neuron;
  txt_.validate();

  readout_mode_ = readout_mode_from(cfg.get("readout.mode"));

  for (size_t row = 0; row < word_embeddings_.size(); ++row) {
    const std::string& id = word_embeddings_.ids()[row];
    vocab_[id] = static_cast<int64_t>(row);
  }
  auto unk = vocab_.find("<unk>");
  unk_row_ = unk == vocab_.end() ? -1 : unk->second;

  Rng rng(static_cast<uint64_t>(cfg.get_i64("seed")) ^ 0x5e1fd00dULL);
  const auto glorot = [&rng](int64_t rows, int64_t cols) {
    const float a = std::sqrt(6.0f / static_cast<float>(rows + cols));
    return Tensor::uniform({rows, cols}, -a, a, rng);
  };
  // Readout projections see dense nonnegative spike sums rather than the
  // centered activations fan-in init assumes; damp them to keep early
  // distillation gradients tame.
  const auto readout_init = [&rng](int64_t rows, int64_t cols) {
    const float a = 0.3f * std::sqrt(6.0f / static_cast<float>(rows + cols));
    return Tensor::uniform({rows, cols}, -a, a, rng);
  };

  const int64_t n = img_.patches(), d = img_.dim, dh = d / img_.heads;
  params_.add("img.patch.w", glorot(img_.patch_dim(), d));
  params_.add("img.patch.b", Tensor::full({d}, 0.1f));
  params_.add("img.pos", Tensor::uniform({n, d}, 0.0f, 0.6f, rng));
  for (int64_t blk = 0; blk < img_.depth; ++blk) {
    const std::string p = "img.blk" + std::to_string(blk) + ".";
    for (int64_t h = 0; h < img_.heads; ++h) {
      const std::string hp = p + "attn.h" + std::to_string(h) + ".";
      params_.add(hp + "wq", glorot(d, dh));
      params_.add(hp + "bq", Tensor::full({dh}, 0.05f));
      params_.add(hp + "wk", glorot(d, dh));
      params_.add(hp + "bk", Tensor::full({dh}, 0.05f));
      params_.add(hp + "wv", glorot(d, dh));
      params_.add(hp + "bv", Tensor::full({dh}, 0.05f));
      params_.add(hp + "wo", glorot(dh, d));
    }
    params_.add(p + "attn.bo", Tensor::full({d}, 0.1f));
    params_.add(p + "mlp.w1", glorot(d, d * img_.mlp_ratio));
    params_.add(p + "mlp.b1", Tensor::full({d * img_.mlp_ratio}, 0.1f));
    params_.add(p + "mlp.w2", glorot(d * img_.mlp_ratio, d));
    params_.add(p + "mlp.b2", Tensor::full({d}, 0.1f));
  }
  params_.add("img.readout.w",
              ReadoutSpec::init_weights(readout_mode_, img_.time_steps),
              readout_mode_ == ReadoutMode::kTdw);
  params_.add("img.readout.proj", readout_init(img_.spike_dim(), img_.out_dim));

  int64_t prev = txt_.input_dim();
  for (size_t i = 0; i < txt_.hidden_dims.size(); ++i) {
    const std::string p = "txt.fc" + std::to_string(i) + ".";
    params_.add(p + "w", glorot(prev, txt_.hidden_dims[i]));
    params_.add(p + "b", Tensor::full({txt_.hidden_dims[i]}, 0.1f));
    prev = txt_.hidden_dims[i];
  }
  params_.add("txt.ln.gain", Tensor::full({prev}, 1.0f));
  params_.add("txt.ln.shift", Tensor::zeros({prev}));
  params_.add("txt.readout.w",
              ReadoutSpec::init_weights(readout_mode_, txt_.time_steps),
              readout_mode_ == ReadoutMode::kTdw);
  params_.add("txt.readout.proj", readout_init(prev, txt_.out_dim));
}

Var DualStreamModel::readout_graph(Graph& g,
                                   const std::vector<Var>& step_spikes,
                                   const std::string& prefix, bool layer_norm) {
  LeafCache leaf{g, params_, {}};
  Var w = leaf(prefix + ".readout.w");
  Var z;
  for (size_t t = 0; t < step_spikes.size(); ++t) {
    Var term = g.mul(step_spikes[t], g.pick(w, static_cast<int64_t>(t)));
    z = t == 0 ? term : g.add(z, term);
  }
  if (layer_norm) {
    Var mu = g.mean(z);
    Var centered = g.sub(z, mu);
    Var var = g.mean(g.mul(centered, centered));
    Var sd = g.sqrt(g.offset(var, 1e-5f));
    Var norm = g.div(centered, sd);
    z = g.add(g.mul(norm, leaf(prefix + ".ln.gain")),
              leaf(prefix + ".ln.shift"));
  }
  Var proj = leaf(prefix + ".readout.proj");
  const int64_t out = g.value(proj).shape[1];
  return g.reshape(g.matmul(z, proj), {out});
}

Var DualStreamModel::image_forward(Graph& g, const SpikeTensor& spikes,
                                   ForwardStats* stats) {
  const int64_t n = img_.patches(), d = img_.dim, dh = d / img_.heads;
  const int64_t pd = img_.patch_dim(), steps = img_.time_steps;
  const std::vector<int64_t> want = {img_.channels, img_.image_size,
                                     img_.image_size};
  if (spikes.element_shape() != want)
    throw config_error("image spike train shape does not match the encoder");
  if (spikes.time_steps != steps)
    throw contract_error("spike train has " +
                         std::to_string(spikes.time_steps) +
                         " steps, run is configured for " +
                         std::to_string(steps));
  check_binary(spikes.values, "image input");

  if (stats != nullptr) {
    stats->time_steps = steps;
    stats->items += 1;
    const double dd = static_cast<double>(d);
    stats->register_cost("img.patch", "fc",
                         static_cast<double>(n * pd) * dd);
    for (int64_t blk = 0; blk < img_.depth; ++blk) {
      const std::string p = "img.blk" + std::to_string(blk) + ".attn.";
      stats->register_cost(p + "q", "fc", static_cast<double>(n * d) * dd);
      stats->register_cost(p + "k", "fc", static_cast<double>(n * d) * dd);
      stats->register_cost(p + "v", "fc", static_cast<double>(n * d) * dd);
      stats->register_cost(p + "scores", "attention-matmul",
                           static_cast<double>(n * n) * dd);
      stats->register_cost(p + "av", "attention-matmul",
                           static_cast<double>(n * n) * dd);
      stats->register_cost(p + "out", "fc", static_cast<double>(n * d) * dd);
      const std::string m = "img.blk" + std::to_string(blk) + ".mlp.";
      stats->register_cost(m + "fc1", "fc",
                           static_cast<double>(n * d) * dd * img_.mlp_ratio);
      stats->register_cost(m + "fc2", "fc",
                           static_cast<double>(n * d) * dd * img_.mlp_ratio);
    }
    stats->register_real("img.readout.proj",
                         static_cast<double>(img_.spike_dim()) *
                             static_cast<double>(img_.out_dim));
  }

  LeafCache leaf{g, params_, {}};
  LifParams attn_neuron = img_.neuron;
  attn_neuron.threshold = img_.attn_threshold;

  GraphLifCell embed(g, {n, d}, img_.neuron);
  struct HeadCells {
    GraphLifCell q, k, v, score, av;
  };
  std::vector<std::vector<HeadCells>> heads(img_.depth);
  std::vector<GraphLifCell> attn_out, attn_res, mlp_hidden, mlp_out, mlp_res;
  for (int64_t blk = 0; blk < img_.depth; ++blk) {
    for (int64_t h = 0; h < img_.heads; ++h)
      heads[blk].push_back(HeadCells{
          GraphLifCell(g, {n, dh}, attn_neuron),
          GraphLifCell(g, {n, dh}, attn_neuron),
          GraphLifCell(g, {n, dh}, attn_neuron),
          GraphLifCell(g, {n, n}, attn_neuron),
          GraphLifCell(g, {n, dh}, attn_neuron),
      });
    attn_out.emplace_back(g, std::vector<int64_t>{n, d}, img_.neuron);
    attn_res.emplace_back(g, std::vector<int64_t>{n, d}, img_.neuron);
    mlp_hidden.emplace_back(g, std::vector<int64_t>{n, d * img_.mlp_ratio},
                            img_.neuron);
    mlp_out.emplace_back(g, std::vector<int64_t>{n, d}, img_.neuron);
    mlp_res.emplace_back(g, std::vector<int64_t>{n, d}, img_.neuron);
  }

  const float inv_sqrt_dh = 1.0f / std::sqrt(static_cast<float>(dh));
  std::vector<Var> flats;
  for (int64_t t = 0; t < steps; ++t) {
    Tensor patches = patchify(spikes.slice(t), img_.patch_size);
    if (stats != nullptr)
      stats->feed_cost("img.patch",
                       kernels::sum_f64(patches.data.data(), patches.numel()),
                       static_cast<double>(patches.numel()));
    Var x = g.constant(std::move(patches));
    Var current = g.add(g.add(g.matmul(x, leaf("img.patch.w")),
                              leaf("img.patch.b")),
                        leaf("img.pos"));
    Var s = lif_probe(g, embed, current, "img.embed", stats);

    for (int64_t blk = 0; blk < img_.depth; ++blk) {
      const std::string bp = "img.blk" + std::to_string(blk) + ".";
      const double s_spikes = spike_count(g, s);
      const double s_slots = static_cast<double>(n * d);
      if (stats != nullptr) {
        stats->feed_cost(bp + "attn.q", s_spikes, s_slots);
        stats->feed_cost(bp + "attn.k", s_spikes, s_slots);
        stats->feed_cost(bp + "attn.v", s_spikes, s_slots);
      }
      Var attn_sum;
      for (int64_t h = 0; h < img_.heads; ++h) {
        const std::string hp = bp + "attn.h" + std::to_string(h) + ".";
        HeadCells& cells = heads[blk][static_cast<size_t>(h)];
        Var q = lif_probe(
            g, cells.q,
            g.add(g.matmul(s, leaf(hp + "wq")), leaf(hp + "bq")),
            bp + "attn.q", stats);
        Var k = lif_probe(
            g, cells.k,
            g.add(g.matmul(s, leaf(hp + "wk")), leaf(hp + "bk")),
            bp + "attn.k", stats);
        Var v = lif_probe(
            g, cells.v,
            g.add(g.matmul(s, leaf(hp + "wv")), leaf(hp + "bv")),
            bp + "attn.v", stats);
        if (stats != nullptr)
          stats->feed_cost(bp + "attn.scores",
                           spike_count(g, q) + spike_count(g, k),
                           2.0 * static_cast<double>(n * dh));
        Var scores =
            g.scale(g.matmul(q, g.transpose(k)), inv_sqrt_dh);
        Var a = lif_probe(g, cells.score, scores, bp + "attn.scores", stats);
        if (stats != nullptr)
          stats->feed_cost(bp + "attn.av",
                           spike_count(g, a) + spike_count(g, v),
                           static_cast<double>(n * n + n * dh));
        Var av = lif_probe(g, cells.av, g.matmul(a, v), bp + "attn.av", stats);
        if (stats != nullptr)
          stats->feed_cost(bp + "attn.out", spike_count(g, av),
                           static_cast<double>(n * dh));
        Var head_out = g.matmul(av, leaf(hp + "wo"));
        attn_sum = h == 0 ? head_out : g.add(attn_sum, head_out);
      }
      Var o = g.add(attn_sum, leaf(bp + "attn.bo"));
      Var attn_spikes =
          lif_probe(g, attn_out[blk], o, bp + "attn.lif_out", stats);
      s = lif_probe(g, attn_res[blk], g.add(s, attn_spikes),
                    bp + "attn.residual", stats);

      if (stats != nullptr)
        stats->feed_cost(bp + "mlp.fc1", spike_count(g, s),
                         static_cast<double>(n * d));
      Var hidden = lif_probe(
          g, mlp_hidden[blk],
          g.add(g.matmul(s, leaf(bp + "mlp.w1")), leaf(bp + "mlp.b1")),
          bp + "mlp.hidden", stats);
      if (stats != nullptr)
        stats->feed_cost(bp + "mlp.fc2", spike_count(g, hidden),
                         static_cast<double>(n * d * img_.mlp_ratio));
      Var m = lif_probe(
          g, mlp_out[blk],
          g.add(g.matmul(hidden, leaf(bp + "mlp.w2")), leaf(bp + "mlp.b2")),
          bp + "mlp.out", stats);
      s = lif_probe(g, mlp_res[blk], g.add(s, m), bp + "mlp.residual", stats);
    }
    flats.push_back(g.reshape(s, {1, n * d}));
  }
  return readout_graph(g, flats, "img", /*layer_norm=*/false);
}

Var DualStreamModel::text_forward(Graph& g,
                                  const std::vector<int64_t>& token_ids,
                                  ForwardStats* stats) {
  const int64_t len = txt_.max_len, e = txt_.embed_dim;
  // Pad/truncate to max_len; -1 is the PAD slot, embedded as zeros.
  Tensor x = Tensor::zeros({len * e});
  for (int64_t pos = 0; pos < len; ++pos) {
    if (pos >= static_cast<int64_t>(token_ids.size())) break;
    const int64_t row = token_ids[static_cast<size_t>(pos)];
    if (row < 0) continue;
    if (row >= static_cast<int64_t>(word_embeddings_.size()))
      throw data_error("token row " + std::to_string(row) +
                       " outside the embedding store");
    const float* vec = word_embeddings_.find(
        word_embeddings_.ids()[static_cast<size_t>(row)]);
    for (int64_t i = 0; i < e; ++i) x.data[pos * e + i] = vec[i];
  }
  const SpikeTensor train = encode_constant(x, txt_.time_steps, txt_.neuron);

  if (stats != nullptr) {
    stats->time_steps = txt_.time_steps;
    stats->items += 1;
    int64_t prev = txt_.input_dim();
    for (size_t i = 0; i < txt_.hidden_dims.size(); ++i) {
      stats->register_cost("txt.fc" + std::to_string(i), "fc",
                           static_cast<double>(prev) *
                               static_cast<double>(txt_.hidden_dims[i]));
      prev = txt_.hidden_dims[i];
    }
    stats->register_real("txt.readout.proj",
                         static_cast<double>(txt_.spike_dim()) *
                             static_cast<double>(txt_.out_dim));
  }

  LeafCache leaf{g, params_, {}};
  std::vector<GraphLifCell> cells;
  for (int64_t hd : txt_.hidden_dims)
    cells.emplace_back(g, std::vector<int64_t>{1, hd}, txt_.neuron);

  std::vector<Var> step_spikes;
  for (int64_t t = 0; t < txt_.time_steps; ++t) {
    Tensor slice = train.slice(t);
    slice.shape = {1, len * e};
    Var h = g.constant(std::move(slice));
    for (size_t i = 0; i < txt_.hidden_dims.size(); ++i) {
      const std::string name = "txt.fc" + std::to_string(i);
      if (stats != nullptr)
        stats->feed_cost(name, spike_count(g, h),
                         static_cast<double>(g.value(h).numel()));
      Var lin = g.add(g.matmul(h, leaf(name + ".w")), leaf(name + ".b"));
      h = lif_probe(g, cells[i], lin, name, stats);
    }
    step_spikes.push_back(h);
  }
  return readout_graph(g, step_spikes, "txt", /*layer_norm=*/true);
}

SpikeTensor DualStreamModel::encode_image(const Tensor& raw_hwc) const {
  if (raw_hwc.rank() != 3)
    throw data_error("image tensor must be [H,W,C], got " +
                     raw_hwc.shape_str());
  if (raw_hwc.shape[2] != img_.channels)
    throw data_error("image has " + std::to_string(raw_hwc.shape[2]) +
                     " channels, run is configured for " +
                     std::to_string(img_.channels));
  ImageU8 u8;
  u8.height = raw_hwc.shape[0];
  u8.width = raw_hwc.shape[1];
  u8.channels = raw_hwc.shape[2];
  u8.data.resize(raw_hwc.data.size());
  for (size_t i = 0; i < raw_hwc.data.size(); ++i) {
    float v = raw_hwc.data[i];
    if (v < 0.0f) v = 0.0f;
    if (v > 255.0f) v = 255.0f;
    u8.data[i] = static_cast<uint8_t>(std::lround(v));
  }
  const Tensor norm = normalize_image(u8, img_.mean, img_.stddev,
                                      img_.image_size, img_.image_size);
  return encode_constant(norm, img_.time_steps, img_.neuron);
}

std::vector<int64_t> DualStreamModel::token_ids(const std::string& text) const {
  std::vector<int64_t> ids;
  for (const std::string& tok : tokenize(text)) {
    auto it = vocab_.find(tok);
    ids.push_back(it == vocab_.end() ? unk_row_ : it->second);
    if (static_cast<int64_t>(ids.size()) == txt_.max_len) break;
  }
  return ids;
}

Tensor DualStreamModel::embed_image(const Tensor& raw_hwc,
                                    ForwardStats* stats) {
  const SpikeTensor train = encode_image(raw_hwc);
  Graph g;
  Var e = image_forward(g, train, stats);
  return g.value(e);
}

Tensor DualStreamModel::embed_text(const std::string& text,
                                   ForwardStats* stats) {
  Graph g;
  Var e = text_forward(g, token_ids(text), stats);
  return g.value(e);
}

std::vector<Tensor*> DualStreamModel::image_trainables() {
  return params_.with_prefix("img.");
}

std::vector<Tensor*> DualStreamModel::text_trainables() {
  return params_.with_prefix("txt.");
}

void DualStreamModel::save_params(io::Checkpoint& ckpt) const {
  for (size_t i = 0; i < params_.size(); ++i)
    ckpt.params.emplace_back(params_.name(i), params_.tensor(i));
}

void DualStreamModel::load_params(const io::Checkpoint& ckpt) {
  for (size_t i = 0; i < params_.size(); ++i) {
    const Tensor& stored = ckpt.require(params_.name(i));
    Tensor& live = params_.tensor(i);
    if (stored.shape != live.shape)
      throw data_error("checkpoint parameter " + params_.name(i) +
                       " has shape " + stored.shape_str() + ", model wants " +
                       live.shape_str());
    live.data = stored.data;
  }
}

}  // namespace spikestream

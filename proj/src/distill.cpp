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

#include "spikestream/distill.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "spikestream/error.hpp"
#include "spikestream/parallel.hpp"
#include "spikestream/rng.hpp"

namespace spikestream {

PretrainCfg PretrainCfg::from_config(const Config& cfg) {
  PretrainCfg p;
  p.epochs_img = cfg.get_i64("pretrain.epochs_img");
  p.batch_img = cfg.get_i64("pretrain.batch_img");
  p.epochs_txt = cfg.get_i64("pretrain.epochs_txt");
  p.batch_txt = cfg.get_i64("pretrain.batch_txt");
  p.lr_txt = cfg.get_f64("pretrain.lr_txt");
  p.validate();
  return p;
}

void PretrainCfg::validate() const {
  if (epochs_img < 0 || epochs_txt < 0)
    throw config_error("pretrain epoch counts must be nonnegative");
  if (batch_img < 1 || batch_txt < 1)
    throw config_error("pretrain batch sizes must be positive");
  if (!(lr_txt > 0.0)) throw config_error("text learning rate must be positive");
}

double lr_at(int64_t epoch) {
  if (epoch < 0) throw contract_error("negative epoch in lr schedule");
  if (epoch >= 50) return 5e-4;
  if (epoch == 0) return 5e-3;  // closed-form value at the cosine's peak
  return 2.75e-3 + 2.25e-3 * std::cos(M_PI * static_cast<double>(epoch) / 50.0);
}

double cosine_align_loss(const Tensor& student, const Tensor& teacher) {
  if (!student.same_shape(teacher))
    throw dimension_error("cosine loss over mismatched shapes " +
                          student.shape_str() + " vs " + teacher.shape_str());
  double dot = 0.0, ns = 0.0, nt = 0.0;
  for (int64_t i = 0; i < student.numel(); ++i) {
    const double s = student.data[i];
    const double t = teacher.data[i];
    dot += s * t;
    ns += s * s;
    nt += t * t;
  }
  if (ns == 0.0 || nt == 0.0)
    throw domain_error("cosine loss over a zero-norm vector");
  return 1.0 - dot / (std::sqrt(ns) * std::sqrt(nt));
}

Var cosine_align_loss_node(Graph& g, Var student, const Tensor& teacher,
                           const std::string& item_id) {
  const Tensor& sv = g.value(student);
  if (!sv.same_shape(teacher))
    throw dimension_error("student/teacher dim mismatch for item " + item_id);
  double nt = 0.0;
  for (float v : teacher.data) nt += static_cast<double>(v) * v;
  if (nt == 0.0)
    throw domain_error("teacher embedding for item " + item_id +
                       " has zero norm");
  Var t = g.constant(teacher);
  Var dot = g.sum(g.mul(student, t));
  Var ns2 = g.sum(g.mul(student, student));
  if (g.value(ns2).data[0] == 0.0f)
    throw domain_error("student embedding for item " + item_id +
                       " has zero norm");
  Var denom = g.scale(g.sqrt(ns2), static_cast<float>(std::sqrt(nt)));
  Var cos = g.div(dot, denom);
  return g.offset(g.scale(cos, -1.0f), 1.0f);
}

std::string loss_log_to_text(const std::vector<LossRecord>& log,
                             uint64_t seed) {
  std::ostringstream os;
  os << "# seed=" << seed << "\n";
  char buf[64];
  for (const LossRecord& r : log) {
    std::snprintf(buf, sizeof buf, "%.10g", r.loss);
    os << r.epoch << "\t" << r.split << "\t" << buf << "\n";
  }
  return os.str();
}

std::vector<std::string> render_prompts(
    const std::vector<std::string>& labels,
    const std::vector<std::string>& templates) {
  std::vector<std::string> prompts;
  for (const std::string& tmpl : templates) {
    const size_t slot = tmpl.find("{}");
    if (slot == std::string::npos)
      throw config_error("template has no {} slot: " + tmpl);
    for (const std::string& label : labels) {
      std::string p = tmpl;
      p.replace(slot, 2, label);
      prompts.push_back(p);
    }
  }
  return prompts;
}

namespace {

// One distillation epoch over cached inputs. Gradients are flushed and the
// loss is accumulated in item order, so results do not depend on threads.
template <typename ForwardFn>
double run_epoch(DualStreamModel& model, Optimizer& opt, int64_t count,
                 int64_t batch, double lr, const std::vector<size_t>& order,
                 const std::vector<Tensor>& teachers,
                 const std::vector<std::string>& ids, ForwardFn&& forward) {
  double epoch_loss = 0.0;
  for (int64_t start = 0; start < count; start += batch) {
    const int64_t bn = std::min(batch, count - start);
    opt.zero_grads();
    std::vector<Graph> graphs;
    graphs.reserve(static_cast<size_t>(bn));
    for (int64_t j = 0; j < bn; ++j) graphs.emplace_back();
    std::vector<double> item_loss(static_cast<size_t>(bn), 0.0);
    parallel_for_items(bn, [&](int64_t j) {
      const size_t idx = order[static_cast<size_t>(start + j)];
      Graph& g = graphs[static_cast<size_t>(j)];
      Var e = forward(g, idx);
      Var loss = cosine_align_loss_node(g, e, teachers[idx], ids[idx]);
      g.backward_local(loss);
      item_loss[static_cast<size_t>(j)] =
          static_cast<double>(g.value(loss).data[0]);
    });
    for (int64_t j = 0; j < bn; ++j) {
      graphs[static_cast<size_t>(j)].flush_leaf_grads(1.0f);
      epoch_loss += item_loss[static_cast<size_t>(j)];
    }
    opt.step(lr);
  }
  return epoch_loss;
}

}  // namespace

PretrainResult pretrain(DualStreamModel& model,
                        const std::vector<io::DatasetItem>& images,
                        const std::vector<std::string>& prompts,
                        const io::TeacherStore& teacher_images,
                        const io::TeacherStore& teacher_texts,
                        const PretrainCfg& cfg, const Config& full_cfg,
                        uint64_t seed) {
  cfg.validate();
  if (teacher_images.kind() != io::StoreKind::kImageEmbedding)
    throw data_error("image teacher store has kind " +
                     std::string(io::store_kind_name(teacher_images.kind())));
  if (teacher_texts.kind() != io::StoreKind::kTextEmbedding)
    throw data_error("text teacher store has kind " +
                     std::string(io::store_kind_name(teacher_texts.kind())));
  if (static_cast<int64_t>(teacher_images.dim()) != model.out_dim() ||
      static_cast<int64_t>(teacher_texts.dim()) != model.out_dim())
    throw data_error("teacher dim does not match the model embedding dim " +
                     std::to_string(model.out_dim()));

  // Inputs are constant across epochs; cache the spike trains and targets.
  std::vector<SpikeTensor> image_trains;
  std::vector<Tensor> image_targets;
  std::vector<std::string> image_ids;
  for (const io::DatasetItem& item : images) {
    image_targets.push_back(teacher_images.vector_of(item.id));
    image_trains.push_back(model.encode_image(io::load_item_tensor(item)));
    image_ids.push_back(item.id);
  }
  std::vector<std::vector<int64_t>> prompt_tokens;
  std::vector<Tensor> prompt_targets;
  for (const std::string& p : prompts) {
    prompt_targets.push_back(teacher_texts.vector_of(p));
    prompt_tokens.push_back(model.token_ids(p));
  }

  Rng rng(seed);
  PretrainResult result;

  Optimizer opt_img(model.image_trainables(), full_cfg);
  std::vector<size_t> order(image_trains.size());
  std::iota(order.begin(), order.end(), 0u);
  for (int64_t epoch = 0; epoch < cfg.epochs_img; ++epoch) {
    Rng erng = rng.fork(static_cast<uint64_t>(epoch));
    erng.shuffle(order);
    const double loss = run_epoch(
        model, opt_img, static_cast<int64_t>(order.size()), cfg.batch_img,
        lr_at(epoch), order, image_targets, image_ids,
        [&](Graph& g, size_t idx) {
          return model.image_forward(g, image_trains[idx]);
        });
    result.log.push_back({epoch, "img", loss});
  }

  Optimizer opt_txt(model.text_trainables(), full_cfg);
  std::vector<size_t> torder(prompt_tokens.size());
  std::iota(torder.begin(), torder.end(), 0u);
  for (int64_t epoch = 0; epoch < cfg.epochs_txt; ++epoch) {
    Rng erng = rng.fork(0x7e87ULL + static_cast<uint64_t>(epoch));
    erng.shuffle(torder);
    const double loss = run_epoch(
        model, opt_txt, static_cast<int64_t>(torder.size()), cfg.batch_txt,
        cfg.lr_txt, torder, prompt_targets, prompts,
        [&](Graph& g, size_t idx) {
          return model.text_forward(g, prompt_tokens[idx]);
        });
    result.log.push_back({epoch, "txt", loss});
  }
  return result;
}

}  // namespace spikestream

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

#include "spikestream/finetune.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "spikestream/error.hpp"
#include "spikestream/parallel.hpp"
#include "spikestream/rng.hpp"

namespace spikestream {

LabelSet LabelSet::make(std::vector<std::string> labels,
                        std::string template_str) {
  LabelSet ls;
  ls.labels = std::move(labels);
  ls.template_str = std::move(template_str);
  if (ls.labels.empty()) throw data_error("label set is empty");
  std::set<std::string> seen;
  for (const std::string& l : ls.labels)
    if (!seen.insert(l).second)
      throw data_error("duplicate label \"" + l + "\" in label set");
  if (ls.template_str.find("{}") == std::string::npos)
    throw config_error("prompt template has no {} slot: " + ls.template_str);
  return ls;
}

LabelSet LabelSet::load(const std::string& labels_path,
                        const std::string& template_str) {
  return make(io::read_lines(labels_path), template_str);
}

std::string LabelSet::prompt(size_t k) const {
  std::string p = template_str;
  p.replace(p.find("{}"), 2, labels.at(k));
  return p;
}

FinetuneCfg FinetuneCfg::from_config(const Config& cfg) {
  FinetuneCfg f;
  f.lambda = cfg.get_f64("finetune.lambda");
  f.epsilon = cfg.get_f64("finetune.epsilon");
  f.epochs = cfg.get_i64("finetune.epochs");
  f.batch = cfg.get_i64("finetune.batch");
  f.lr = cfg.get_f64("finetune.lr");
  f.validate();
  return f;
}

void FinetuneCfg::validate() const {
  if (lambda < 0.0) throw config_error("finetune.lambda must be nonnegative");
  if (!(epsilon > 0.0)) throw config_error("finetune.epsilon must be positive");
  if (epochs < 0 || batch < 1)
    throw config_error("finetune epochs/batch out of range");
}

Tensor one_hot(int64_t index, int64_t classes) {
  if (index < 0 || index >= classes)
    throw data_error("class index " + std::to_string(index) +
                     " out of range for " + std::to_string(classes));
  Tensor t = Tensor::zeros({classes});
  t.data[static_cast<size_t>(index)] = 1.0f;
  return t;
}

namespace {

void check_one_hot(const Tensor& t) {
  int64_t ones = 0;
  for (float v : t.data) {
    if (v == 1.0f)
      ++ones;
    else if (v != 0.0f)
      throw contract_error("target is not one-hot");
  }
  if (ones != 1) throw contract_error("target is not one-hot");
}

void check_distribution(const Tensor& p, const char* what) {
  double sum = 0.0;
  for (float v : p.data) {
    if (v < 0.0f)
      throw domain_error(std::string(what) + " has a negative entry");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > 1e-5)
    throw domain_error(std::string(what) + " sums to " + std::to_string(sum));
}

}  // namespace

double ce_loss(const Tensor& probs, const Tensor& onehot) {
  if (!probs.same_shape(onehot))
    throw dimension_error("probs/target shape mismatch");
  check_one_hot(onehot);
  double loss = 0.0;
  for (int64_t k = 0; k < probs.numel(); ++k) {
    if (onehot.data[k] == 0.0f) continue;
    const float y = probs.data[k];
    if (!(y > 0.0f))
      throw domain_error("cross-entropy over a non-positive probability");
    loss -= std::log(static_cast<double>(y));
  }
  return loss;
}

double ce_loss_batch(const std::vector<Tensor>& probs,
                     const std::vector<Tensor>& onehots) {
  if (probs.empty() || probs.size() != onehots.size())
    throw contract_error("cross-entropy batch sizes disagree");
  double total = 0.0;
  for (size_t i = 0; i < probs.size(); ++i)
    total += ce_loss(probs[i], onehots[i]);
  return total / static_cast<double>(probs.size());
}

double kl_loss(const Tensor& teacher, const Tensor& student, double epsilon) {
  if (!teacher.same_shape(student))
    throw dimension_error("teacher/student shape mismatch in KL");
  if (!(epsilon > 0.0)) throw contract_error("KL epsilon must be positive");
  check_distribution(teacher, "teacher distribution");
  check_distribution(student, "student distribution");
  double loss = 0.0;
  for (int64_t k = 0; k < teacher.numel(); ++k) {
    const double h = teacher.data[k];
    const double y = student.data[k];
    loss += h * std::log((h + epsilon) / (y + epsilon));
  }
  return loss;
}

double kl_loss_batch(const std::vector<Tensor>& teacher,
                     const std::vector<Tensor>& student, double epsilon) {
  if (teacher.empty() || teacher.size() != student.size())
    throw contract_error("KL batch sizes disagree");
  double total = 0.0;
  for (size_t i = 0; i < teacher.size(); ++i)
    total += kl_loss(teacher[i], student[i], epsilon);
  return total / static_cast<double>(teacher.size());
}

double ft_loss(const Tensor& teacher_probs, const Tensor& student_probs,
               const Tensor& onehot, double lambda, double epsilon) {
  return kl_loss(teacher_probs, student_probs, epsilon) +
         lambda * ce_loss(student_probs, onehot);
}

LabelEmbeddings embed_labels(DualStreamModel& model,
                             const std::vector<std::string>& labels,
                             const std::string& template_str) {
  if (template_str.find("{}") == std::string::npos)
    throw config_error("prompt template has no {} slot: " + template_str);
  LabelEmbeddings out;
  out.embeddings.resize(labels.size());
  out.norms.resize(labels.size());
  parallel_for_items(static_cast<int64_t>(labels.size()), [&](int64_t k) {
    std::string prompt = template_str;
    prompt.replace(prompt.find("{}"), 2, labels[static_cast<size_t>(k)]);
    out.embeddings[static_cast<size_t>(k)] = model.embed_text(prompt);
  });
  for (size_t k = 0; k < labels.size(); ++k) {
    double n2 = 0.0;
    for (float v : out.embeddings[k].data) n2 += static_cast<double>(v) * v;
    if (n2 == 0.0)
      throw domain_error("label \"" + labels[k] +
                         "\" embeds to a zero-norm vector");
    out.norms[k] = std::sqrt(n2);
  }
  return out;
}

ClassifyResult classify(const Tensor& image_embedding,
                        const LabelEmbeddings& labels, double temperature) {
  const size_t k = labels.embeddings.size();
  if (k < 2) throw contract_error("classification needs at least two labels");
  if (!(temperature > 0.0))
    throw config_error("softmax temperature must be positive");
  double n2 = 0.0;
  for (float v : image_embedding.data) n2 += static_cast<double>(v) * v;
  if (n2 == 0.0) throw domain_error("image embeds to a zero-norm vector");
  const double norm = std::sqrt(n2);

  std::vector<double> sims(k);
  for (size_t j = 0; j < k; ++j) {
    const Tensor& l = labels.embeddings[j];
    if (l.numel() != image_embedding.numel())
      throw dimension_error("label/image embedding dims disagree");
    double dot = 0.0;
    for (int64_t i = 0; i < l.numel(); ++i)
      dot += static_cast<double>(image_embedding.data[i]) * l.data[i];
    sims[j] = dot / (norm * labels.norms[j]) / temperature;
  }
  const double m = *std::max_element(sims.begin(), sims.end());
  double z = 0.0;
  std::vector<double> ez(k);
  for (size_t j = 0; j < k; ++j) {
    ez[j] = std::exp(sims[j] - m);
    z += ez[j];
  }
  ClassifyResult res;
  res.probs = Tensor::zeros({static_cast<int64_t>(k)});
  for (size_t j = 0; j < k; ++j)
    res.probs.data[j] = static_cast<float>(ez[j] / z);
  res.pred = argmax(res.probs);
  return res;
}

std::string finetune_log_to_text(const std::vector<FinetuneRecord>& log,
                                 uint64_t seed) {
  std::ostringstream os;
  os << "# seed=" << seed << "\n";
  char buf[96];
  for (const FinetuneRecord& r : log) {
    std::snprintf(buf, sizeof buf, "%" PRId64 "\t%.10g\t%.10g",
                  static_cast<int64_t>(r.epoch), r.train_loss,
                  r.train_accuracy);
    os << buf << "\n";
  }
  return os.str();
}

namespace {

struct ItemCache {
  std::vector<SpikeTensor> trains;
  std::vector<int64_t> targets;
  std::vector<std::string> ids;
};

ItemCache cache_items(DualStreamModel& model,
                      const std::vector<io::DatasetItem>& items,
                      int64_t num_classes) {
  ItemCache c;
  for (const io::DatasetItem& item : items) {
    if (item.label < 0 || item.label >= num_classes)
      throw data_error("class index " + std::to_string(item.label) +
                       " out of range for item " + item.id);
    c.trains.push_back(model.encode_image(io::load_item_tensor(item)));
    c.targets.push_back(item.label);
    c.ids.push_back(item.id);
  }
  return c;
}

double accuracy_over(DualStreamModel& model, const ItemCache& cache,
                     const LabelEmbeddings& labels, double temperature) {
  const int64_t n = static_cast<int64_t>(cache.trains.size());
  std::vector<int> correct(static_cast<size_t>(n), 0);
  parallel_for_items(n, [&](int64_t i) {
    Graph g;
    Var e = model.image_forward(g, cache.trains[static_cast<size_t>(i)]);
    const ClassifyResult res = classify(g.value(e), labels, temperature);
    correct[static_cast<size_t>(i)] =
        res.pred == cache.targets[static_cast<size_t>(i)] ? 1 : 0;
  });
  int64_t hits = 0;
  for (int c : correct) hits += c;
  return static_cast<double>(hits) / static_cast<double>(n);
}

// Graph-side probs: softmax over cosine similarities with the cached label
// embeddings; only the image embedding carries gradients.
std::vector<Var> classify_nodes(Graph& g, Var image_embedding,
                                const LabelEmbeddings& labels,
                                double temperature,
                                const std::string& item_id) {
  Var ns2 = g.sum(g.mul(image_embedding, image_embedding));
  if (g.value(ns2).data[0] == 0.0f)
    throw domain_error("image " + item_id + " embeds to a zero-norm vector");
  Var norm = g.sqrt(ns2);
  const size_t k = labels.embeddings.size();
  std::vector<Var> scaled(k);
  for (size_t j = 0; j < k; ++j) {
    Var dot = g.sum(g.mul(image_embedding, g.constant(labels.embeddings[j])));
    Var cos = g.div(dot, g.scale(norm, static_cast<float>(labels.norms[j])));
    scaled[j] = g.scale(cos, static_cast<float>(1.0 / temperature));
  }
  float m = g.value(scaled[0]).data[0];
  for (size_t j = 1; j < k; ++j)
    m = std::max(m, g.value(scaled[j]).data[0]);
  std::vector<Var> ez(k);
  Var total;
  for (size_t j = 0; j < k; ++j) {
    ez[j] = g.exp(g.offset(scaled[j], -m));
    total = j == 0 ? ez[j] : g.add(total, ez[j]);
  }
  std::vector<Var> probs(k);
  for (size_t j = 0; j < k; ++j) probs[j] = g.div(ez[j], total);
  return probs;
}

Var ft_loss_node(Graph& g, const std::vector<Var>& probs,
                 const Tensor& teacher, int64_t target, double lambda,
                 double epsilon) {
  // KL = sum_k h_k log(h_k + eps) - sum_k h_k log(p_k + eps)
  double teacher_entropy_term = 0.0;
  for (float h : teacher.data)
    teacher_entropy_term +=
        static_cast<double>(h) *
        std::log(static_cast<double>(h) + epsilon);
  Var acc;
  for (size_t jj = 0; jj < probs.size(); ++jj) {
    const float h = teacher.data[jj];
    Var term = g.scale(g.log(g.offset(probs[jj], static_cast<float>(epsilon))),
                       -h);
    acc = jj == 0 ? term : g.add(acc, term);
  }
  Var kl = g.offset(acc, static_cast<float>(teacher_entropy_term));
  Var ce = g.scale(g.log(probs[static_cast<size_t>(target)]), -1.0f);
  return g.add(kl, g.scale(ce, static_cast<float>(lambda)));
}

}  // namespace

FinetuneResult finetune(DualStreamModel& model,
                        const std::vector<io::DatasetItem>& train,
                        const LabelSet& labels,
                        const io::TeacherStore& teacher_probs,
                        const FinetuneCfg& cfg, const Config& full_cfg,
                        uint64_t seed) {
  cfg.validate();
  if (train.empty()) throw data_error("empty fine-tuning set");
  const int64_t k = static_cast<int64_t>(labels.size());
  if (k < 2) throw data_error("fine-tuning needs at least two labels");
  if (teacher_probs.kind() != io::StoreKind::kClassProbabilities)
    throw data_error("teacher store has kind " +
                     std::string(io::store_kind_name(teacher_probs.kind())) +
                     ", expected class_probabilities");
  if (static_cast<int64_t>(teacher_probs.dim()) != k)
    throw data_error("teacher probabilities have " +
                     std::to_string(teacher_probs.dim()) +
                     " classes, label set has " + std::to_string(k));
  const double temperature = full_cfg.get_f64("softmax.temperature");

  ItemCache cache = cache_items(model, train, k);
  std::vector<Tensor> teachers;
  for (const std::string& id : cache.ids)
    teachers.push_back(teacher_probs.vector_of(id));

  // Text stream frozen: label prompts are embedded once, before any update.
  const LabelEmbeddings lemb =
      embed_labels(model, labels.labels, labels.template_str);

  Optimizer opt(model.image_trainables(), full_cfg);
  Rng rng(seed);
  const int64_t n = static_cast<int64_t>(cache.trains.size());
  std::vector<size_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0u);

  FinetuneResult result;
  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng erng = rng.fork(static_cast<uint64_t>(epoch));
    erng.shuffle(order);
    double epoch_loss = 0.0;
    for (int64_t start = 0; start < n; start += cfg.batch) {
      const int64_t bn = std::min(cfg.batch, n - start);
      opt.zero_grads();
      std::vector<Graph> graphs;
      graphs.reserve(static_cast<size_t>(bn));
      for (int64_t j = 0; j < bn; ++j) graphs.emplace_back();
      std::vector<double> item_loss(static_cast<size_t>(bn), 0.0);
      parallel_for_items(bn, [&](int64_t j) {
        const size_t idx = order[static_cast<size_t>(start + j)];
        Graph& g = graphs[static_cast<size_t>(j)];
        Var e = model.image_forward(g, cache.trains[idx]);
        const std::vector<Var> probs =
            classify_nodes(g, e, lemb, temperature, cache.ids[idx]);
        Var loss = ft_loss_node(g, probs, teachers[idx], cache.targets[idx],
                                cfg.lambda, cfg.epsilon);
        g.backward_local(loss);
        item_loss[static_cast<size_t>(j)] =
            static_cast<double>(g.value(loss).data[0]);
      });
      const float inv = 1.0f / static_cast<float>(bn);
      for (int64_t j = 0; j < bn; ++j) {
        graphs[static_cast<size_t>(j)].flush_leaf_grads(inv);
        epoch_loss += item_loss[static_cast<size_t>(j)];
      }
      opt.step(cfg.lr);
    }
    const double acc = accuracy_over(model, cache, lemb, temperature);
    result.log.push_back(
        {epoch, epoch_loss / static_cast<double>(n), acc});
  }
  return result;
}

double evaluate_accuracy(DualStreamModel& model,
                         const std::vector<io::DatasetItem>& items,
                         const LabelSet& labels, double temperature) {
  if (items.empty()) throw data_error("empty evaluation set");
  ItemCache cache =
      cache_items(model, items, static_cast<int64_t>(labels.size()));
  const LabelEmbeddings lemb =
      embed_labels(model, labels.labels, labels.template_str);
  return accuracy_over(model, cache, lemb, temperature);
}

std::string robust_report_to_text(const std::vector<RobustRecord>& records,
                                  uint64_t seed) {
  std::ostringstream os;
  os << "# seed=" << seed << "\n";
  char buf[64];
  for (const RobustRecord& r : records) {
    std::snprintf(buf, sizeof buf, "%.10g", r.accuracy);
    os << r.setting << "\t" << r.seed << "\t" << buf << "\n";
  }
  return os.str();
}

namespace {

double accuracy_with_candidates(DualStreamModel& model, const ItemCache& cache,
                                const LabelEmbeddings& all,
                                size_t candidate_count, double temperature) {
  LabelEmbeddings view;
  view.embeddings.assign(all.embeddings.begin(),
                         all.embeddings.begin() + candidate_count);
  view.norms.assign(all.norms.begin(), all.norms.begin() + candidate_count);
  return accuracy_over(model, cache, view, temperature);
}

}  // namespace

std::vector<RobustRecord> robustness_expand(
    DualStreamModel& model, const std::vector<io::DatasetItem>& test,
    const LabelSet& labels, const std::vector<std::string>& distractors,
    const std::vector<int64_t>& factors, double temperature) {
  const int64_t k = static_cast<int64_t>(labels.size());
  int64_t max_factor = 1;
  for (int64_t f : factors) {
    if (f < 1) throw config_error("expansion factor must be at least 1");
    max_factor = std::max(max_factor, f);
  }
  const int64_t needed = (max_factor - 1) * k;
  if (static_cast<int64_t>(distractors.size()) < needed)
    throw data_error("need " + std::to_string(needed) + " distractors, have " +
                     std::to_string(distractors.size()));

  std::vector<std::string> candidates = labels.labels;
  candidates.insert(candidates.end(), distractors.begin(),
                    distractors.begin() + needed);

  ItemCache cache = cache_items(model, test, k);
  const LabelEmbeddings all =
      embed_labels(model, candidates, labels.template_str);

  std::vector<RobustRecord> records;
  records.push_back({"baseline", "-",
                     accuracy_with_candidates(model, cache, all,
                                              static_cast<size_t>(k),
                                              temperature)});
  for (int64_t f : factors) {
    const size_t count = static_cast<size_t>(f * k);
    records.push_back({"expand_x" + std::to_string(f), "-",
                       accuracy_with_candidates(model, cache, all, count,
                                                temperature)});
  }
  return records;
}

std::vector<RobustRecord> robustness_replace(
    DualStreamModel& model, const std::vector<io::DatasetItem>& test,
    const LabelSet& labels,
    const std::vector<std::pair<std::string, std::string>>& substitutes,
    const std::vector<int64_t>& rates_percent,
    const std::vector<uint64_t>& seeds, double temperature) {
  const int64_t k = static_cast<int64_t>(labels.size());
  std::unordered_map<std::string, std::string> subs;
  for (const auto& [orig, sub] : substitutes) subs[orig] = sub;
  for (const std::string& l : labels.labels)
    if (!subs.count(l))
      throw data_error("no substitute label provided for \"" + l + "\"");
  if (seeds.empty()) throw config_error("replacement needs at least one seed");

  ItemCache cache = cache_items(model, test, k);

  const auto run_once = [&](int64_t rate, uint64_t seed) {
    const int64_t m =
        (rate * k + 99) / 100;  // ceil(p * K) with p = rate / 100
    std::vector<size_t> idx(static_cast<size_t>(k));
    std::iota(idx.begin(), idx.end(), 0u);
    Rng rng(seed);
    rng.shuffle(idx);
    std::vector<std::string> swapped = labels.labels;
    for (int64_t j = 0; j < m; ++j)
      swapped[idx[static_cast<size_t>(j)]] =
          subs.at(labels.labels[idx[static_cast<size_t>(j)]]);
    const LabelEmbeddings lemb =
        embed_labels(model, swapped, labels.template_str);
    return accuracy_over(model, cache, lemb, temperature);
  };

  std::vector<RobustRecord> records;
  for (int64_t rate : rates_percent) {
    if (rate < 0 || rate > 100)
      throw config_error("replacement rate must be a percentage");
    if (rate == 0 || rate == 100) {
      // No randomness in which labels change; one run suffices.
      records.push_back({"replace_p" + std::to_string(rate), "-",
                         run_once(rate, seeds[0])});
      continue;
    }
    std::vector<double> accs;
    for (uint64_t s : seeds) {
      accs.push_back(run_once(rate, s));
      records.push_back({"replace_p" + std::to_string(rate),
                         std::to_string(s), accs.back()});
    }
    double mean = 0.0;
    for (double a : accs) mean += a;
    mean /= static_cast<double>(accs.size());
    double var = 0.0;
    for (double a : accs) var += (a - mean) * (a - mean);
    var /= static_cast<double>(accs.size());
    records.push_back({"replace_p" + std::to_string(rate), "mean", mean});
    records.push_back({"replace_p" + std::to_string(rate), "var", var});
  }
  return records;
}

}  // namespace spikestream

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
#include "spikestream/io.hpp"

namespace spikestream {

// Zero-shot classification over prompt-templated labels, the dual
// cross-entropy + KL fine-tuning objective, and the label-noise robustness
// harnesses.

struct LabelSet {
  std::vector<std::string> labels;  // unique; order defines class indices
  std::string template_str;

  static LabelSet load(const std::string& labels_path,
                       const std::string& template_str);
  static LabelSet make(std::vector<std::string> labels,
                       std::string template_str);
  std::string prompt(size_t k) const;
  size_t size() const { return labels.size(); }
};

struct FinetuneCfg {
  double lambda = 1.0;
  double epsilon = 1e-10;
  int64_t epochs = 400;
  int64_t batch = 196;
  double lr = 5e-4;

  static FinetuneCfg from_config(const Config& cfg);
  void validate() const;
};

// -(1/n) sum t . log y over the batch; per-item targets are one-hot.
double ce_loss(const Tensor& probs, const Tensor& onehot);
double ce_loss_batch(const std::vector<Tensor>& probs,
                     const std::vector<Tensor>& onehots);

// (1/n) sum_k h_k log((h_k + eps)/(y_k + eps)); exact zero when h == y.
double kl_loss(const Tensor& teacher, const Tensor& student, double epsilon);
double kl_loss_batch(const std::vector<Tensor>& teacher,
                     const std::vector<Tensor>& student, double epsilon);

// L_FT = L_KL + lambda * L_CE.
double ft_loss(const Tensor& teacher_probs, const Tensor& student_probs,
               const Tensor& onehot, double lambda, double epsilon);

Tensor one_hot(int64_t index, int64_t classes);

// Label-prompt embeddings are computed once per label set and reused.
struct LabelEmbeddings {
  std::vector<Tensor> embeddings;
  std::vector<double> norms;
};
LabelEmbeddings embed_labels(DualStreamModel& model,
                             const std::vector<std::string>& labels,
                             const std::string& template_str);

struct ClassifyResult {
  Tensor probs;  // [K], sums to 1
  int64_t pred = 0;
};

// cos(image, label_k) over k -> softmax(./temperature) -> argmax.
ClassifyResult classify(const Tensor& image_embedding,
                        const LabelEmbeddings& labels, double temperature);

struct FinetuneRecord {
  int64_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
};

struct FinetuneResult {
  std::vector<FinetuneRecord> log;
};

std::string finetune_log_to_text(const std::vector<FinetuneRecord>& log,
                                 uint64_t seed);

// Minimizes L_KL + lambda * L_CE over the image-encoder (and its readout)
// parameters; the text encoder stays bit-frozen. Teacher probabilities are
// required per training id with K matching the label set.
FinetuneResult finetune(DualStreamModel& model,
                        const std::vector<io::DatasetItem>& train,
                        const LabelSet& labels,
                        const io::TeacherStore& teacher_probs,
                        const FinetuneCfg& cfg, const Config& full_cfg,
                        uint64_t seed);

double evaluate_accuracy(DualStreamModel& model,
                         const std::vector<io::DatasetItem>& items,
                         const LabelSet& labels, double temperature);

// ---- Robustness harness (expand / replace) -------------------------------

struct RobustRecord {
  std::string setting;  // "baseline", "expand_x2", "replace_p40", ...
  std::string seed;     // seed value, "-", "mean" or "var"
  double accuracy = 0.0;
};

std::string robust_report_to_text(const std::vector<RobustRecord>& records,
                                  uint64_t seed);

// Appends (factor-1)*K distractors; a prediction is correct iff it selects
// the original label. Distractor prefixes are nested across factors.
std::vector<RobustRecord> robustness_expand(
    DualStreamModel& model, const std::vector<io::DatasetItem>& test,
    const LabelSet& labels, const std::vector<std::string>& distractors,
    const std::vector<int64_t>& factors, double temperature);

// Swaps ceil(p/100 * K) seed-chosen labels for their substitutes. Rates
// strictly between 0 and 100 run three times with distinct seeds and report
// mean and variance.
std::vector<RobustRecord> robustness_replace(
    DualStreamModel& model, const std::vector<io::DatasetItem>& test,
    const LabelSet& labels,
    const std::vector<std::pair<std::string, std::string>>& substitutes,
    const std::vector<int64_t>& rates_percent,
    const std::vector<uint64_t>& seeds, double temperature);

}  // namespace spikestream

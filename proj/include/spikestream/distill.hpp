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

// Alignment pre-training: pull student embeddings toward frozen teacher
// embeddings with the cosine distillation loss, images first, then the
// prompt texts. Only student parameters are ever written.

struct PretrainCfg {
  int64_t epochs_img = 200;
  int64_t batch_img = 196;
  int64_t epochs_txt = 100;
  int64_t batch_txt = 256;
  double lr_txt = 5e-4;

  static PretrainCfg from_config(const Config& cfg);
  void validate() const;
};

// Image-encoder schedule: cosine decay from 5e-3 over the first 50 epochs,
// then 5e-4 flat. The anchor epochs return their closed-form values exactly.
double lr_at(int64_t epoch);

// 1 - cos(student, teacher), accumulated in double. Zero-norm inputs are a
// domain error; callers attach the offending item id.
double cosine_align_loss(const Tensor& student, const Tensor& teacher);

// Graph form for training. The teacher enters as a constant.
Var cosine_align_loss_node(Graph& g, Var student, const Tensor& teacher,
                           const std::string& item_id);

struct LossRecord {
  int64_t epoch = 0;
  std::string split;  // "img" | "txt"
  double loss = 0.0;
};

std::string loss_log_to_text(const std::vector<LossRecord>& log,
                             uint64_t seed);

// Label names crossed with prompt templates ("{}" is the slot).
std::vector<std::string> render_prompts(const std::vector<std::string>& labels,
                                        const std::vector<std::string>& templates);

struct PretrainResult {
  std::vector<LossRecord> log;
};

// Runs the image loop then the text loop, per the separate epoch budgets.
// Every dataset id must have a teacher record of the model's embedding dim.
PretrainResult pretrain(DualStreamModel& model,
                        const std::vector<io::DatasetItem>& images,
                        const std::vector<std::string>& prompts,
                        const io::TeacherStore& teacher_images,
                        const io::TeacherStore& teacher_texts,
                        const PretrainCfg& cfg, const Config& full_cfg,
                        uint64_t seed);

}  // namespace spikestream

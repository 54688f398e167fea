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

#include "spikestream/config.hpp"

#include <fstream>
#include <sstream>

#include "spikestream/error.hpp"

namespace spikestream {

namespace {
std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t");
  size_t e = s.find_last_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}
}  // namespace

void Config::register_key(const std::string& key, const std::string& value) {
  values_[key] = value;
}

Config Config::defaults() {
  Config c;
  c.register_key("seed", "0");
  c.register_key("threads", "0");
  c.register_key("parallel", "on");

  // Neuron dynamics and coding.
  c.register_key("time_steps", "4");
  c.register_key("beta", "0.9");
  c.register_key("threshold", "1.0");
  c.register_key("attn_threshold", "0.25");
  c.register_key("surrogate_alpha", "1.0");

  // Shared embedding space.
  c.register_key("out_dim", "512");
  c.register_key("readout.mode", "tdw");  // tdw | mean | ad | ar

  // Image stream.
  c.register_key("image.size", "32");
  c.register_key("image.channels", "3");
  c.register_key("image.patch_size", "8");
  c.register_key("image.depth", "4");
  c.register_key("image.dim", "384");
  c.register_key("image.heads", "6");
  c.register_key("image.mlp_ratio", "4");
  c.register_key("image.mean", "0.5,0.5,0.5");
  c.register_key("image.std", "0.5,0.5,0.5");

  // Text stream.
  c.register_key("text.hidden", "512");
  c.register_key("text.max_len", "20");

  // Pre-training.
  c.register_key("pretrain.epochs_img", "200");
  c.register_key("pretrain.batch_img", "196");
  c.register_key("pretrain.epochs_txt", "100");
  c.register_key("pretrain.batch_txt", "256");
  c.register_key("pretrain.lr_txt", "5e-4");
  c.register_key("optimizer", "sgd");  // sgd | adam
  c.register_key("adam.beta1", "0.9");
  c.register_key("adam.beta2", "0.999");
  c.register_key("adam.eps", "1e-8");

  // Fine-tuning.
  c.register_key("finetune.lambda", "1.0");
  c.register_key("finetune.epsilon", "1e-10");
  c.register_key("finetune.epochs", "400");
  c.register_key("finetune.batch", "196");
  c.register_key("finetune.lr", "5e-4");

  // Evaluation.
  c.register_key("eval.template", "A photo of a {}.");
  c.register_key("softmax.temperature", "1.0");

  // Data locations.
  c.register_key("data.train_manifest", "");
  c.register_key("data.eval_manifest", "");
  c.register_key("data.teacher_images", "");
  c.register_key("data.teacher_texts", "");
  c.register_key("data.teacher_probs", "");
  c.register_key("data.word_embeddings", "");
  c.register_key("data.templates", "");
  c.register_key("data.labels", "");
  c.register_key("checkpoint", "");

  // Robustness harness.
  c.register_key("robust.mode", "expand");  // expand | replace
  c.register_key("robust.factors", "2,5,8");
  c.register_key("robust.rates", "20,40,80,100");
  c.register_key("robust.aux_labels", "");
  c.register_key("robust.replace_map", "");
  c.register_key("robust.seeds", "1,2,3");

  // Energy profiling.
  c.register_key("energy.sample", "0");  // 0 = whole eval manifest
  c.register_key("energy.force_gamma", "");
  c.register_key("energy.per_layer_mean", "off");

  // Gradient checking.
  c.register_key("gradcheck.trials", "4");
  return c;
}

void Config::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw config_error("unknown config key: " + key);
  it->second = value;
}

void Config::set_kv(const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw config_error("override is not key=value: " + assignment);
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config " + path);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error(path + ":" + std::to_string(line_no) +
                         " is not key=value");
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

bool Config::has(const std::string& key) const {
  auto it = values_.find(key);
  return it != values_.end() && !it->second.empty();
}

const std::string& Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw config_error("unknown config key: " + key);
  return it->second;
}

double Config::get_f64(const std::string& key) const {
  const std::string& v = get(key);
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw config_error("config key " + key + " is not a number: " + v);
  }
}

int64_t Config::get_i64(const std::string& key) const {
  const std::string& v = get(key);
  try {
    size_t pos = 0;
    const int64_t d = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw config_error("config key " + key + " is not an integer: " + v);
  }
}

bool Config::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw config_error("config key " + key + " is not a flag: " + v);
}

std::vector<float> Config::get_floats(const std::string& key) const {
  const std::string& v = get(key);
  std::vector<float> out;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (part.empty()) continue;
    try {
      out.push_back(std::stof(part));
    } catch (const std::exception&) {
      throw config_error("config key " + key + " has a non-numeric entry: " +
                         part);
    }
  }
  return out;
}

std::vector<int64_t> Config::get_ints(const std::string& key) const {
  const std::string& v = get(key);
  std::vector<int64_t> out;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (part.empty()) continue;
    try {
      out.push_back(std::stoll(part));
    } catch (const std::exception&) {
      throw config_error("config key " + key + " has a non-integer entry: " +
                         part);
    }
  }
  return out;
}

std::string Config::to_text() const {
  std::ostringstream os;
  for (const auto& [k, v] : values_) os << k << "=" << v << "\n";
  return os.str();
}

}  // namespace spikestream

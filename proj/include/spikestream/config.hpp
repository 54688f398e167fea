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
#include <map>
#include <string>
#include <vector>

namespace spikestream {

/**
 * Flat key=value configuration. Every key must be pre-registered with a
 * default; unknown keys in files or overrides are rejected. The canonical
 * text form (sorted keys) is what gets logged into checkpoints.
 */
class Config {
 public:
  // All known keys with toolkit defaults.
  static Config defaults();

  // key=value lines, '#' starts a comment. Config errors name the offender.
  void load_file(const std::string& path);
  void set(const std::string& key, const std::string& value);
  void set_kv(const std::string& assignment);  // "key=value"

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  double get_f64(const std::string& key) const;
  int64_t get_i64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<float> get_floats(const std::string& key) const;    // comma list
  std::vector<int64_t> get_ints(const std::string& key) const;    // comma list

  std::string to_text() const;

 private:
  void register_key(const std::string& key, const std::string& value);
  std::map<std::string, std::string> values_;
};

}  // namespace spikestream

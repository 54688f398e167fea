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

#include <stdexcept>
#include <string>

namespace spikestream {

// Error taxonomy shared by the whole toolkit. The CLI maps kinds onto its
// exit codes: config -> 2, data/format -> 3, everything numeric -> 4.
enum class ErrorKind {
  kConfig,
  kData,
  kFormat,
  kDimension,
  kDomain,
  kContract,
  kNumeric,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

  int exit_code() const {
    switch (kind_) {
      case ErrorKind::kConfig:
        return 2;
      case ErrorKind::kData:
      case ErrorKind::kFormat:
        return 3;
      default:
        return 4;
    }
  }

  const char* kind_name() const {
    switch (kind_) {
      case ErrorKind::kConfig:
        return "config";
      case ErrorKind::kData:
        return "data";
      case ErrorKind::kFormat:
        return "format";
      case ErrorKind::kDimension:
        return "dimension";
      case ErrorKind::kDomain:
        return "domain";
      case ErrorKind::kContract:
        return "contract";
      default:
        return "numeric";
    }
  }

 private:
  ErrorKind kind_;
};

inline Error config_error(const std::string& msg) {
  return Error(ErrorKind::kConfig, msg);
}
inline Error data_error(const std::string& msg) {
  return Error(ErrorKind::kData, msg);
}
inline Error format_error(const std::string& msg) {
  return Error(ErrorKind::kFormat, msg);
}
inline Error dimension_error(const std::string& msg) {
  return Error(ErrorKind::kDimension, msg);
}
inline Error domain_error(const std::string& msg) {
  return Error(ErrorKind::kDomain, msg);
}
inline Error contract_error(const std::string& msg) {
  return Error(ErrorKind::kContract, msg);
}
inline Error numeric_error(const std::string& msg) {
  return Error(ErrorKind::kNumeric, msg);
}

}  // namespace spikestream

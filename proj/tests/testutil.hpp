#pragma once

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include "spikestream/rng.hpp"
#include "spikestream/tensor.hpp"

namespace testutil {

// Fresh scratch directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    dir_ = std::filesystem::temp_directory_path() /
           ("spikestream_" + tag + "_" + std::to_string(++counter) + "_" +
            std::to_string(::getpid()));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  std::string path(const std::string& name) const {
    return (dir_ / name).string();
  }
  std::string root() const { return dir_.string(); }

 private:
  std::filesystem::path dir_;
};

inline spikestream::Tensor random_tensor(std::vector<int64_t> shape, float lo,
                                         float hi, spikestream::Rng& rng) {
  return spikestream::Tensor::uniform(std::move(shape), lo, hi, rng);
}

inline bool bits_equal(const spikestream::Tensor& a,
                       const spikestream::Tensor& b) {
  if (a.shape != b.shape) return false;
  for (size_t i = 0; i < a.data.size(); ++i)
    if (a.data[i] != b.data[i]) return false;
  return true;
}

}  // namespace testutil

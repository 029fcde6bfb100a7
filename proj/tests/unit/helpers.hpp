// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "diffse/random.hpp"
#include "diffse/types.hpp"

namespace diffse::test {

inline Waveform random_waveform(std::size_t n, std::uint64_t seed, double scale = 0.3) {
  Rng rng(seed);
  Waveform w;
  w.samples.resize(n);
  for (double& v : w.samples) v = scale * rng.normal();
  return w;
}

inline Waveform scaled_copy(const Waveform& w, double gain) {
  Waveform out = w;
  for (double& v : out.samples) v *= gain;
  return out;
}

inline double relative_l2(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

inline double relative_l2(const ComplexSpectrogram& a, const ComplexSpectrogram& b) {
  return std::sqrt((a - b).abs2().sum() / b.abs2().sum());
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("diffse_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace diffse::test

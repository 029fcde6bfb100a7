// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "diffse/error.hpp"

namespace diffse {

using Complex = std::complex<double>;

/// F x K complex time-frequency matrix (rows: frequency bins, columns:
/// frames). Every diffusion quantity (x0, y, n, x_t, z) lives in this type.
using ComplexSpectrogram = Eigen::ArrayXXcd;

/// Per-bin real field with the same layout as a ComplexSpectrogram.
using RealField = Eigen::ArrayXXd;

inline constexpr int kPipelineSampleRate = 16000;

/// Real-valued mono audio.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = kPipelineSampleRate;

  [[nodiscard]] std::size_t size() const { return samples.size(); }
  [[nodiscard]] bool empty() const { return samples.empty(); }
};

inline void require_same_shape(const ComplexSpectrogram& a,
                               const ComplexSpectrogram& b,
                               std::string_view what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidInput(std::string(what) + ": shape mismatch (" +
                       std::to_string(a.rows()) + "x" +
                       std::to_string(a.cols()) + " vs " +
                       std::to_string(b.rows()) + "x" +
                       std::to_string(b.cols()) + ")");
  }
}

/// Sum of |b|^2 over all bins.
inline double squared_norm(const ComplexSpectrogram& s) {
  return s.abs2().sum();
}

inline bool all_finite(const ComplexSpectrogram& s) {
  return s.real().isFinite().all() && s.imag().isFinite().all();
}

}  // namespace diffse

// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "diffse/types.hpp"

namespace diffse {

enum class WindowKind { hann, sqrt_hann, rectangular };

std::string to_string(WindowKind kind);
WindowKind window_from_string(const std::string& name);

/// Analysis/synthesis settings. Defaults: 512-sample periodic Hann window,
/// hop 128 (75% overlap), magnitude compression c = 0.15 * |b|^0.5.
struct StftConfig {
  int window_len = 512;
  int hop = 128;
  WindowKind window = WindowKind::hann;
  bool compression_enabled = true;
  double compression_exponent = 0.5;
  double compression_scale = 0.15;

  /// Throws ConfigError unless window_len is a power of two, 0 < hop <=
  /// window_len and the compression parameters are invertible.
  void validate() const;

  /// Model-visible frequency bins: the Nyquist bin of the window_len-point
  /// transform is kept out of the spectrogram (window_len / 2 rows).
  [[nodiscard]] int freq_bins() const { return window_len / 2; }
};

/// Output of stft(). `bins` is the F x K model representation (compressed
/// when enabled). `nyquist` holds the uncompressed Nyquist row so that an
/// analysis can be synthesized exactly; spectrograms produced by a model
/// carry no Nyquist row and it is synthesized as zero.
struct SpectralAnalysis {
  ComplexSpectrogram bins;
  Eigen::ArrayXcd nyquist;
  std::size_t length = 0;
};

std::vector<double> make_window(WindowKind kind, int length);

/// Frames for a signal of n samples. Frames are centered: frame k covers
/// padded samples [k*hop, k*hop + window_len) after window_len/2 zeros are
/// prepended, and the tail is zero-padded so the last sample is covered.
/// K = floor(n / hop) + 1.
std::size_t frame_count(std::size_t n_samples, const StftConfig& cfg);

/// Steady-state sum over frames of the squared window at one sample. Zero
/// when the window/hop pair does not overlap-add to a constant.
double wola_gain(const StftConfig& cfg);

ComplexSpectrogram compress(const ComplexSpectrogram& s, const StftConfig& cfg);
ComplexSpectrogram decompress(const ComplexSpectrogram& s, const StftConfig& cfg);

/// Short-time Fourier transform: DFT of windowed frames scaled by
/// 1 / sqrt(window_len), so a frame keeps its energy.
/// Throws InvalidInput on an empty waveform or a non-pipeline sample rate.
SpectralAnalysis stft(const Waveform& w, const StftConfig& cfg);

/// Weighted overlap-add synthesis of exactly `out_len` samples. The input is
/// decompressed first when compression is enabled. Throws ConfigError for a
/// window/hop pair that does not satisfy the constant overlap-add condition.
Waveform istft(const ComplexSpectrogram& s, const StftConfig& cfg,
               std::size_t out_len);

/// Exact inverse of stft(), including the stored Nyquist row and length.
Waveform istft(const SpectralAnalysis& a, const StftConfig& cfg);

}  // namespace diffse

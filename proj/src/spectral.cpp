// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "diffse/spectral.hpp"

#include <cmath>
#include <algorithm>
#include <limits>
#include <numbers>

#include <unsupported/Eigen/FFT>

namespace diffse {

std::string to_string(WindowKind kind) {
  switch (kind) {
    case WindowKind::hann: return "hann";
    case WindowKind::sqrt_hann: return "sqrt_hann";
    case WindowKind::rectangular: return "rectangular";
  }
  return "?";
}

WindowKind window_from_string(const std::string& name) {
  if (name == "hann") return WindowKind::hann;
  if (name == "sqrt_hann") return WindowKind::sqrt_hann;
  if (name == "rectangular") return WindowKind::rectangular;
  throw ConfigError("unknown window '" + name + "'");
}

void StftConfig::validate() const {
  if (window_len < 2 || (window_len & (window_len - 1)) != 0) {
    throw ConfigError("stft: window_len must be a power of two >= 2, got " +
                      std::to_string(window_len));
  }
  if (hop <= 0 || hop > window_len) {
    throw ConfigError("stft: hop must be in [1, window_len], got " + std::to_string(hop));
  }
  if (!(compression_exponent > 0.0 && compression_exponent <= 1.0)) {
    throw ConfigError("stft: compression_exponent must be in (0, 1]");
  }
  if (!(compression_scale > 0.0) || !std::isfinite(compression_scale)) {
    throw ConfigError("stft: compression_scale must be positive");
  }
}

std::vector<double> make_window(WindowKind kind, int length) {
  std::vector<double> w(static_cast<std::size_t>(length), 1.0);
  if (kind == WindowKind::rectangular) return w;
  // Periodic Hann, the DFT-even variant that overlap-adds exactly.
  for (int n = 0; n < length; ++n) {
    const double h = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / length);
    w[static_cast<std::size_t>(n)] = kind == WindowKind::hann ? h : std::sqrt(h);
  }
  return w;
}

std::size_t frame_count(std::size_t n_samples, const StftConfig& cfg) {
  return n_samples / static_cast<std::size_t>(cfg.hop) + 1;
}

double wola_gain(const StftConfig& cfg) {
  const auto w = make_window(cfg.window, cfg.window_len);
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (int n = 0; n < cfg.hop; ++n) {
    double acc = 0.0;
    for (int m = n; m < cfg.window_len; m += cfg.hop) acc += w[m] * w[m];
    lo = std::min(lo, acc);
    hi = std::max(hi, acc);
  }
  if (hi <= 0.0 || (hi - lo) > 1e-9 * hi) return 0.0;
  return 0.5 * (hi + lo);
}

ComplexSpectrogram compress(const ComplexSpectrogram& s, const StftConfig& cfg) {
  if (!cfg.compression_enabled) return s;
  const double e = cfg.compression_exponent;
  const double c = cfg.compression_scale;
  return s.unaryExpr([e, c](const Complex& b) {
    const double mag = std::abs(b);
    if (mag == 0.0) return Complex{};
    return std::polar(c * std::pow(mag, e), std::arg(b));
  });
}

ComplexSpectrogram decompress(const ComplexSpectrogram& s, const StftConfig& cfg) {
  if (!cfg.compression_enabled) return s;
  const double inv_e = 1.0 / cfg.compression_exponent;
  const double c = cfg.compression_scale;
  return s.unaryExpr([inv_e, c](const Complex& b) {
    const double mag = std::abs(b);
    if (mag == 0.0) return Complex{};
    return std::polar(std::pow(mag / c, inv_e), std::arg(b));
  });
}

SpectralAnalysis stft(const Waveform& w, const StftConfig& cfg) {
  cfg.validate();
  if (w.empty()) throw InvalidInput("stft: empty waveform");
  if (w.sample_rate != kPipelineSampleRate) {
    throw InvalidInput("stft: sample rate " + std::to_string(w.sample_rate) +
                       " Hz, expected " + std::to_string(kPipelineSampleRate));
  }
  const int n_fft = cfg.window_len;
  const int half = n_fft / 2;
  const auto window = make_window(cfg.window, n_fft);
  const std::size_t frames = frame_count(w.size(), cfg);
  const auto n = static_cast<std::ptrdiff_t>(w.size());

  SpectralAnalysis out;
  out.bins.resize(half, static_cast<Eigen::Index>(frames));
  out.nyquist.resize(static_cast<Eigen::Index>(frames));
  out.length = w.size();

  const double norm = 1.0 / std::sqrt(static_cast<double>(n_fft));
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(static_cast<std::size_t>(n_fft));
  std::vector<Complex> spectrum;
  for (std::size_t k = 0; k < frames; ++k) {
    const std::ptrdiff_t start =
        static_cast<std::ptrdiff_t>(k) * cfg.hop - static_cast<std::ptrdiff_t>(half);
    for (int m = 0; m < n_fft; ++m) {
      const std::ptrdiff_t idx = start + m;
      frame[static_cast<std::size_t>(m)] =
          (idx >= 0 && idx < n) ? w.samples[static_cast<std::size_t>(idx)] * window[m] : 0.0;
    }
    fft.fwd(spectrum, frame);
    for (int f = 0; f < half; ++f) {
      out.bins(f, static_cast<Eigen::Index>(k)) = spectrum[f] * norm;
    }
    out.nyquist(static_cast<Eigen::Index>(k)) = spectrum[half] * norm;
  }
  out.bins = compress(out.bins, cfg);
  return out;
}

namespace {

Waveform overlap_add(const ComplexSpectrogram& bins, const Eigen::ArrayXcd* nyquist,
                     const StftConfig& cfg, std::size_t out_len) {
  cfg.validate();
  const int n_fft = cfg.window_len;
  const int half = n_fft / 2;
  if (bins.rows() != half) {
    throw InvalidInput("istft: expected " + std::to_string(half) + " frequency bins, got " +
                       std::to_string(bins.rows()));
  }
  if (wola_gain(cfg) <= 0.0) {
    throw ConfigError("istft: window '" + to_string(cfg.window) + "' with hop " +
                      std::to_string(cfg.hop) + " does not satisfy constant overlap-add");
  }
  const double denorm = std::sqrt(static_cast<double>(n_fft));
  const ComplexSpectrogram linear = decompress(bins, cfg) * denorm;
  const auto window = make_window(cfg.window, n_fft);
  const Eigen::Index frames = bins.cols();
  const std::size_t padded =
      static_cast<std::size_t>(std::max<Eigen::Index>(frames - 1, 0)) * cfg.hop + n_fft;

  std::vector<double> acc(padded, 0.0);
  std::vector<double> norm(padded, 0.0);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<Complex> spectrum(static_cast<std::size_t>(half + 1));
  std::vector<double> frame;
  for (Eigen::Index k = 0; k < frames; ++k) {
    for (int f = 0; f < half; ++f) spectrum[f] = linear(f, k);
    spectrum[half] = nyquist != nullptr ? (*nyquist)(k) * denorm : Complex{};
    // The DC and Nyquist bins of a real frame are real.
    spectrum[0] = Complex(spectrum[0].real(), 0.0);
    spectrum[half] = Complex(spectrum[half].real(), 0.0);
    fft.inv(frame, spectrum);
    const std::size_t start = static_cast<std::size_t>(k) * cfg.hop;
    for (int m = 0; m < n_fft; ++m) {
      acc[start + m] += frame[static_cast<std::size_t>(m)] * window[m];
      norm[start + m] += window[m] * window[m];
    }
  }

  Waveform out;
  out.samples.assign(out_len, 0.0);
  for (std::size_t i = 0; i < out_len; ++i) {
    const std::size_t p = i + static_cast<std::size_t>(half);
    if (p < padded && norm[p] > 1e-10) out.samples[i] = acc[p] / norm[p];
  }
  return out;
}

}  // namespace

Waveform istft(const ComplexSpectrogram& s, const StftConfig& cfg, std::size_t out_len) {
  return overlap_add(s, nullptr, cfg, out_len);
}

Waveform istft(const SpectralAnalysis& a, const StftConfig& cfg) {
  if (a.nyquist.size() != 0 && a.nyquist.size() != a.bins.cols()) {
    throw InvalidInput("istft: Nyquist row length does not match frame count");
  }
  return overlap_add(a.bins, a.nyquist.size() != 0 ? &a.nyquist : nullptr, cfg, a.length);
}

}  // namespace diffse

// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "diffse/neural_scorer.hpp"
#include "diffse/sde.hpp"
#include "diffse/spectral.hpp"
#include "diffse/training.hpp"

namespace diffse {

struct SamplerConfig {
  int n_steps = 30;
  int corrector_steps = 1;
  double snr = 0.5;
  bool final_tweedie = true;
  std::uint64_t seed = 0;
  /// Factor of the closing Tweedie step; unset uses the model's own
  /// ScoreModel::tweedie_factor().
  std::optional<TweedieFactor> tweedie_factor;

  void validate() const;
};

/// x_T = y + sigma(T) z at t = T.
ProcessState init_state(const ComplexSpectrogram& y, const SdeParams& p, Rng& rng);

/// Reverse Euler-Maruyama step from t to t - dt:
///   x <- x - [f(x, y) - g(t)^2 s] dt + g(t) sqrt(dt) z.
/// A step that would pass t_eps is shortened to end exactly at t_eps.
ProcessState predictor_step(const ProcessState& state, const ComplexSpectrogram& y,
                            const ScoreModel& model, const SdeParams& p, double dt,
                            Rng& rng);

/// Annealed Langevin update at fixed t:
///   eps = 2 (snr ||z|| / ||s||)^2,  x <- x + eps s + sqrt(2 eps) z.
/// No-op when ||s|| = 0.
ProcessState corrector_step(const ProcessState& state, const ComplexSpectrogram& y,
                            const ScoreModel& model, double snr, Rng& rng);

struct SamplerProgress {
  int step = 0;
  double t = 0.0;
  /// RMS of x_t - y over bins.
  double residual_rms = 0.0;
};

using ProgressFn = std::function<void(const SamplerProgress&)>;

struct ReverseResult {
  ProcessState final_state;  // at t_eps
  ComplexSpectrogram estimate;  // Tweedie-denoised if enabled
};

/// Predictor-corrector integration from T down to t_eps on a uniform grid.
/// Throws NumericalDomainError naming the step when the state turns non-finite.
ReverseResult reverse_diffusion(const ComplexSpectrogram& y, const ScoreModel& model,
                                const SdeParams& p, const SamplerConfig& cfg,
                                const ProgressFn& progress = {});

/// Gain applied to a noisy waveform (and its clean reference) before
/// analysis: 1 / max|y|.
double normalization_gain(const Waveform& noisy);

Waveform scaled(const Waveform& w, double gain);

/// stft -> reverse diffusion -> istft. The input is peak-normalized before
/// analysis and the output is scaled back; length is preserved.
Waveform enhance(const Waveform& noisy, const ScoreModel& model, const SdeParams& p,
                 const SamplerConfig& sampler_cfg, const StftConfig& stft_cfg,
                 const ProgressFn& progress = {});

/// Single forward pass of a direct-role network.
Waveform enhance_direct(const Waveform& noisy, const NeuralScorer& model,
                        const StftConfig& stft_cfg);

/// Oracle score for a (clean, noisy) pair in the same normalized spectral
/// domain that enhance() uses.
OracleScore make_oracle(const Waveform& clean, const Waveform& noisy,
                        const SdeParams& p, const StftConfig& stft_cfg,
                        ScoreConvention convention = ScoreConvention::conjugate);

}  // namespace diffse

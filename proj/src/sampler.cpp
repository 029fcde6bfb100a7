// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "diffse/sampler.hpp"

#include <algorithm>
#include <cmath>

namespace diffse {

void SamplerConfig::validate() const {
  if (n_steps < 1) throw ConfigError("sampler: n_steps must be >= 1");
  if (corrector_steps < 0) throw ConfigError("sampler: corrector_steps must be >= 0");
  if (!(snr > 0.0 && snr <= 1.0)) throw ConfigError("sampler: snr must be in (0, 1]");
}

ProcessState init_state(const ComplexSpectrogram& y, const SdeParams& p, Rng& rng) {
  if (!all_finite(y)) throw InvalidInput("init_state: non-finite noisy spectrogram");
  ProcessState s;
  s.t = p.t_max;
  s.x = y + kernel_std(p.t_max, p) * rng.complex_normal(y.rows(), y.cols());
  return s;
}

namespace {

ComplexSpectrogram conjugate_score(const ScoreModel& model, const ComplexSpectrogram& x,
                                   const ComplexSpectrogram& y, double t) {
  ComplexSpectrogram s = model.evaluate(x, y, t);
  require_same_shape(s, x, "score model output");
  const double k = to_conjugate_factor(model.convention());
  if (k != 1.0) s *= k;
  return s;
}

}  // namespace

ProcessState predictor_step(const ProcessState& state, const ComplexSpectrogram& y,
                            const ScoreModel& model, const SdeParams& p, double dt, Rng& rng) {
  require_same_shape(state.x, y, "predictor_step");
  if (dt < 0.0) throw InvalidInput("predictor_step: negative step");
  dt = std::min(dt, std::max(state.t - p.t_eps, 0.0));
  const double g = diffusion_coeff(state.t, p);
  const ComplexSpectrogram z = rng.complex_normal(y.rows(), y.cols());
  ProcessState next;
  if (dt == 0.0) {
    next = state;
    return next;
  }
  const ComplexSpectrogram s = conjugate_score(model, state.x, y, state.t);
  next.x = state.x - (drift(state.x, y, p) - (g * g) * s) * dt + (g * std::sqrt(dt)) * z;
  next.t = state.t - dt;
  if (next.t - p.t_eps <= 1e-12 * p.t_max) next.t = p.t_eps;
  return next;
}

ProcessState corrector_step(const ProcessState& state, const ComplexSpectrogram& y,
                            const ScoreModel& model, double snr, Rng& rng) {
  require_same_shape(state.x, y, "corrector_step");
  const ComplexSpectrogram z = rng.complex_normal(y.rows(), y.cols());
  const ComplexSpectrogram s = conjugate_score(model, state.x, y, state.t);
  const double s_norm = std::sqrt(squared_norm(s));
  if (s_norm == 0.0) return state;
  const double ratio = snr * std::sqrt(squared_norm(z)) / s_norm;
  const double eps = 2.0 * ratio * ratio;
  ProcessState next;
  next.t = state.t;
  next.x = state.x + eps * s + std::sqrt(2.0 * eps) * z;
  return next;
}

ReverseResult reverse_diffusion(const ComplexSpectrogram& y, const ScoreModel& model,
                                const SdeParams& p, const SamplerConfig& cfg,
                                const ProgressFn& progress) {
  cfg.validate();
  p.validate();
  Rng rng(cfg.seed);
  ProcessState state = init_state(y, p, rng);
  const double dt = (p.t_max - p.t_eps) / cfg.n_steps;
  for (int i = 0; i < cfg.n_steps; ++i) {
    for (int c = 0; c < cfg.corrector_steps; ++c) state = corrector_step(state, y, model, cfg.snr, rng);
    // The last step lands exactly on t_eps whatever the rounding of dt.
    const double step = i + 1 == cfg.n_steps ? state.t - p.t_eps : dt;
    state = predictor_step(state, y, model, p, step, rng);
    if (!all_finite(state.x)) {
      throw NumericalDomainError("reverse diffusion: non-finite state after step " +
                                 std::to_string(i + 1) + " (t = " + std::to_string(state.t) + ")");
    }
    if (progress) {
      progress({i + 1, state.t, std::sqrt((state.x - y).abs2().mean())});
    }
  }
  state.t = p.t_eps;

  ReverseResult out;
  if (cfg.final_tweedie) {
    const TweedieFactor factor = cfg.tweedie_factor.value_or(model.tweedie_factor());
    out.estimate = tweedie_estimate(state.x, y, state.t, model.evaluate(state.x, y, state.t), p, factor);
  } else {
    out.estimate = state.x;
  }
  out.final_state = std::move(state);
  return out;
}

double normalization_gain(const Waveform& noisy) {
  double peak = 0.0;
  for (const double v : noisy.samples) peak = std::max(peak, std::abs(v));
  if (!(peak > 0.0) || !std::isfinite(peak)) {
    throw InvalidInput("normalization: silent or non-finite waveform");
  }
  return 1.0 / peak;
}

Waveform scaled(const Waveform& w, double gain) {
  Waveform out = w;
  for (double& v : out.samples) v *= gain;
  return out;
}

Waveform enhance(const Waveform& noisy, const ScoreModel& model, const SdeParams& p,
                 const SamplerConfig& sampler_cfg, const StftConfig& stft_cfg,
                 const ProgressFn& progress) {
  const double gain = normalization_gain(noisy);
  const SpectralAnalysis y = stft(scaled(noisy, gain), stft_cfg);
  const ReverseResult r = reverse_diffusion(y.bins, model, p, sampler_cfg, progress);
  Waveform out = istft(r.estimate, stft_cfg, noisy.size());
  return scaled(out, 1.0 / gain);
}

Waveform enhance_direct(const Waveform& noisy, const NeuralScorer& model, const StftConfig& stft_cfg) {
  if (model.architecture().role != ScorerRole::direct) {
    throw ConfigError("enhance_direct: model role is not 'direct'");
  }
  const double gain = normalization_gain(noisy);
  const SpectralAnalysis y = stft(scaled(noisy, gain), stft_cfg);
  const ComplexSpectrogram est = model.evaluate(y.bins, y.bins, model.sentinel_time());
  if (!all_finite(est)) throw NumericalDomainError("enhance_direct: non-finite output");
  return scaled(istft(est, stft_cfg, noisy.size()), 1.0 / gain);
}

OracleScore make_oracle(const Waveform& clean, const Waveform& noisy, const SdeParams& p,
                        const StftConfig& stft_cfg, ScoreConvention convention) {
  if (clean.size() != noisy.size()) throw InvalidInput("make_oracle: length mismatch");
  const double gain = normalization_gain(noisy);
  return OracleScore(stft(scaled(clean, gain), stft_cfg).bins, p, convention);
}

}  // namespace diffse

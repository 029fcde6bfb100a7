// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "diffse/score.hpp"

namespace diffse {

/// score: the network output F is read as a preconditioned clean estimate and
///   turned into a conjugate-convention score (see sample_scales in the source).
/// direct: output is read as a clean-spectrogram estimate y + data_scale * F
///   (F the raw network output); the network is evaluated at a fixed
///   sentinel time with x_t := y.
enum class ScorerRole { score, direct };

enum class Precision { f64, f32 };

std::string to_string(ScorerRole r);
ScorerRole role_from_string(const std::string& name);

/// Small time-conditioned convolutional network. Input channels are
/// Re/Im of x_t and y followed by `time_embedding` sinusoidal features of t
/// broadcast over the spectrogram. Every layer is a 3x3 convolution (zero
/// padding, per-layer dilation along both axes); hidden layers use SiLU and
/// the final 2-channel layer is linear and zero-initialized.
/// Per-bin input features: Re/Im of the x_t channel, Re/Im of y / data_scale,
/// and the magnitudes of both.
inline constexpr int kSpectralChannels = 6;

struct ScorerArchitecture {
  std::vector<int> hidden_channels{32, 32, 32, 32, 32};
  /// One entry per convolution (hidden layers + output layer).
  std::vector<int> dilations{1, 2, 4, 8, 16, 1};
  int time_embedding = 8;
  /// Typical magnitude of x0 - y in the compressed domain (score role only).
  double data_scale = 0.04;
  ScorerRole role = ScorerRole::score;

  void validate() const;
  [[nodiscard]] int input_channels() const { return kSpectralChannels + time_embedding; }
  [[nodiscard]] std::size_t layer_count() const { return hidden_channels.size() + 1; }
  [[nodiscard]] std::size_t parameter_count() const;
};

/// Sinusoidal embedding of t, `size` values (sin/cos pairs at octave-spaced
/// frequencies starting at pi/2).
std::vector<double> time_embedding(double t, int size);

struct ScorerInput {
  const ComplexSpectrogram& x_t;
  const ComplexSpectrogram& y;
  double t;
};

namespace detail {
struct ForwardCache;
struct InputScale;
struct OutputMap;
}

/// Result of NeuralScorer::forward. Keeps the activations needed by
/// backward(); tied to the parameter version it was computed with.
class ForwardPass {
 public:
  ForwardPass();
  ~ForwardPass();
  ForwardPass(ForwardPass&&) noexcept;
  ForwardPass& operator=(ForwardPass&&) noexcept;

  [[nodiscard]] const std::vector<ComplexSpectrogram>& outputs() const { return outputs_; }
  [[nodiscard]] bool valid() const { return cache_ != nullptr; }

 private:
  friend class NeuralScorer;
  std::unique_ptr<detail::ForwardCache> cache_;
  std::vector<ComplexSpectrogram> outputs_;
  const void* owner_ = nullptr;
  std::uint64_t version_ = 0;
};

class NeuralScorer final : public ScoreModel {
 public:
  /// Hidden layers are initialized U(-b, b) with b = sqrt(6 / fan_in) from
  /// `seed`; the output layer starts at zero so the initial score is 0.
  NeuralScorer(ScorerArchitecture arch, SdeParams sde, std::uint64_t seed);

  /// Restores a model from explicit parameters (e.g. a checkpoint).
  NeuralScorer(ScorerArchitecture arch, SdeParams sde, std::vector<double> parameters);

  /// Role score: s(x_t, y, t). Role direct: the clean estimate for y (x_t and
  /// t are ignored; the sentinel time is used).
  [[nodiscard]] ComplexSpectrogram evaluate(const ComplexSpectrogram& x_t,
                                            const ComplexSpectrogram& y,
                                            double t) const override;

  [[nodiscard]] ScoreConvention convention() const override {
    return ScoreConvention::conjugate;
  }

  /// Batched forward pass retaining activations for backward().
  [[nodiscard]] ForwardPass forward(std::span<const ScorerInput> batch) const;

  /// Gradient of a scalar loss with respect to every parameter, given the
  /// loss gradient for each output (Re part: dL/dRe s, Im part: dL/dIm s).
  /// Throws StateError when `pass` was not produced by this model with the
  /// current parameters, InvalidInput on shape mismatch.
  [[nodiscard]] std::vector<double> backward(
      const ForwardPass& pass, std::span<const ComplexSpectrogram> upstream) const;

  [[nodiscard]] const ScorerArchitecture& architecture() const { return arch_; }
  [[nodiscard]] const SdeParams& sde() const { return sde_; }
  [[nodiscard]] std::span<const double> parameters() const { return params_; }
  [[nodiscard]] std::size_t parameter_count() const { return params_.size(); }
  void set_parameters(std::span<const double> values);

  [[nodiscard]] Precision precision() const { return precision_; }
  void set_precision(Precision p) { precision_ = p; }

  /// Time at which a direct-role model is evaluated.
  [[nodiscard]] double sentinel_time() const { return sde_.t_max; }

 private:
  [[nodiscard]] std::pair<detail::InputScale, detail::OutputMap> sample_scales(double t) const;

  ScorerArchitecture arch_;
  SdeParams sde_;
  std::vector<double> params_;
  std::uint64_t version_ = 1;
  Precision precision_ = Precision::f32;
};

/// A scalar loss of the network outputs together with its output gradient.
struct OutputLoss {
  std::function<double(std::span<const ComplexSpectrogram>)> value;
  std::function<std::vector<ComplexSpectrogram>(std::span<const ComplexSpectrogram>)>
      gradient;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::vector<std::size_t> indices;
  std::vector<double> analytic;
  std::vector<double> numeric;
};

/// Compares backward() against central differences (step eps) on
/// `n_params` parameter indices drawn without replacement from `seed`.
/// Runs in double precision on a copy of `model`. The relative error of one
/// entry is |a - n| / max(|a|, |n|, 1e-8).
GradientCheckResult gradient_check(const NeuralScorer& model,
                                   std::span<const ScorerInput> batch,
                                   const OutputLoss& loss, double eps,
                                   std::size_t n_params, std::uint64_t seed);

/// Versioned binary checkpoint:
///   bytes 0..7   magic "DIFFSECK"
///   u32          format version (1)
///   u32 + bytes  JSON header (architecture, sde, convention)
///   u64          training step
///   u64 + f64[]  flat parameter vector
/// All integers and doubles little-endian.
struct Checkpoint {
  ScorerArchitecture architecture;
  SdeParams sde;
  std::uint64_t step = 0;
  std::vector<double> parameters;
};

void save_checkpoint(const std::filesystem::path& path, const NeuralScorer& model,
                     std::uint64_t step);
Checkpoint load_checkpoint(const std::filesystem::path& path);
NeuralScorer model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace diffse

// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>

#include "diffse/sde.hpp"
#include "diffse/types.hpp"

namespace diffse {

/// How a complex score is expressed.
///
/// conjugate: s = -(x_t - mu) / sigma^2, the target -z/sigma of denoising
///   score matching. The reverse SDE and Langevin updates use this form.
/// real_view: gradient of log p with respect to the stacked (Re, Im)
///   coordinates, s = -2 (x_t - mu) / sigma^2 (twice the conjugate form).
enum class ScoreConvention { conjugate, real_view };

std::string to_string(ScoreConvention c);
ScoreConvention convention_from_string(const std::string& name);

/// Multiplier taking a score in `c` to the conjugate convention.
constexpr double to_conjugate_factor(ScoreConvention c) {
  return c == ScoreConvention::real_view ? 0.5 : 1.0;
}

/// Coefficient c of sigma(t)^2 in the Tweedie correction x_t + c sigma^2 s.
/// half reproduces the published formula and is exact for real_view scores;
/// full is exact for conjugate scores.
enum class TweedieFactor { half, full };

std::string to_string(TweedieFactor f);
TweedieFactor tweedie_from_string(const std::string& s);

constexpr double tweedie_coefficient(TweedieFactor f) {
  return f == TweedieFactor::half ? 0.5 : 1.0;
}

/// Factor that makes the Tweedie estimate exact for a score convention.
constexpr TweedieFactor matched_tweedie(ScoreConvention c) {
  return c == ScoreConvention::real_view ? TweedieFactor::half : TweedieFactor::full;
}

/// s(x_t, y, t). Implementations must return an array shaped like x_t and be
/// safe for concurrent calls.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;

  [[nodiscard]] virtual ComplexSpectrogram evaluate(const ComplexSpectrogram& x_t,
                                                    const ComplexSpectrogram& y,
                                                    double t) const = 0;

  [[nodiscard]] virtual ScoreConvention convention() const = 0;

  /// Factor of the Tweedie step that turns this model's scores into clean
  /// estimates.
  [[nodiscard]] virtual TweedieFactor tweedie_factor() const {
    return matched_tweedie(convention());
  }
};

/// Exact score of the transition kernel around a known clean spectrogram.
/// Test scaffolding: only meaningful when x0 is the true clean signal.
class OracleScore final : public ScoreModel {
 public:
  OracleScore(ComplexSpectrogram x0, SdeParams params,
              ScoreConvention convention = ScoreConvention::conjugate);

  /// Throws NumericalDomainError when sigma(t) < 1e-9.
  [[nodiscard]] ComplexSpectrogram evaluate(const ComplexSpectrogram& x_t,
                                            const ComplexSpectrogram& y,
                                            double t) const override;

  [[nodiscard]] ScoreConvention convention() const override { return convention_; }
  [[nodiscard]] const ComplexSpectrogram& clean() const { return x0_; }

 private:
  ComplexSpectrogram x0_;
  SdeParams params_;
  ScoreConvention convention_;
};

/// Free-function form of OracleScore::evaluate.
ComplexSpectrogram oracle_score(const ComplexSpectrogram& x_t,
                                const ComplexSpectrogram& y, double t,
                                const OracleScore& oracle);

/// Always returns zeros; used for plumbing checks.
class ZeroScore final : public ScoreModel {
 public:
  [[nodiscard]] ComplexSpectrogram evaluate(const ComplexSpectrogram& x_t,
                                            const ComplexSpectrogram&,
                                            double) const override {
    return ComplexSpectrogram::Zero(x_t.rows(), x_t.cols());
  }
  [[nodiscard]] ScoreConvention convention() const override {
    return ScoreConvention::conjugate;
  }
};

}  // namespace diffse

// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "diffse/score.hpp"

namespace diffse {

std::string to_string(ScoreConvention c) {
  return c == ScoreConvention::conjugate ? "conjugate" : "real-view";
}

ScoreConvention convention_from_string(const std::string& name) {
  if (name == "conjugate") return ScoreConvention::conjugate;
  if (name == "real-view" || name == "real_view") return ScoreConvention::real_view;
  throw ConfigError("unknown score convention '" + name + "'");
}

OracleScore::OracleScore(ComplexSpectrogram x0, SdeParams params, ScoreConvention convention)
    : x0_(std::move(x0)), params_(params), convention_(convention) {}

ComplexSpectrogram OracleScore::evaluate(const ComplexSpectrogram& x_t,
                                         const ComplexSpectrogram& y, double t) const {
  require_same_shape(x_t, x0_, "oracle_score");
  const double var = kernel_variance(t, params_);
  if (!(std::sqrt(var) >= 1e-9)) {
    throw NumericalDomainError("oracle_score: sigma(t) below 1e-9 at t = " + std::to_string(t));
  }
  const double scale = (convention_ == ScoreConvention::real_view ? -2.0 : -1.0) / var;
  return scale * (x_t - kernel_mean(x0_, y, t, params_));
}

ComplexSpectrogram oracle_score(const ComplexSpectrogram& x_t, const ComplexSpectrogram& y,
                                double t, const OracleScore& oracle) {
  return oracle.evaluate(x_t, y, t);
}

std::string to_string(TweedieFactor f) { return f == TweedieFactor::half ? "half" : "full"; }

TweedieFactor tweedie_from_string(const std::string& s) {
  if (s == "half") return TweedieFactor::half;
  if (s == "full") return TweedieFactor::full;
  throw ConfigError("unknown Tweedie factor '" + s + "'");
}

}  // namespace diffse

// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diffse/spectral.hpp"
#include "diffse/types.hpp"

namespace diffse {

inline constexpr double kSiSdrCapDb = 100.0;

/// Scale-invariant SDR in dB without mean removal:
///   a = <e, r> / ||r||^2,  SI-SDR = 10 log10(||a r||^2 / ||a r - e||^2),
/// capped at +100 dB when the distortion energy is below 1e-20 of ||a r||^2.
double si_sdr(std::span<const double> estimate, std::span<const double> reference);
double si_sdr(const Waveform& estimate, const Waveform& reference);

/// Mean over bins of |estimate - reference|^2.
double spectral_mse(const ComplexSpectrogram& estimate,
                    const ComplexSpectrogram& reference);

struct MetricSummary {
  std::string name;
  std::vector<double> values;
  double mean = 0.0;
  /// Sample standard deviation / sqrt(n); 0 when n = 1.
  double std_error = 0.0;
};

MetricSummary summarize(std::string name, std::vector<double> values);

/// Shell command scoring one pair; "{estimate}" and "{reference}" are
/// replaced by file paths and the first number printed is the score.
struct ExternalMetric {
  std::string name;
  std::string command;
};

double run_external_metric(const ExternalMetric& metric,
                           const std::filesystem::path& estimate,
                           const std::filesystem::path& reference);

struct EvalPair {
  std::string id;
  Waveform estimate;
  Waveform reference;
  std::filesystem::path estimate_path;  // required by external metrics
  std::filesystem::path reference_path;
};

struct MetricSet {
  bool si_sdr = true;
  /// Spectral MSE on spectrograms computed with this configuration.
  std::optional<StftConfig> spectral_mse;
  std::vector<ExternalMetric> external;
};

struct EvalReport {
  std::vector<std::string> ids;
  std::vector<MetricSummary> metrics;

  [[nodiscard]] const MetricSummary& metric(const std::string& name) const;
};

EvalReport evaluate_corpus(std::span<const EvalPair> pairs, const MetricSet& metrics,
                           int threads = 0);

/// Per-utterance table: "id\t<metric>..." then "#mean" and "#std_error" rows.
void write_report_tsv(const std::filesystem::path& path, const EvalReport& report);

/// "metric   mean ± std_error (n)" lines.
std::string summary_table(const EvalReport& report);

}  // namespace diffse

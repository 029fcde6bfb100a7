// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "diffse/neural_scorer.hpp"
#include "diffse/sampler.hpp"
#include "diffse/sde.hpp"
#include "diffse/spectral.hpp"
#include "diffse/training.hpp"

namespace diffse {

/// Everything a command needs. Serialized as JSON with the sections
/// "seed", "score_convention", "sde", "stft", "loss", "model", "sampler" and
/// "paths" ({"dataset_dir", "output_dir"}); unknown keys are rejected when
/// loading and missing keys keep their defaults.
struct RunConfig {
  std::uint64_t seed = 0;
  SdeParams sde;
  StftConfig stft;
  LossConfig loss;
  ScorerArchitecture model;
  SamplerConfig sampler;
  ScoreConvention oracle_convention = ScoreConvention::conjugate;
  std::string dataset_dir;
  std::string output_dir;

  /// Throws ConfigError on any invalid field.
  void validate() const;
};

RunConfig run_config_from_json(const std::string& text);
std::string run_config_to_json(const RunConfig& cfg);

RunConfig load_run_config(const std::filesystem::path& path);

/// Writes the resolved configuration (config.resolved.json) into `dir`.
std::filesystem::path write_config_snapshot(const std::filesystem::path& dir,
                                            const RunConfig& cfg);

}  // namespace diffse

// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "diffse/audio_data.hpp"
#include "diffse/sampler.hpp"
#include "diffse/training.hpp"

namespace diffse {

/// One materialized pair of a corpus, loaded into memory.
struct CorpusItem {
  IndexEntry entry;
  Waveform clean;
  Waveform noisy;
};

/// Loads every pair of `split` listed in corpus_dir/index.tsv.
std::vector<CorpusItem> load_split(const std::filesystem::path& corpus_dir, Split split);

/// Clean and noisy spectrograms in the normalized domain used by enhance():
/// both waveforms are scaled by normalization_gain(noisy) before analysis.
TrainingPair analysis_pair(const Waveform& clean, const Waveform& noisy, const StftConfig& cfg);

std::vector<TrainingPair> training_pairs(std::span<const CorpusItem> items,
                                         const StftConfig& cfg);

/// Enhances with a trained network: reverse diffusion for a score-role
/// model, a single pass for a direct-role model.
Waveform enhance_with(const NeuralScorer& model, const Waveform& noisy,
                      const SamplerConfig& sampler_cfg, const StftConfig& stft_cfg,
                      const ProgressFn& progress = {});

}  // namespace diffse

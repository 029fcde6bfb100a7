// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "diffse/pipeline.hpp"

#include "diffse/wav.hpp"

namespace diffse {

std::vector<CorpusItem> load_split(const std::filesystem::path& corpus_dir, Split split) {
  std::vector<CorpusItem> out;
  for (auto& e : read_index(corpus_dir)) {
    if (e.split != split) continue;
    CorpusItem item;
    item.clean = read_wav(corpus_dir / e.clean_file);
    item.noisy = read_wav(corpus_dir / e.noisy_file);
    if (item.clean.size() != item.noisy.size()) {
      throw InvalidInput("corpus pair '" + e.id + "' has mismatched lengths");
    }
    item.entry = std::move(e);
    out.push_back(std::move(item));
  }
  return out;
}

TrainingPair analysis_pair(const Waveform& clean, const Waveform& noisy, const StftConfig& cfg) {
  if (clean.size() != noisy.size()) throw InvalidInput("analysis_pair: length mismatch");
  const double gain = normalization_gain(noisy);
  return {stft(scaled(clean, gain), cfg).bins, stft(scaled(noisy, gain), cfg).bins};
}

std::vector<TrainingPair> training_pairs(std::span<const CorpusItem> items, const StftConfig& cfg) {
  std::vector<TrainingPair> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(analysis_pair(item.clean, item.noisy, cfg));
  return out;
}

Waveform enhance_with(const NeuralScorer& model, const Waveform& noisy,
                      const SamplerConfig& sampler_cfg, const StftConfig& stft_cfg,
                      const ProgressFn& progress) {
  if (model.architecture().role == ScorerRole::direct) {
    return enhance_direct(noisy, model, stft_cfg);
  }
  return enhance(noisy, model, model.sde(), sampler_cfg, stft_cfg, progress);
}

}  // namespace diffse

// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "diffse/random.hpp"
#include "diffse/types.hpp"

namespace diffse {

enum class CleanKind { harmonic, chirp, am_modulated };
enum class NoiseKind { white, pink, ar_babble };

std::string to_string(CleanKind k);
std::string to_string(NoiseKind k);
CleanKind clean_kind_from_string(const std::string& s);
NoiseKind noise_kind_from_string(const std::string& s);

struct Mixture {
  Waveform noisy;
  Waveform scaled_noise;
  std::size_t noise_offset = 0;
  double noise_gain = 0.0;
};

/// noisy = clean + a * crop(noise) with a chosen so that
/// 10 log10(||clean||^2 / ||a crop(noise)||^2) = snr_db. A longer noise is
/// cropped at a position drawn from rng. Throws InvalidInput for silent
/// inputs, a too-short noise or a non-finite SNR.
Mixture mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db, Rng& rng);

/// 10 log10(||clean||^2 / ||noisy - clean||^2).
double measured_snr_db(const Waveform& clean, const Waveform& noisy);

/// Synthetic voiced signal with a -6 dB/octave harmonic tilt, formant-like
/// resonances and a syllabic envelope, band-limited below 7 kHz, peak 0.9.
///   harmonic: fixed f0 in [80, 300] Hz
///   chirp: f0 gliding between two values in [80, 300] Hz
///   am_modulated: fixed f0 with 3-6 Hz amplitude modulation
Waveform synth_clean(double duration_s, CleanKind kind, Rng& rng);

/// Unit-RMS noise. white: i.i.d. Gaussian; pink: 1/f power spectrum;
/// ar_babble: second-order resonant AR noise with a slowly varying gain.
Waveform synth_noise(double duration_s, NoiseKind kind, Rng& rng);

enum class Split { train, valid, test };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

/// One mixture of a manifest. `clean` and `noise` are WAV paths (relative to
/// the manifest directory) or generator references
/// "synth:<kind>:<duration_s>"; generators draw from `seed`.
struct MixtureSpec {
  std::string id;
  Split split = Split::train;
  std::string clean;
  std::string noise;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
};

/// Line format (tab-separated, '#' starts a comment):
///   id  split  clean  noise  snr_db  seed
struct Manifest {
  std::vector<MixtureSpec> entries;
  std::filesystem::path base_dir;

  /// Throws InvalidInput when empty or when ids repeat.
  void validate() const;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& m);

struct SyntheticCorpusSpec {
  int n_train = 100;
  int n_valid = 0;
  int n_test = 20;
  double duration_s = 1.0;
  std::vector<double> snrs_db{-5.0, 0.0, 5.0};
  std::vector<NoiseKind> noise_kinds{NoiseKind::white, NoiseKind::pink,
                                     NoiseKind::ar_babble};
  std::uint64_t seed = 0;
};

/// Manifest of generator references cycling through clean kinds, noise
/// kinds and SNRs.
Manifest synthetic_manifest(const SyntheticCorpusSpec& spec);

/// One materialized pair, as listed in index.tsv.
struct IndexEntry {
  std::string id;
  Split split = Split::train;
  std::string clean_file;  // relative to the corpus directory
  std::string noisy_file;
  double snr_db = 0.0;
  double measured_snr_db = 0.0;
  std::size_t noise_offset = 0;
  double noise_gain = 0.0;
  double output_gain = 1.0;  // joint anti-clipping rescale
  std::uint64_t seed = 0;
  /// More than 0.01% of the samples exceeded full scale before the rescale
  /// (not stored in index.tsv).
  bool clip_warning = false;
};

/// Materializes clean/noisy 16-bit WAV pairs under
/// out_dir/<split>/{clean,noisy}/<id>.wav and writes out_dir/index.tsv.
/// Entries are processed in parallel; each entry only uses its own seed, so
/// the output is byte-identical across runs and thread counts.
std::vector<IndexEntry> build_dataset(const Manifest& manifest,
                                      const std::filesystem::path& out_dir,
                                      int threads = 0);

std::vector<IndexEntry> read_index(const std::filesystem::path& corpus_dir);

}  // namespace diffse

// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "diffse/audio_data.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include <unsupported/Eigen/FFT>

#include "diffse/wav.hpp"

namespace diffse {

std::string to_string(CleanKind k) {
  switch (k) {
    case CleanKind::harmonic: return "harmonic";
    case CleanKind::chirp: return "chirp";
    case CleanKind::am_modulated: return "am_modulated";
  }
  return "?";
}

std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::white: return "white";
    case NoiseKind::pink: return "pink";
    case NoiseKind::ar_babble: return "ar_babble";
  }
  return "?";
}

CleanKind clean_kind_from_string(const std::string& s) {
  if (s == "harmonic") return CleanKind::harmonic;
  if (s == "chirp") return CleanKind::chirp;
  if (s == "am_modulated") return CleanKind::am_modulated;
  throw InvalidInput("unknown clean signal kind '" + s + "'");
}

NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "white") return NoiseKind::white;
  if (s == "pink") return NoiseKind::pink;
  if (s == "ar_babble") return NoiseKind::ar_babble;
  throw InvalidInput("unknown noise kind '" + s + "'");
}

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "valid") return Split::valid;
  if (s == "test") return Split::test;
  throw InvalidInput("unknown split '" + s + "'");
}

namespace {

double energy(const std::vector<double>& v) {
  double e = 0.0;
  for (const double x : v) e += x * x;
  return e;
}

std::size_t sample_count(double duration_s) {
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
    throw InvalidInput("duration must be positive");
  }
  return static_cast<std::size_t>(std::lround(duration_s * kPipelineSampleRate));
}

void normalize_rms(std::vector<double>& v) {
  const double rms = std::sqrt(energy(v) / static_cast<double>(v.size()));
  if (!(rms > 0.0)) throw InvalidInput("cannot normalize a silent signal");
  for (double& x : v) x /= rms;
}

}  // namespace

Mixture mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db, Rng& rng) {
  if (!std::isfinite(snr_db)) throw InvalidInput("mix_at_snr: non-finite SNR");
  if (clean.empty()) throw InvalidInput("mix_at_snr: empty clean signal");
  if (noise.size() < clean.size()) {
    throw InvalidInput("mix_at_snr: noise (" + std::to_string(noise.size()) +
                       " samples) shorter than clean (" + std::to_string(clean.size()) + ")");
  }
  const double e_clean = energy(clean.samples);
  if (!(e_clean > 0.0)) throw InvalidInput("mix_at_snr: silent clean signal");

  Mixture m;
  m.noise_offset = rng.index(noise.size() - clean.size() + 1);
  std::vector<double> crop(noise.samples.begin() + static_cast<std::ptrdiff_t>(m.noise_offset),
                           noise.samples.begin() +
                               static_cast<std::ptrdiff_t>(m.noise_offset + clean.size()));
  const double e_noise = energy(crop);
  if (!(e_noise > 0.0)) throw InvalidInput("mix_at_snr: silent noise segment");

  m.noise_gain = std::sqrt(e_clean / (e_noise * std::pow(10.0, snr_db / 10.0)));
  m.scaled_noise.sample_rate = clean.sample_rate;
  m.scaled_noise.samples.resize(clean.size());
  m.noisy.sample_rate = clean.sample_rate;
  m.noisy.samples.resize(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    m.scaled_noise.samples[i] = m.noise_gain * crop[i];
    m.noisy.samples[i] = clean.samples[i] + m.scaled_noise.samples[i];
  }
  return m;
}

double measured_snr_db(const Waveform& clean, const Waveform& noisy) {
  if (clean.size() != noisy.size()) throw InvalidInput("measured_snr_db: length mismatch");
  double e_clean = 0.0;
  double e_noise = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double n = noisy.samples[i] - clean.samples[i];
    e_clean += clean.samples[i] * clean.samples[i];
    e_noise += n * n;
  }
  return 10.0 * std::log10(e_clean / e_noise);
}

Waveform synth_clean(double duration_s, CleanKind kind, Rng& rng) {
  const std::size_t n = sample_count(duration_s);
  const double fs = kPipelineSampleRate;
  const double two_pi = 2.0 * std::numbers::pi;

  const double f0_start = rng.uniform(80.0, 300.0);
  const double f0_end = kind == CleanKind::chirp ? rng.uniform(80.0, 300.0) : f0_start;
  const double f0_max = std::max(f0_start, f0_end);
  const int harmonics = static_cast<int>(std::floor(7000.0 / f0_max));

  // Three resonances shape the harmonic amplitudes on top of a 1/h tilt.
  const double formant_hz[3] = {rng.uniform(300.0, 900.0), rng.uniform(900.0, 2500.0),
                                rng.uniform(2500.0, 3500.0)};
  const double formant_bw[3] = {rng.uniform(80.0, 160.0), rng.uniform(100.0, 200.0),
                                rng.uniform(150.0, 300.0)};
  std::vector<double> phase(static_cast<std::size_t>(harmonics));
  for (double& ph : phase) ph = rng.uniform(0.0, two_pi);
  const auto envelope_gain = [&](double f) {
    double g = 0.1;
    for (int i = 0; i < 3; ++i) {
      const double u = (f - formant_hz[i]) / formant_bw[i];
      g += 1.0 / (1.0 + u * u);
    }
    return g;
  };

  const double syllable_hz = rng.uniform(2.0, 5.0);
  const double syllable_phase = rng.uniform(0.0, two_pi);
  const double am_hz = rng.uniform(3.0, 6.0);
  const double am_phase = rng.uniform(0.0, two_pi);

  Waveform w;
  w.samples.assign(n, 0.0);
  const double duration = static_cast<double>(n) / fs;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    // Integrated phase of a linear f0 glide.
    const double base_phase = two_pi * (f0_start * t + 0.5 * (f0_end - f0_start) * t * t / duration);
    const double f0_now = f0_start + (f0_end - f0_start) * t / duration;
    double v = 0.0;
    for (int h = 1; h <= harmonics; ++h) {
      v += envelope_gain(h * f0_now) / h * std::sin(h * base_phase + phase[h - 1]);
    }
    double env = 0.7 + 0.3 * std::sin(two_pi * syllable_hz * t + syllable_phase);
    if (kind == CleanKind::am_modulated) {
      env *= 0.55 + 0.45 * std::sin(two_pi * am_hz * t + am_phase);
    }
    const double ramp = std::min({1.0, t / 0.01, (duration - t) / 0.01});
    w.samples[i] = v * env * std::max(ramp, 0.0);
  }
  double peak = 0.0;
  for (const double v : w.samples) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double& v : w.samples) v *= 0.9 / peak;
  }
  return w;
}

Waveform synth_noise(double duration_s, NoiseKind kind, Rng& rng) {
  const std::size_t n = sample_count(duration_s);
  Waveform w;
  w.samples.resize(n);
  for (double& v : w.samples) v = rng.normal();

  if (kind == NoiseKind::pink) {
    // Shape a white spectrum by 1/sqrt(f) (power ~ 1/f), DC removed.
    Eigen::FFT<double> fft;
    std::vector<Complex> spec;
    fft.fwd(spec, w.samples);
    spec[0] = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
      const std::size_t m = std::min(k, n - k);
      spec[k] /= std::sqrt(static_cast<double>(m));
    }
    std::vector<Complex> time;
    fft.inv(time, spec);
    for (std::size_t i = 0; i < n; ++i) w.samples[i] = time[i].real();
  } else if (kind == NoiseKind::ar_babble) {
    // Sum of three resonant AR(2) voices, each with a slowly varying gain.
    std::vector<double> out(n, 0.0);
    const double fs = kPipelineSampleRate;
    for (int voice = 0; voice < 3; ++voice) {
      const double f_res = rng.uniform(300.0, 1500.0);
      const double radius = rng.uniform(0.9, 0.98);
      const double a1 = 2.0 * radius * std::cos(2.0 * std::numbers::pi * f_res / fs);
      const double a2 = -radius * radius;
      const double mod_hz = rng.uniform(0.5, 4.0);
      const double mod_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      double y1 = 0.0;
      double y2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double y0 = rng.normal() + a1 * y1 + a2 * y2;
        y2 = y1;
        y1 = y0;
        const double gain =
            0.6 + 0.4 * std::sin(2.0 * std::numbers::pi * mod_hz * i / fs + mod_phase);
        out[i] += gain * y0 * (1.0 - radius);
      }
    }
    w.samples = std::move(out);
  }
  normalize_rms(w.samples);
  return w;
}

void Manifest::validate() const {
  if (entries.empty()) throw InvalidInput("manifest: no entries");
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (e.id.empty()) throw InvalidInput("manifest: empty id");
    if (!ids.insert(e.id).second) throw InvalidInput("manifest: duplicate id '" + e.id + "'");
    if (!std::isfinite(e.snr_db)) throw InvalidInput("manifest: non-finite SNR for '" + e.id + "'");
  }
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string field;
  if (line.find('\t') != std::string::npos) {
    while (std::getline(is, field, '\t')) {
      if (!field.empty()) out.push_back(field);
    }
  } else {
    while (is >> field) out.push_back(field);
  }
  return out;
}

}  // namespace

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open manifest " + path.string());
  Manifest m;
  m.base_dir = path.parent_path();
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() != 6) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected 6 fields, got " +
                    std::to_string(fields.size()));
    }
    MixtureSpec e;
    e.id = fields[0];
    e.split = split_from_string(fields[1]);
    e.clean = fields[2];
    e.noise = fields[3];
    try {
      e.snr_db = std::stod(fields[4]);
      e.seed = std::stoull(fields[5]);
    } catch (const std::exception&) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad number");
    }
    m.entries.push_back(std::move(e));
  }
  m.validate();
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << "# id\tsplit\tclean\tnoise\tsnr_db\tseed\n";
  f << std::setprecision(17);
  for (const auto& e : m.entries) {
    f << e.id << '\t' << to_string(e.split) << '\t' << e.clean << '\t' << e.noise << '\t'
      << e.snr_db << '\t' << e.seed << '\n';
  }
}

Manifest synthetic_manifest(const SyntheticCorpusSpec& spec) {
  if (spec.snrs_db.empty() || spec.noise_kinds.empty()) {
    throw InvalidInput("synthetic_manifest: need at least one SNR and one noise kind");
  }
  const CleanKind clean_kinds[3] = {CleanKind::harmonic, CleanKind::chirp, CleanKind::am_modulated};
  Manifest m;
  std::ostringstream dur;
  dur << spec.duration_s;
  const auto add = [&](Split split, int count) {
    for (int i = 0; i < count; ++i) {
      MixtureSpec e;
      std::ostringstream id;
      id << to_string(split) << '_' << std::setw(4) << std::setfill('0') << i;
      e.id = id.str();
      e.split = split;
      const std::size_t ui = static_cast<std::size_t>(i);
      e.snr_db = spec.snrs_db[ui % spec.snrs_db.size()];
      const NoiseKind nk = spec.noise_kinds[(ui / spec.snrs_db.size()) % spec.noise_kinds.size()];
      const CleanKind ck = clean_kinds[(ui + ui / 3) % 3];
      e.clean = "synth:" + to_string(ck) + ":" + dur.str();
      e.noise = "synth:" + to_string(nk) + ":" + dur.str();
      e.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(split), ui);
      m.entries.push_back(std::move(e));
    }
  };
  add(Split::train, spec.n_train);
  add(Split::valid, spec.n_valid);
  add(Split::test, spec.n_test);
  return m;
}

namespace {

struct SynthRef {
  std::string kind;
  double duration_s = 0.0;
};

bool parse_synth(const std::string& ref, SynthRef& out) {
  if (ref.rfind("synth:", 0) != 0) return false;
  const auto rest = ref.substr(6);
  const auto colon = rest.find(':');
  if (colon == std::string::npos) throw InvalidInput("bad generator reference '" + ref + "'");
  out.kind = rest.substr(0, colon);
  try {
    out.duration_s = std::stod(rest.substr(colon + 1));
  } catch (const std::exception&) {
    throw InvalidInput("bad generator duration in '" + ref + "'");
  }
  return true;
}

Waveform resolve_clean(const std::string& ref, const std::filesystem::path& base, Rng& rng) {
  SynthRef s;
  if (parse_synth(ref, s)) return synth_clean(s.duration_s, clean_kind_from_string(s.kind), rng);
  return read_wav(base / ref);
}

Waveform resolve_noise(const std::string& ref, const std::filesystem::path& base, Rng& rng) {
  SynthRef s;
  if (parse_synth(ref, s)) return synth_noise(s.duration_s, noise_kind_from_string(s.kind), rng);
  return read_wav(base / ref);
}

IndexEntry materialize(const MixtureSpec& spec, const std::filesystem::path& base,
                       const std::filesystem::path& out_dir) {
  Rng clean_rng(derive_seed(spec.seed, 1));
  Rng noise_rng(derive_seed(spec.seed, 2));
  Rng mix_rng(derive_seed(spec.seed, 3));
  const Waveform clean = resolve_clean(spec.clean, base, clean_rng);
  const Waveform noise = resolve_noise(spec.noise, base, noise_rng);
  Mixture mix = mix_at_snr(clean, noise, spec.snr_db, mix_rng);

  IndexEntry e;
  e.id = spec.id;
  e.split = spec.split;
  e.snr_db = spec.snr_db;
  e.noise_offset = mix.noise_offset;
  e.noise_gain = mix.noise_gain;
  e.seed = spec.seed;

  // Joint rescale keeps the pair's SNR when the mixture would clip.
  double peak = 0.0;
  std::size_t over = 0;
  constexpr double kFullScale = 32767.0 / 32768.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double m = std::max(std::abs(clean.samples[i]), std::abs(mix.noisy.samples[i]));
    peak = std::max(peak, m);
    if (m > kFullScale) ++over;
  }
  Waveform clean_out = clean;
  if (peak > kFullScale) {
    e.output_gain = 0.95 * kFullScale / peak;
    e.clip_warning = static_cast<double>(over) > 1e-4 * static_cast<double>(clean.size());
    for (double& v : clean_out.samples) v *= e.output_gain;
    for (double& v : mix.noisy.samples) v *= e.output_gain;
  }

  const std::string split = to_string(spec.split);
  e.clean_file = split + "/clean/" + spec.id + ".wav";
  e.noisy_file = split + "/noisy/" + spec.id + ".wav";
  write_wav(out_dir / e.clean_file, clean_out);
  write_wav(out_dir / e.noisy_file, mix.noisy);
  e.measured_snr_db = measured_snr_db(read_wav(out_dir / e.clean_file), read_wav(out_dir / e.noisy_file));
  return e;
}

void write_index(const std::filesystem::path& path, const std::vector<IndexEntry>& entries) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << "# id\tsplit\tclean_file\tnoisy_file\tsnr_db\tmeasured_snr_db\tnoise_offset\tnoise_gain\t"
       "output_gain\tseed\n";
  f << std::setprecision(17);
  for (const auto& e : entries) {
    f << e.id << '\t' << to_string(e.split) << '\t' << e.clean_file << '\t' << e.noisy_file << '\t'
      << e.snr_db << '\t' << e.measured_snr_db << '\t' << e.noise_offset << '\t' << e.noise_gain
      << '\t' << e.output_gain << '\t' << e.seed << '\n';
  }
}

}  // namespace

std::vector<IndexEntry> build_dataset(const Manifest& manifest, const std::filesystem::path& out_dir,
                                      int threads) {
  manifest.validate();
  for (const char* split : {"train", "valid", "test"}) {
    std::filesystem::create_directories(out_dir / split / "clean");
    std::filesystem::create_directories(out_dir / split / "noisy");
  }
  const std::size_t n = manifest.entries.size();
  std::vector<IndexEntry> entries(n);
  std::vector<std::exception_ptr> errors(n);
  const auto work = [&](std::size_t i) {
    try {
      entries[i] = materialize(manifest.entries[i], manifest.base_dir, out_dir);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  int workers = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) work(i);
      });
    }
  }
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  const auto rescaled = std::count_if(entries.begin(), entries.end(),
                                      [](const IndexEntry& e) { return e.clip_warning; });
  if (rescaled > 0) {
    std::cerr << "warning: " << rescaled << " of " << n
              << " mixtures would clip at 16 bits and were rescaled jointly"
                 " (see output_gain in index.tsv)\n";
  }
  write_index(out_dir / "index.tsv", entries);
  return entries;
}

std::vector<IndexEntry> read_index(const std::filesystem::path& corpus_dir) {
  const auto path = corpus_dir / "index.tsv";
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<IndexEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_fields(line);
    if (fields.size() != 10) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected 10 fields");
    }
    IndexEntry e;
    try {
      e.id = fields[0];
      e.split = split_from_string(fields[1]);
      e.clean_file = fields[2];
      e.noisy_file = fields[3];
      e.snr_db = std::stod(fields[4]);
      e.measured_snr_db = std::stod(fields[5]);
      e.noise_offset = std::stoull(fields[6]);
      e.noise_gain = std::stod(fields[7]);
      e.output_gain = std::stod(fields[8]);
      e.seed = std::stoull(fields[9]);
    } catch (const std::logic_error&) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad field");
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace diffse

// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Command-line driver: make-dataset, train, enhance, evaluate, validate-sde.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "diffse/audio_data.hpp"
#include "diffse/config.hpp"
#include "diffse/metrics.hpp"
#include "diffse/pipeline.hpp"
#include "diffse/wav.hpp"

namespace fs = std::filesystem;
using namespace diffse;

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
};

RunConfig resolve_config(const CommonOptions& common) {
  RunConfig cfg = common.config_path.empty() ? RunConfig{} : load_run_config(common.config_path);
  if (common.seed) cfg.seed = *common.seed;
  return cfg;
}

void add_common(CLI::App* cmd, CommonOptions& common) {
  cmd->add_option("--config", common.config_path, "JSON run configuration (see docs/reference_config.json)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", common.seed, "Master seed (overrides the config)");
}

std::string json_number(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::vector<fs::path> wav_files(const fs::path& p) {
  if (!fs::is_directory(p)) return {p};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(p)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw InvalidInput("no .wav files in " + p.string());
  return out;
}

// ---------------------------------------------------------------- make-dataset

struct DatasetOptions {
  CommonOptions common;
  std::string manifest;
  bool synthetic = false;
  SyntheticCorpusSpec spec;
  std::string out;
  int threads = 0;
};

int cmd_make_dataset(const DatasetOptions& o) {
  RunConfig cfg = resolve_config(o.common);
  cfg.dataset_dir = o.out;
  cfg.validate();
  Manifest manifest;
  if (o.synthetic) {
    SyntheticCorpusSpec spec = o.spec;
    spec.seed = cfg.seed;
    manifest = synthetic_manifest(spec);
  } else {
    manifest = read_manifest(o.manifest);
  }
  fs::create_directories(o.out);
  const auto t0 = std::chrono::steady_clock::now();
  const auto entries = build_dataset(manifest, o.out, o.threads);
  write_manifest(fs::path(o.out) / "manifest.tsv", manifest);
  write_config_snapshot(o.out, cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cerr << "wrote " << entries.size() << " pairs to " << o.out << " in " << std::fixed
            << std::setprecision(1) << secs << " s\n";
  return 0;
}

// ----------------------------------------------------------------------- train

struct TrainOptions {
  CommonOptions common;
  std::string dataset;
  std::string out;
  std::optional<std::string> mode;
  std::optional<std::string> alpha;
  std::optional<std::string> tweedie;
  std::optional<std::string> convention;
  std::optional<int> steps;
  int log_every = 100;
};

int cmd_train(const TrainOptions& o) {
  RunConfig cfg = resolve_config(o.common);
  if (o.mode) cfg.loss.mode = loss_mode_from_string(*o.mode);
  if (o.alpha) cfg.loss.alpha_schedule = AlphaSchedule::parse(*o.alpha);
  if (o.tweedie) cfg.loss.tweedie_factor = tweedie_from_string(*o.tweedie);
  if (o.convention) cfg.oracle_convention = convention_from_string(*o.convention);
  if (o.steps) cfg.loss.total_steps = *o.steps;
  if (!o.dataset.empty()) cfg.dataset_dir = o.dataset;
  if (!o.out.empty()) cfg.output_dir = o.out;
  cfg.model.role =
      cfg.loss.mode == LossMode::supervised_direct ? ScorerRole::direct : ScorerRole::score;
  cfg.validate();
  if (cfg.dataset_dir.empty() || cfg.output_dir.empty()) {
    throw ConfigError("train: --dataset and --out (or paths in the config) are required");
  }
  const fs::path out = cfg.output_dir;
  write_config_snapshot(out, cfg);

  const auto items = load_split(cfg.dataset_dir, Split::train);
  if (items.empty()) throw InvalidInput("train: corpus has no train split");
  const auto pairs = training_pairs(items, cfg.stft);
  NeuralScorer model(cfg.model, cfg.sde, derive_seed(cfg.seed, 0x6d6f64656cULL));
  std::cerr << "training " << to_string(cfg.loss.mode) << " (" << model.parameter_count()
            << " parameters) on " << pairs.size() << " pairs for " << cfg.loss.total_steps
            << " steps\n";

  const auto t0 = std::chrono::steady_clock::now();
  const auto on_step = [&](const TrainRecord& r) {
    if (o.log_every > 0 && r.step % o.log_every == 0) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cerr << "step " << r.step << "  total " << std::setprecision(5) << r.total
                << "  score " << r.score_loss << "  sup " << r.sup_loss << "  alpha "
                << r.alpha_mean << "  (" << std::fixed << std::setprecision(0) << secs << " s)\n"
                << std::defaultfloat;
    }
  };
  try {
    TrainResult result = train(pairs, std::move(model), cfg.loss, cfg.seed, on_step);
    save_checkpoint(out / "checkpoint.bin", result.model,
                    static_cast<std::uint64_t>(cfg.loss.total_steps));
    write_loss_log(out / "loss_log.tsv", result.log);
  } catch (const TrainingDiverged& e) {
    write_loss_log(out / "loss_log.tsv", std::span<const TrainRecord>(&e.record(), 1));
    throw;
  }
  std::cerr << "wrote " << (out / "checkpoint.bin").string() << "\n";
  return 0;
}

// --------------------------------------------------------------------- enhance

struct EnhanceOptions {
  CommonOptions common;
  std::string checkpoint;
  bool oracle = false;
  std::string input;
  std::string reference;
  std::string out;
  std::optional<int> sampler_steps;
  std::optional<std::string> convention;
  bool verbose = false;
};

int cmd_enhance(const EnhanceOptions& o) {
  RunConfig cfg = resolve_config(o.common);
  if (o.sampler_steps) cfg.sampler.n_steps = *o.sampler_steps;
  if (o.convention) cfg.oracle_convention = convention_from_string(*o.convention);
  cfg.output_dir = o.out;
  std::optional<NeuralScorer> model;
  if (!o.checkpoint.empty()) {
    const Checkpoint ckpt = load_checkpoint(o.checkpoint);
    model.emplace(model_from_checkpoint(ckpt));
    cfg.sde = ckpt.sde;
    cfg.model = ckpt.architecture;
    // Keep the snapshot consistent with the checkpoint's role.
    if (ckpt.architecture.role == ScorerRole::direct) {
      cfg.loss.mode = LossMode::supervised_direct;
    } else if (cfg.loss.mode == LossMode::supervised_direct) {
      cfg.loss.mode = LossMode::weighted;
    }
  }
  cfg.validate();
  if (o.oracle && o.reference.empty()) {
    throw ConfigError("enhance: --oracle needs --reference (clean file or directory)");
  }

  const auto inputs = wav_files(o.input);
  std::vector<fs::path> refs;
  if (!o.reference.empty()) {
    if (fs::is_directory(o.reference)) {
      for (const auto& in : inputs) refs.push_back(fs::path(o.reference) / in.filename());
    } else {
      if (inputs.size() != 1) throw InvalidInput("enhance: a single reference needs a single input");
      refs.emplace_back(o.reference);
    }
  }
  fs::create_directories(o.out);
  write_config_snapshot(o.out, cfg);

  std::vector<double> scores;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Waveform noisy = read_wav(inputs[i]);
    std::optional<Waveform> clean;
    if (!refs.empty()) clean = read_wav(refs[i]);
    SamplerConfig sc = cfg.sampler;
    sc.seed = derive_seed(cfg.seed, cfg.sampler.seed, i);
    const std::string name = inputs[i].filename().string();
    ProgressFn progress;
    if (o.verbose) {
      progress = [&](const SamplerProgress& p) {
        std::cout << "{\"file\":\"" << name << "\",\"step\":" << p.step
                  << ",\"t\":" << json_number(p.t) << ",\"residual_rms\":"
                  << json_number(p.residual_rms) << "}\n";
      };
    }
    Waveform est;
    if (o.oracle) {
      const OracleScore oracle = make_oracle(*clean, noisy, cfg.sde, cfg.stft, cfg.oracle_convention);
      est = enhance(noisy, oracle, cfg.sde, sc, cfg.stft, progress);
    } else {
      est = enhance_with(*model, noisy, sc, cfg.stft, progress);
    }
    const std::size_t clipped = write_wav(fs::path(o.out) / name, est);
    std::cerr << name;
    if (clean) {
      scores.push_back(si_sdr(est, *clean));
      std::cerr << "  SI-SDR " << std::fixed << std::setprecision(2) << scores.back() << " dB"
                << "  (input " << si_sdr(noisy, *clean) << " dB)" << std::defaultfloat;
    }
    if (clipped > 0) std::cerr << "  [" << clipped << " samples clipped]";
    std::cerr << "\n";
  }
  if (scores.size() > 1) {
    const auto s = summarize("si_sdr", scores);
    std::cerr << "mean SI-SDR " << std::fixed << std::setprecision(2) << s.mean << " ± "
              << s.std_error << " dB (" << scores.size() << ")\n";
  }
  return 0;
}

// -------------------------------------------------------------------- evaluate

struct EvaluateOptions {
  CommonOptions common;
  std::string enhanced;
  std::string reference;
  std::string out;
  bool spectral_mse = false;
  std::vector<std::string> external;
  int threads = 0;
};

int cmd_evaluate(const EvaluateOptions& o) {
  RunConfig cfg = resolve_config(o.common);
  cfg.output_dir = o.out;
  cfg.validate();
  MetricSet set;
  if (o.spectral_mse) set.spectral_mse = cfg.stft;
  for (const auto& spec : o.external) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("evaluate: --external expects name=command, got '" + spec + "'");
    }
    set.external.push_back({spec.substr(0, eq), spec.substr(eq + 1)});
  }
  std::vector<EvalPair> pairs;
  for (const auto& path : wav_files(o.enhanced)) {
    EvalPair p;
    p.id = path.stem().string();
    p.estimate_path = path;
    p.reference_path = fs::path(o.reference) / path.filename();
    p.estimate = read_wav(p.estimate_path);
    p.reference = read_wav(p.reference_path);
    pairs.push_back(std::move(p));
  }
  const EvalReport report = evaluate_corpus(pairs, set, o.threads);
  fs::create_directories(o.out);
  write_report_tsv(fs::path(o.out) / "report.tsv", report);
  const std::string table = summary_table(report);
  {
    std::ofstream f(fs::path(o.out) / "summary.txt");
    f << table;
  }
  write_config_snapshot(o.out, cfg);
  std::cout << table;
  return 0;
}

// ---------------------------------------------------------------- validate-sde

struct ValidateOptions {
  CommonOptions common;
  std::string out;
  int paths = 10000;
  int steps = 1000;
  int bins = 8;
  int threads = 0;
  double tolerance = 0.02;
};

int cmd_validate_sde(const ValidateOptions& o) {
  RunConfig cfg = resolve_config(o.common);
  cfg.output_dir = o.out;
  cfg.validate();
  if (o.bins < 1) throw ConfigError("validate-sde: --bins must be positive");
  Rng rng(derive_seed(cfg.seed, 0x736465ULL));
  const ComplexSpectrogram x0 = rng.complex_normal(o.bins, o.bins);
  const ComplexSpectrogram y = x0 + 0.5 * rng.complex_normal(o.bins, o.bins);

  SimulationOptions sim;
  sim.n_steps = o.steps;
  sim.n_paths = o.paths;
  sim.seed = derive_seed(cfg.seed, 0x70617468ULL);
  sim.checkpoints = {0.25 * cfg.sde.t_max, 0.5 * cfg.sde.t_max};
  sim.threads = o.threads;
  const auto t0 = std::chrono::steady_clock::now();
  const auto snaps = simulate_forward(x0, y, cfg.sde, sim);
  const auto checks = compare_with_closed_form(snaps, x0, y, cfg.sde, o.paths);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  fs::create_directories(o.out);
  write_kernel_report(fs::path(o.out) / "kernel_report.tsv", checks);
  write_config_snapshot(o.out, cfg);
  bool ok = true;
  for (const auto& c : checks) {
    const bool pass = c.relative_error <= o.tolerance && c.max_mean_z <= 3.0;
    ok = ok && pass;
    std::cerr << "t=" << c.t << "  sigma^2 " << c.closed_form_variance << " vs "
              << c.empirical_variance << "  rel.err " << c.relative_error << "  max |z| "
              << c.max_mean_z << (pass ? "" : "  OUT OF TOLERANCE") << "\n";
  }
  std::cerr << "simulated " << o.paths << " paths x " << o.steps << " steps in " << std::fixed
            << std::setprecision(1) << secs << " s\n";
  return ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Training reallocates large activation buffers every step; keep them on
  // the heap instead of paying an mmap/munmap round trip each time.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"Score-based diffusion speech enhancement with a weighted generative-supervised loss"};
  app.require_subcommand(1);

  DatasetOptions ds;
  auto* make = app.add_subcommand("make-dataset", "Materialize clean/noisy WAV pairs and index.tsv");
  add_common(make, ds.common);
  auto* manifest_opt =
      make->add_option("--manifest", ds.manifest, "Mixture manifest (id split clean noise snr_db seed)")
          ->check(CLI::ExistingFile);
  auto* synth_flag = make->add_flag("--synthetic", ds.synthetic, "Generate a synthetic corpus");
  manifest_opt->excludes(synth_flag);
  make->add_option("--n-train", ds.spec.n_train, "Synthetic train pairs")->capture_default_str();
  make->add_option("--n-valid", ds.spec.n_valid, "Synthetic validation pairs")->capture_default_str();
  make->add_option("--n-test", ds.spec.n_test, "Synthetic test pairs")->capture_default_str();
  make->add_option("--duration", ds.spec.duration_s, "Synthetic utterance length in seconds")
      ->capture_default_str();
  make->add_option("--snrs", ds.spec.snrs_db, "Synthetic SNR grid in dB")->capture_default_str();
  make->add_option("--out", ds.out, "Output corpus directory")->required();
  make->add_option("--threads", ds.threads, "Worker threads (0: all cores)")->capture_default_str();

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train a scorer on a corpus");
  add_common(train_cmd, tr.common);
  train_cmd->add_option("--dataset", tr.dataset, "Corpus directory from make-dataset");
  train_cmd->add_option("--out", tr.out, "Output directory for checkpoint and loss log");
  train_cmd->add_option("--mode", tr.mode, "score_only | weighted | supervised_direct (default weighted)");
  train_cmd->add_option("--alpha", tr.alpha, "paper | const:<c> (default paper)");
  train_cmd->add_option("--tweedie", tr.tweedie, "half | full (default half)");
  train_cmd->add_option("--score-convention", tr.convention, "conjugate | real-view (default conjugate)");
  train_cmd->add_option("--steps", tr.steps, "Optimizer steps (default 10000)");
  train_cmd->add_option("--log-every", tr.log_every, "Progress interval in steps")->capture_default_str();

  EnhanceOptions en;
  auto* enh = app.add_subcommand("enhance", "Enhance noisy WAV files");
  add_common(enh, en.common);
  auto* ckpt_opt = enh->add_option("--checkpoint", en.checkpoint, "Trained checkpoint")
                       ->check(CLI::ExistingFile);
  auto* oracle_flag = enh->add_flag("--oracle", en.oracle, "Use the analytic score of the clean reference");
  ckpt_opt->excludes(oracle_flag);
  enh->add_option("--input", en.input, "Noisy WAV file or directory")->required()->check(CLI::ExistingPath);
  enh->add_option("--reference", en.reference, "Clean WAV file or directory (SI-SDR logging, oracle)")
      ->check(CLI::ExistingPath);
  enh->add_option("--out", en.out, "Output directory")->required();
  enh->add_option("--sampler-steps", en.sampler_steps, "Reverse steps (default 30)");
  enh->add_option("--score-convention", en.convention, "Oracle convention: conjugate | real-view");
  enh->add_flag("--verbose", en.verbose, "JSON progress records on stdout");

  EvaluateOptions ev;
  auto* eval = app.add_subcommand("evaluate", "Score enhanced files against references");
  add_common(eval, ev.common);
  eval->add_option("--enhanced", ev.enhanced, "Directory of enhanced WAVs")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--reference", ev.reference, "Directory of clean WAVs with the same names")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval->add_option("--out", ev.out, "Report directory")->required();
  eval->add_flag("--spectral-mse", ev.spectral_mse, "Also report spectral MSE");
  eval->add_option("--external", ev.external,
                   "External metric name=command with {estimate} and {reference} placeholders");
  eval->add_option("--threads", ev.threads, "Worker threads (0: all cores)")->capture_default_str();

  ValidateOptions va;
  auto* val = app.add_subcommand("validate-sde", "Compare simulated forward moments with the closed-form kernel");
  add_common(val, va.common);
  val->add_option("--out", va.out, "Report directory")->required();
  val->add_option("--paths", va.paths, "Monte-Carlo paths")->capture_default_str();
  val->add_option("--steps", va.steps, "Euler-Maruyama steps")->capture_default_str();
  val->add_option("--bins", va.bins, "Side of the square toy spectrogram")->capture_default_str();
  val->add_option("--threads", va.threads, "Worker threads (0: all cores)")->capture_default_str();
  val->add_option("--tolerance", va.tolerance, "Allowed relative variance error")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  if (make->parsed() && ds.manifest.empty() && !ds.synthetic) {
    std::cerr << "make-dataset: one of --manifest or --synthetic is required\n";
    return 2;
  }
  if (enh->parsed() && en.checkpoint.empty() && !en.oracle) {
    std::cerr << "enhance: one of --checkpoint or --oracle is required\n";
    return 2;
  }
  try {
    if (make->parsed()) return cmd_make_dataset(ds);
    if (train_cmd->parsed()) return cmd_train(tr);
    if (enh->parsed()) return cmd_enhance(en);
    if (eval->parsed()) return cmd_evaluate(ev);
    if (val->parsed()) return cmd_validate_sde(va);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

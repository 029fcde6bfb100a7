// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include "diffse/audio_data.hpp"
#include "diffse/metrics.hpp"
#include "diffse/neural_scorer.hpp"
#include "diffse/pipeline.hpp"
#include "diffse/sampler.hpp"
#include "diffse/sde.hpp"
#include "diffse/spectral.hpp"
#include "diffse/training.hpp"

using namespace diffse;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel_l2(const ComplexSpectrogram& a, const ComplexSpectrogram& b) {
  return std::sqrt((a - b).abs2().sum() / b.abs2().sum());
}

Outcome kernel_vs_simulation() {
  const SdeParams p;
  Rng rng(1);
  const ComplexSpectrogram x0 = rng.complex_normal(8, 8);
  const ComplexSpectrogram y = x0 + 0.5 * rng.complex_normal(8, 8);
  SimulationOptions opts;
  opts.n_paths = 10000;
  opts.n_steps = 1000;
  opts.seed = 7;
  opts.checkpoints = {0.25, 0.5};
  const auto start = std::chrono::steady_clock::now();
  const auto checks = compare_with_closed_form(simulate_forward(x0, y, p, opts), x0, y, p,
                                               opts.n_paths);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Outcome o{checks.size() == 3, ""};
  for (const auto& c : checks) {
    o.pass = o.pass && c.relative_error <= 0.02 && c.max_mean_z <= 3.0;
    o.detail += fmt("t=%.2f var err %.2f%% max|z| %.2f; ", c.t, 100 * c.relative_error, c.max_mean_z);
  }
  o.detail += fmt("%.1f s", secs);
  return o;
}

Outcome sigma_alpha_endpoints() {
  const SdeParams p;
  bool ok = kernel_variance(0.0, p) == 0.0 && kernel_std(0.0, p) == 0.0;
  ok = ok && alpha_weight(p.t_eps, p) == 1.0 && alpha_weight(p.t_max, p) == 0.0;
  bool decreasing = true;
  double prev = alpha_weight(p.t_eps, p);
  for (int i = 1; i < 1000; ++i) {
    const double a = alpha_weight(p.t_eps + (p.t_max - p.t_eps) * i / 999.0, p);
    decreasing = decreasing && a < prev;
    prev = a;
  }
  // Independent high-precision evaluation of the variance formula at t = 0.5.
  const double sigma_half = 0.121657333898375;
  const double rel = std::abs(kernel_std(0.5, p) - sigma_half) / sigma_half;
  return {ok && decreasing && rel <= 1e-12,
          fmt("sigma(0)=%g alpha(t_eps)=%g alpha(T)=%g monotone=%d sigma(0.5) rel err %.1e",
              kernel_std(0.0, p), alpha_weight(p.t_eps, p), alpha_weight(p.t_max, p),
              decreasing ? 1 : 0, rel)};
}

Outcome oracle_zero_losses() {
  const SdeParams p;
  Rng rng(2);
  double worst_score = 0.0;
  double worst_sup = 0.0;
  for (int i = 0; i < 100; ++i) {
    const ComplexSpectrogram x0 = rng.complex_normal(6, 5);
    const ComplexSpectrogram y = x0 + rng.complex_normal(6, 5);
    const double t = rng.uniform(p.t_eps, p.t_max);
    const auto d = sample_perturbed(x0, y, t, p, rng);
    const OracleScore conj(x0, p, ScoreConvention::conjugate);
    const OracleScore real(x0, p, ScoreConvention::real_view);
    const ComplexSpectrogram s_conj = conj.evaluate(d.x_t, y, t);
    worst_score = std::max(worst_score, score_matching_loss(s_conj, d.z, kernel_std(t, p)));
    worst_sup = std::max({worst_sup,
                          supervised_loss(d.x_t, y, t, s_conj, x0, p, TweedieFactor::full),
                          supervised_loss(d.x_t, y, t, real.evaluate(d.x_t, y, t), x0, p,
                                          TweedieFactor::half)});
  }
  return {worst_score <= 1e-12 && worst_sup <= 1e-12,
          fmt("max score loss %.1e, max supervised loss %.1e", worst_score, worst_sup)};
}

Outcome tweedie_recovery() {
  const SdeParams p;
  Rng rng(3);
  double worst = 0.0;
  double worst_mismatch_identity = 0.0;
  double min_mismatch_err = 1e9;
  for (int i = 0; i < 100; ++i) {
    const ComplexSpectrogram x0 = rng.complex_normal(6, 5);
    const ComplexSpectrogram y = x0 + rng.complex_normal(6, 5);
    const double t = rng.uniform(p.t_eps, p.t_max);
    const auto d = sample_perturbed(x0, y, t, p, rng);
    const ComplexSpectrogram s_conj = OracleScore(x0, p).evaluate(d.x_t, y, t);
    const ComplexSpectrogram s_real =
        OracleScore(x0, p, ScoreConvention::real_view).evaluate(d.x_t, y, t);
    worst = std::max({worst,
                      rel_l2(tweedie_estimate(d.x_t, y, t, s_real, p, TweedieFactor::half), x0),
                      rel_l2(tweedie_estimate(d.x_t, y, t, s_conj, p, TweedieFactor::full), x0)});
    // Paper factor with the conjugate score: the corrected state is (x_t + mu) / 2.
    const ComplexSpectrogram mismatched =
        tweedie_estimate(d.x_t, y, t, s_conj, p, TweedieFactor::half);
    const double e = mean_decay(t, p);
    const ComplexSpectrogram mu = kernel_mean(x0, y, t, p);
    const ComplexSpectrogram predicted = ((d.x_t + mu) / 2.0 - (1.0 - e) * y) / e;
    worst_mismatch_identity = std::max(worst_mismatch_identity, rel_l2(mismatched, predicted));
    min_mismatch_err = std::min(min_mismatch_err, rel_l2(mismatched, x0));
  }
  return {worst <= 1e-9 && worst_mismatch_identity <= 1e-9 && min_mismatch_err > 1e-3,
          fmt("matched pairs max rel err %.1e; mismatched pair = (x_t+mu)/2 form to %.1e, "
              "min rel err to x0 %.3f",
              worst, worst_mismatch_identity, min_mismatch_err)};
}

Outcome oracle_enhancement() {
  const SdeParams p;
  const StftConfig stft_cfg;
  const auto start = std::chrono::steady_clock::now();
  Rng rng(4);
  double min_sdr = 1e9;
  double min_bare = 1e9;
  double mean_in = 0.0;
  ComplexSpectrogram x0_first;
  ComplexSpectrogram y_first;
  for (int i = 0; i < 10; ++i) {
    const auto kind = static_cast<CleanKind>(i % 3);
    const Waveform clean = synth_clean(1.0, kind, rng);
    const Waveform noise = synth_noise(2.0, static_cast<NoiseKind>(i % 3), rng);
    const Waveform noisy = mix_at_snr(clean, noise, 0.0, rng).noisy;
    const OracleScore oracle = make_oracle(clean, noisy, p, stft_cfg);
    SamplerConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(i);
    min_sdr = std::min(min_sdr, si_sdr(enhance(noisy, oracle, p, cfg, stft_cfg), clean));
    cfg.final_tweedie = false;
    min_bare = std::min(min_bare, si_sdr(enhance(noisy, oracle, p, cfg, stft_cfg), clean));
    mean_in += si_sdr(noisy, clean) / 10;
    if (i == 0) {
      x0_first = oracle.clean();
      y_first = stft(scaled(noisy, normalization_gain(noisy)), stft_cfg).bins;
    }
  }
  // Error of the bare sampler state against step count, mean over 20 seeds.
  const OracleScore oracle(x0_first, p);
  std::vector<double> errs;
  for (int n : {8, 16, 32, 64}) {
    SamplerConfig cfg;
    cfg.n_steps = n;
    cfg.final_tweedie = false;
    double acc = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      cfg.seed = seed;
      acc += rel_l2(reverse_diffusion(y_first, oracle, p, cfg).final_state.x, x0_first) / 20;
    }
    errs.push_back(acc);
  }
  const bool monotone = std::is_sorted(errs.rbegin(), errs.rend()) &&
                        std::adjacent_find(errs.begin(), errs.end()) == errs.end();
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {min_sdr >= 20.0 && monotone && secs < 300.0,
          fmt("input %.2f dB, min output %.2f dB (bare sampler min %.2f dB); "
              "error at 8/16/32/64 steps %.4f %.4f %.4f %.4f; %.1f s",
              mean_in, min_sdr, min_bare, errs[0], errs[1], errs[2], errs[3], secs)};
}

Outcome gradient_correctness() {
  const SdeParams p;
  ScorerArchitecture arch;
  arch.hidden_channels = {16, 16, 16};
  arch.dilations = {1, 2, 4, 1};
  NeuralScorer model(arch, p, 5);
  // Move the output layer off zero so every layer receives gradient.
  std::vector<double> theta(model.parameters().begin(), model.parameters().end());
  Rng rng(5);
  for (double& v : theta) v += 0.05 * rng.normal();
  model.set_parameters(theta);

  std::vector<LossSample> samples;
  for (int i = 0; i < 3; ++i) {
    const TrainingPair pair{rng.complex_normal(12, 10), rng.complex_normal(12, 10)};
    samples.push_back(draw_loss_sample(pair, p, rng));
  }
  LossConfig cfg;
  cfg.mode = LossMode::weighted;
  const auto inputs = scorer_inputs(samples, cfg, model.sentinel_time());
  const OutputLoss loss = make_output_loss(samples, cfg, p);
  const auto r = gradient_check(model, inputs, loss, 1e-4, 300, 9);
  return {r.indices.size() >= 200 && r.max_relative_error <= 1e-4,
          fmt("%zu of %zu parameters, max relative error %.2e", r.indices.size(),
              model.parameter_count(), r.max_relative_error)};
}

Outcome reduction_identities() {
  const SdeParams p;
  Rng rng(6);
  bool ok = true;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<LossSample> samples;
    std::vector<ComplexSpectrogram> outputs;
    for (int i = 0; i < 4; ++i) {
      const TrainingPair pair{rng.complex_normal(5, 6), rng.complex_normal(5, 6)};
      samples.push_back(draw_loss_sample(pair, p, rng));
      outputs.push_back(rng.complex_normal(5, 6) * 10.0);
    }
    double score_mean = 0.0;
    double sup_mean = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& s = samples[i];
      score_mean += score_matching_loss(outputs[i], s.z, kernel_std(s.t, p));
      sup_mean += supervised_loss(s.x_t, s.y, s.t, outputs[i], s.x0, p, TweedieFactor::half);
    }
    score_mean /= static_cast<double>(samples.size());
    sup_mean /= static_cast<double>(samples.size());
    LossConfig cfg;
    cfg.alpha_schedule = AlphaSchedule::parse("const:0");
    const double at0 = evaluate_batch_loss(samples, outputs, cfg, p).total;
    cfg.alpha_schedule = AlphaSchedule::parse("const:1");
    const double at1 = evaluate_batch_loss(samples, outputs, cfg, p).total;
    cfg.mode = LossMode::score_only;
    cfg.alpha_schedule = AlphaSchedule{};
    const double score_only = evaluate_batch_loss(samples, outputs, cfg, p).total;
    ok = ok && at0 == score_mean && at1 == sup_mean && score_only == score_mean;
  }
  return {ok, "alpha=0 and score_only equal the score-matching batch mean, alpha=1 the "
              "supervised batch mean, bit for bit over 20 batches"};
}

Outcome stft_round_trip() {
  double worst = 0.0;
  for (bool compression : {true, false}) {
    StftConfig cfg;
    cfg.compression_enabled = compression;
    Rng rng(compression ? 10 : 11);
    for (int i = 0; i < 50; ++i) {
      Waveform w;
      w.samples.resize(1000 + rng.index(30000));
      for (double& v : w.samples) v = 0.3 * rng.normal();
      const Waveform back = istft(stft(w, cfg), cfg);
      double num = 0.0;
      double den = 0.0;
      for (std::size_t k = 0; k < w.size(); ++k) {
        num += (back.samples[k] - w.samples[k]) * (back.samples[k] - w.samples[k]);
        den += w.samples[k] * w.samples[k];
      }
      worst = std::max(worst, std::sqrt(num / den));
    }
  }
  return {worst <= 1e-6, fmt("max relative error %.2e over 100 round trips", worst)};
}

Outcome si_sdr_properties() {
  Rng rng(12);
  Waveform ref;
  Waveform noise;
  for (int i = 0; i < 8000; ++i) {
    ref.samples.push_back(rng.normal());
    noise.samples.push_back(rng.normal());
  }
  double rn = 0.0, rr = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    rn += ref.samples[i] * noise.samples[i];
    rr += ref.samples[i] * ref.samples[i];
  }
  double nn = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    noise.samples[i] -= rn / rr * ref.samples[i];
    nn += noise.samples[i] * noise.samples[i];
  }
  Waveform est = ref;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    est.samples[i] += std::sqrt(rr / (10.0 * nn)) * noise.samples[i];
  }
  const double ten = si_sdr(est, ref);
  Waveform louder = est;
  for (double& v : louder.samples) v *= 4.0;  // power-of-two gain keeps the arithmetic exact
  const bool invariant = si_sdr(louder, ref) == ten;

  // Hand computation for n = 3: values 1, 2, 6 -> mean 3, sd sqrt(7), se sqrt(7/3).
  EvalReport report;
  report.ids = {"a", "b", "c"};
  report.metrics.push_back(summarize("si_sdr", {1.0, 2.0, 6.0}));
  const auto& m = report.metric("si_sdr");
  const bool se_ok = std::abs(m.std_error - std::sqrt(7.0 / 3.0)) <= 1e-15 && m.mean == 3.0;
  const std::string table = summary_table(report);
  const bool format_ok = table.find("3.00 ± 1.53") != std::string::npos;
  return {invariant && std::abs(ten - 10.0) <= 1e-6 && se_ok && format_ok,
          fmt("orthogonal case %.9f dB, scale invariant=%d, se(1,2,6)=%.6f, table \"%s\"", ten,
              invariant ? 1 : 0, m.std_error,
              table.substr(0, table.find('\n')).c_str())};
}

Outcome desk_training_trend() {
  const auto start = std::chrono::steady_clock::now();
  const auto dir = std::filesystem::temp_directory_path() /
                   ("diffse_acceptance_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);

  SyntheticCorpusSpec spec;
  spec.n_train = 100;
  spec.n_valid = 0;
  spec.n_test = 20;
  spec.seed = 2024;
  build_dataset(synthetic_manifest(spec), dir, 0);
  const auto train_items = load_split(dir, Split::train);
  const auto test_items = load_split(dir, Split::test);
  const StftConfig stft_cfg;
  const auto pairs = training_pairs(train_items, stft_cfg);

  double input = 0.0;
  for (const auto& it : test_items) input += si_sdr(it.noisy, it.clean);
  input /= static_cast<double>(test_items.size());

  Outcome o{true, fmt("input %.2f dB;", input)};
  for (auto mode : {LossMode::score_only, LossMode::weighted, LossMode::supervised_direct}) {
    const SdeParams p;
    LossConfig cfg;
    cfg.mode = mode;
    cfg.total_steps = 10000;
    cfg.learning_rate = 1e-3;
    cfg.crop_freq = 64;
    cfg.crop_frames = 32;
    ScorerArchitecture arch;
    arch.role = mode == LossMode::supervised_direct ? ScorerRole::direct : ScorerRole::score;
    const auto result = train(pairs, NeuralScorer(arch, p, 17), cfg, 99);

    std::vector<double> scores;
    for (std::size_t i = 0; i < test_items.size(); ++i) {
      SamplerConfig sampler;
      sampler.seed = i;
      scores.push_back(
          si_sdr(enhance_with(result.model, test_items[i].noisy, sampler, stft_cfg),
                 test_items[i].clean));
    }
    const auto s = summarize(to_string(mode), scores);
    const bool improved = s.mean - input >= 5.0;
    o.pass = o.pass && improved;
    o.detail += fmt(" %s %.2f ± %.2f dB (%+.2f)", to_string(mode).c_str(), s.mean, s.std_error,
                    s.mean - input);
    if (mode == LossMode::weighted) {
      std::size_t both = 0;
      for (const auto& r : result.log) both += (r.score_term > 0.0 && r.sup_term > 0.0) ? 1 : 0;
      const double frac = static_cast<double>(both) / static_cast<double>(result.log.size());
      o.pass = o.pass && frac >= 0.99;
      o.detail += fmt(" [both terms active in %.1f%% of steps]", 100 * frac);
    }
    o.detail += ";";
  }
  std::filesystem::remove_all(dir);
  o.detail += fmt(" %.0f s", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  return o;
}

}  // namespace

// Runs every criterion, or only the numbers given on the command line.
int main(int argc, char** argv) {
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(static_cast<std::size_t>(std::stoul(argv[i])));
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"kernel closed form vs simulation", kernel_vs_simulation},
      {"sigma and alpha endpoints", sigma_alpha_endpoints},
      {"oracle-zero losses", oracle_zero_losses},
      {"tweedie exact recovery", tweedie_recovery},
      {"oracle end-to-end enhancement", oracle_enhancement},
      {"gradient correctness", gradient_correctness},
      {"desk-scale training trend", desk_training_trend},
      {"reduction identities", reduction_identities},
      {"stft round trip", stft_round_trip},
      {"si-sdr properties", si_sdr_properties},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.contains(i + 1)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

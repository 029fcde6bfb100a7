// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "diffse/neural_scorer.hpp"
#include "diffse/random.hpp"
#include "diffse/sde.hpp"

namespace diffse {

enum class LossMode { score_only, weighted, supervised_direct };


std::string to_string(LossMode m);
LossMode loss_mode_from_string(const std::string& s);

/// Weight schedule of the supervised term: "paper" or "const:<c>".
struct AlphaSchedule {
  enum class Kind { paper, constant };
  Kind kind = Kind::paper;
  double value = 0.0;

  static AlphaSchedule parse(const std::string& text);
  [[nodiscard]] std::string str() const;
};

struct LossConfig {
  LossMode mode = LossMode::weighted;
  TweedieFactor tweedie_factor = TweedieFactor::half;
  AlphaSchedule alpha_schedule;
  int batch_size = 8;
  double learning_rate = 1e-4;
  /// 0 disables the parameter average.
  double ema_decay = 0.999;
  int total_steps = 10000;
  double grad_clip = 1.0;
  /// Random training crops; 0 uses the full extent.
  int crop_freq = 0;
  int crop_frames = 0;

  void validate() const;
};

/// Telemetry of one optimizer step (batch means).
struct TrainRecord {
  std::int64_t step = 0;
  std::vector<double> t;
  double score_loss = 0.0;  // L_theta
  double sup_loss = 0.0;    // supervised term
  double alpha_mean = 0.0;
  double score_term = 0.0;  // (1 - alpha) L_theta
  double sup_term = 0.0;    // alpha L_sup
  double total = 0.0;
};

/// ||s + z / sigma_t||^2 summed over bins. Throws NumericalDomainError for
/// sigma_t <= 0.
double score_matching_loss(const ComplexSpectrogram& s, const ComplexSpectrogram& z,
                           double sigma_t);

/// Clean estimate x0_hat = e^{gamma t} (x_t + c sigma(t)^2 s - (1 - e^{-gamma t}) y).
ComplexSpectrogram tweedie_estimate(const ComplexSpectrogram& x_t,
                                    const ComplexSpectrogram& y, double t,
                                    const ComplexSpectrogram& s, const SdeParams& p,
                                    TweedieFactor factor);

/// ||x_t + c sigma(t)^2 s - mu(x0, y, t)||^2.
double supervised_loss(const ComplexSpectrogram& x_t, const ComplexSpectrogram& y,
                       double t, const ComplexSpectrogram& s,
                       const ComplexSpectrogram& x0, const SdeParams& p,
                       TweedieFactor factor);

/// alpha_t = (sigma(T) - sigma(t)) / (sigma(T) - sigma(t_eps)).
double alpha_weight(double t, const SdeParams& p);

double alpha_value(const AlphaSchedule& schedule, double t, const SdeParams& p);

/// Mean over bins of |output - x0|^2.
double supervised_direct_loss(const ComplexSpectrogram& output,
                              const ComplexSpectrogram& x0);

struct TrainingPair {
  ComplexSpectrogram x0;
  ComplexSpectrogram y;
};

/// Fixed draws for one batch element: t ~ U(t_eps, T], z ~ CN(0, I).
struct LossSample {
  ComplexSpectrogram x0;
  ComplexSpectrogram y;
  ComplexSpectrogram z;
  ComplexSpectrogram x_t;
  double t = 0.0;
};

LossSample draw_loss_sample(const TrainingPair& pair, const SdeParams& p, Rng& rng);

/// Loss of a batch given the model outputs, plus the output gradient of the
/// batch-mean total. In score modes the outputs are scores (conjugate
/// convention); in supervised_direct they are clean estimates.
struct BatchLoss {
  double total = 0.0;
  TrainRecord record;
  std::vector<ComplexSpectrogram> output_gradient;
};

BatchLoss evaluate_batch_loss(std::span<const LossSample> samples,
                              std::span<const ComplexSpectrogram> outputs,
                              const LossConfig& cfg, const SdeParams& p);

/// The batch loss as a function of network outputs, for gradient checks.
OutputLoss make_output_loss(std::vector<LossSample> samples, LossConfig cfg,
                            SdeParams p);

/// Network inputs for a batch: (x_t, y, t) in score modes, (y, y, sentinel)
/// in supervised_direct.
std::vector<ScorerInput> scorer_inputs(std::span<const LossSample> samples,
                                       const LossConfig& cfg, double sentinel_t);

/// Weighted objective of one batch: per element draw t and z, form x_t and
/// combine (1 - alpha_t) L_theta + alpha_t L_sup; returns the batch mean.
/// score_only forces alpha = 0. Throws InvalidInput on an empty batch.
std::pair<double, TrainRecord> weighted_loss(std::span<const TrainingPair> batch,
                                             Rng& rng, const ScoreModel& model,
                                             const LossConfig& cfg,
                                             const SdeParams& p);

/// Adam with a constant step size.
class Adam {
 public:
  explicit Adam(std::size_t n, double learning_rate, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);
  void step(std::span<double> params, std::span<const double> grad);
  [[nodiscard]] std::int64_t iterations() const { return t_; }

 private:
  std::vector<double> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

/// Scales `grad` in place so its L2 norm is at most max_norm; returns the
/// norm before clipping.
double clip_global_norm(std::span<double> grad, double max_norm);

class TrainingDiverged : public NumericalDomainError {
 public:
  TrainingDiverged(const std::string& what, TrainRecord record)
      : NumericalDomainError(what), record_(std::move(record)) {}
  [[nodiscard]] const TrainRecord& record() const { return record_; }

 private:
  TrainRecord record_;
};

struct TrainResult {
  /// Parameters used for inference (the running average when enabled).
  NeuralScorer model;
  std::vector<TrainRecord> log;
};

using TrainCallback = std::function<void(const TrainRecord&)>;

/// Runs cfg.total_steps Adam updates with global-norm clipping. Batch
/// composition, crops, t and z of element i at step k come from streams
/// derived from (seed, k, i). Throws TrainingDiverged on a non-finite loss.
TrainResult train(std::span<const TrainingPair> dataset, NeuralScorer model,
                  const LossConfig& cfg, std::uint64_t seed,
                  const TrainCallback& on_step = {});

/// Tab-separated: step, score_loss, sup_loss, alpha_mean, total, score_term,
/// sup_term. The header line is always written.
void write_loss_log(const std::filesystem::path& path,
                    std::span<const TrainRecord> records);

}  // namespace diffse

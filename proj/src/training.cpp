// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "diffse/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace diffse {

std::string to_string(LossMode m) {
  switch (m) {
    case LossMode::score_only: return "score_only";
    case LossMode::weighted: return "weighted";
    case LossMode::supervised_direct: return "supervised_direct";
  }
  return "?";
}

LossMode loss_mode_from_string(const std::string& s) {
  if (s == "score_only") return LossMode::score_only;
  if (s == "weighted") return LossMode::weighted;
  if (s == "supervised_direct") return LossMode::supervised_direct;
  throw ConfigError("unknown loss mode '" + s + "'");
}


AlphaSchedule AlphaSchedule::parse(const std::string& text) {
  AlphaSchedule a;
  if (text == "paper") return a;
  const std::string prefix = "const:";
  if (text.rfind(prefix, 0) == 0) {
    std::size_t used = 0;
    double c = 0.0;
    try {
      c = std::stod(text.substr(prefix.size()), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != text.size() - prefix.size() || !(c >= 0.0 && c <= 1.0)) {
      throw ConfigError("alpha schedule constant must be a number in [0, 1]: '" + text + "'");
    }
    a.kind = Kind::constant;
    a.value = c;
    return a;
  }
  throw ConfigError("alpha schedule must be 'paper' or 'const:<c>', got '" + text + "'");
}

std::string AlphaSchedule::str() const {
  if (kind == Kind::paper) return "paper";
  std::ostringstream os;
  os << "const:" << std::setprecision(17) << value;
  return os.str();
}

void LossConfig::validate() const {
  if (batch_size < 1) throw ConfigError("loss: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("loss: learning_rate must be > 0");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ConfigError("loss: ema_decay must be in [0, 1)");
  if (total_steps < 0) throw ConfigError("loss: total_steps must be >= 0");
  if (!(grad_clip > 0.0)) throw ConfigError("loss: grad_clip must be > 0");
  if (crop_freq < 0 || crop_frames < 0) throw ConfigError("loss: crop sizes must be >= 0");
  if (alpha_schedule.kind == AlphaSchedule::Kind::constant &&
      !(alpha_schedule.value >= 0.0 && alpha_schedule.value <= 1.0)) {
    throw ConfigError("loss: constant alpha must be in [0, 1]");
  }
}

double score_matching_loss(const ComplexSpectrogram& s, const ComplexSpectrogram& z,
                           double sigma_t) {
  require_same_shape(s, z, "score_matching_loss");
  if (!(sigma_t > 0.0)) throw NumericalDomainError("score_matching_loss: sigma_t must be > 0");
  return (s + z / sigma_t).abs2().sum();
}

namespace {

void check_tweedie_time(double t, const SdeParams& p, const char* what) {
  if (t < p.t_eps || t > p.t_max) {
    throw InvalidInput(std::string(what) + ": t = " + std::to_string(t) +
                       " outside [t_eps, t_max]");
  }
  if (!(mean_decay(t, p) > 1e-12)) {
    throw NumericalDomainError(std::string(what) + ": e^{-gamma t} underflows at t = " +
                               std::to_string(t));
  }
}

}  // namespace

ComplexSpectrogram tweedie_estimate(const ComplexSpectrogram& x_t, const ComplexSpectrogram& y,
                                    double t, const ComplexSpectrogram& s, const SdeParams& p,
                                    TweedieFactor factor) {
  require_same_shape(x_t, y, "tweedie_estimate");
  require_same_shape(x_t, s, "tweedie_estimate");
  check_tweedie_time(t, p, "tweedie_estimate");
  const double decay = mean_decay(t, p);
  const double c = tweedie_coefficient(factor) * kernel_variance(t, p);
  return (x_t + c * s - (1.0 - decay) * y) / decay;
}

double supervised_loss(const ComplexSpectrogram& x_t, const ComplexSpectrogram& y, double t,
                       const ComplexSpectrogram& s, const ComplexSpectrogram& x0,
                       const SdeParams& p, TweedieFactor factor) {
  require_same_shape(x_t, s, "supervised_loss");
  require_same_shape(x_t, x0, "supervised_loss");
  check_tweedie_time(t, p, "supervised_loss");
  const double c = tweedie_coefficient(factor) * kernel_variance(t, p);
  return (x_t + c * s - kernel_mean(x0, y, t, p)).abs2().sum();
}

double alpha_weight(double t, const SdeParams& p) {
  if (t < p.t_eps || t > p.t_max) {
    throw InvalidInput("alpha_weight: t = " + std::to_string(t) + " outside [t_eps, t_max]");
  }
  const double s_max = kernel_std(p.t_max, p);
  const double s_eps = kernel_std(p.t_eps, p);
  if (!(s_max != s_eps)) throw NumericalDomainError("alpha_weight: sigma(T) = sigma(t_eps)");
  return (s_max - kernel_std(t, p)) / (s_max - s_eps);
}

double alpha_value(const AlphaSchedule& schedule, double t, const SdeParams& p) {
  return schedule.kind == AlphaSchedule::Kind::paper ? alpha_weight(t, p) : schedule.value;
}

double supervised_direct_loss(const ComplexSpectrogram& output, const ComplexSpectrogram& x0) {
  require_same_shape(output, x0, "supervised_direct_loss");
  if (output.size() == 0) throw InvalidInput("supervised_direct_loss: empty spectrogram");
  return (output - x0).abs2().mean();
}

LossSample draw_loss_sample(const TrainingPair& pair, const SdeParams& p, Rng& rng) {
  require_same_shape(pair.x0, pair.y, "draw_loss_sample");
  LossSample s;
  s.x0 = pair.x0;
  s.y = pair.y;
  // U(t_eps, T]: 1 - u lies in (0, 1].
  s.t = p.t_eps + (1.0 - rng.uniform()) * (p.t_max - p.t_eps);
  s.z = rng.complex_normal(pair.x0.rows(), pair.x0.cols());
  s.x_t = kernel_mean(s.x0, s.y, s.t, p) + kernel_std(s.t, p) * s.z;
  return s;
}

BatchLoss evaluate_batch_loss(std::span<const LossSample> samples,
                              std::span<const ComplexSpectrogram> outputs, const LossConfig& cfg,
                              const SdeParams& p) {
  if (samples.empty()) throw InvalidInput("batch loss: empty batch");
  if (samples.size() != outputs.size()) throw InvalidInput("batch loss: output count mismatch");
  const double inv_b = 1.0 / static_cast<double>(samples.size());

  BatchLoss out;
  out.output_gradient.reserve(samples.size());
  double total = 0.0;
  double score_sum = 0.0;
  double sup_sum = 0.0;
  double alpha_sum = 0.0;
  double score_term_sum = 0.0;
  double sup_term_sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const LossSample& smp = samples[i];
    const ComplexSpectrogram& s = outputs[i];
    out.record.t.push_back(smp.t);
    if (cfg.mode == LossMode::supervised_direct) {
      const double l = supervised_direct_loss(s, smp.x0);
      sup_sum += l;
      sup_term_sum += l;
      total += l;
      out.output_gradient.push_back((2.0 * inv_b / static_cast<double>(s.size())) * (s - smp.x0));
      continue;
    }
    const double sigma = kernel_std(smp.t, p);
    const double alpha =
        cfg.mode == LossMode::score_only ? 0.0 : alpha_value(cfg.alpha_schedule, smp.t, p);
    const double c = tweedie_coefficient(cfg.tweedie_factor) * sigma * sigma;

    const double l_score = score_matching_loss(s, smp.z, sigma);
    const double l_sup = supervised_loss(smp.x_t, smp.y, smp.t, s, smp.x0, p, cfg.tweedie_factor);
    const double term_score = (1.0 - alpha) * l_score;
    const double term_sup = alpha * l_sup;
    total += term_score + term_sup;
    score_sum += l_score;
    sup_sum += l_sup;
    alpha_sum += alpha;
    score_term_sum += term_score;
    sup_term_sum += term_sup;

    const ComplexSpectrogram r_score = s + smp.z / sigma;
    const ComplexSpectrogram r_sup = smp.x_t + c * s - kernel_mean(smp.x0, smp.y, smp.t, p);
    out.output_gradient.push_back(2.0 * inv_b * ((1.0 - alpha) * r_score + (alpha * c) * r_sup));
  }
  const double b = static_cast<double>(samples.size());
  out.total = total / b;
  out.record.score_loss = score_sum / b;
  out.record.sup_loss = sup_sum / b;
  out.record.alpha_mean = alpha_sum / b;
  out.record.score_term = score_term_sum / b;
  out.record.sup_term = sup_term_sum / b;
  out.record.total = out.total;
  return out;
}

OutputLoss make_output_loss(std::vector<LossSample> samples, LossConfig cfg, SdeParams p) {
  auto shared = std::make_shared<const std::vector<LossSample>>(std::move(samples));
  OutputLoss loss;
  loss.value = [shared, cfg, p](std::span<const ComplexSpectrogram> outputs) {
    return evaluate_batch_loss(*shared, outputs, cfg, p).total;
  };
  loss.gradient = [shared, cfg, p](std::span<const ComplexSpectrogram> outputs) {
    return evaluate_batch_loss(*shared, outputs, cfg, p).output_gradient;
  };
  return loss;
}

std::vector<ScorerInput> scorer_inputs(std::span<const LossSample> samples,
                                       const LossConfig& cfg, double sentinel_t) {
  std::vector<ScorerInput> in;
  in.reserve(samples.size());
  for (const auto& s : samples) {
    if (cfg.mode == LossMode::supervised_direct) {
      in.push_back(ScorerInput{s.y, s.y, sentinel_t});
    } else {
      in.push_back(ScorerInput{s.x_t, s.y, s.t});
    }
  }
  return in;
}

std::pair<double, TrainRecord> weighted_loss(std::span<const TrainingPair> batch, Rng& rng,
                                             const ScoreModel& model, const LossConfig& cfg,
                                             const SdeParams& p) {
  if (batch.empty()) throw InvalidInput("weighted_loss: empty batch");
  std::vector<LossSample> samples;
  std::vector<ComplexSpectrogram> outputs;
  for (const auto& pair : batch) {
    samples.push_back(draw_loss_sample(pair, p, rng));
    const auto& s = samples.back();
    outputs.push_back(cfg.mode == LossMode::supervised_direct ? model.evaluate(s.y, s.y, p.t_max)
                                                              : model.evaluate(s.x_t, s.y, s.t));
  }
  auto loss = evaluate_batch_loss(samples, outputs, cfg, p);
  return {loss.total, std::move(loss.record)};
}

Adam::Adam(std::size_t n, double learning_rate, double beta1, double beta2, double eps)
    : m_(n, 0.0), v_(n, 0.0), lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw InvalidInput("Adam: size mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

double clip_global_norm(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (const double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (double& g : grad) g *= scale;
  }
  return norm;
}

namespace {

TrainingPair random_crop(const TrainingPair& pair, const LossConfig& cfg, Rng& rng) {
  const Eigen::Index rows = pair.x0.rows();
  const Eigen::Index cols = pair.x0.cols();
  const Eigen::Index cr = cfg.crop_freq > 0 ? std::min<Eigen::Index>(cfg.crop_freq, rows) : rows;
  const Eigen::Index cc = cfg.crop_frames > 0 ? std::min<Eigen::Index>(cfg.crop_frames, cols) : cols;
  const auto r0 = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(rows - cr + 1)));
  const auto c0 = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(cols - cc + 1)));
  return {pair.x0.block(r0, c0, cr, cc), pair.y.block(r0, c0, cr, cc)};
}

}  // namespace

TrainResult train(std::span<const TrainingPair> dataset, NeuralScorer model,
                  const LossConfig& cfg, std::uint64_t seed, const TrainCallback& on_step) {
  cfg.validate();
  if (dataset.empty()) throw InvalidInput("train: empty dataset");
  for (const auto& pair : dataset) require_same_shape(pair.x0, pair.y, "train");
  const bool direct = cfg.mode == LossMode::supervised_direct;
  if (direct != (model.architecture().role == ScorerRole::direct)) {
    throw ConfigError("train: mode '" + to_string(cfg.mode) + "' needs a '" +
                      (direct ? "direct" : "score") + "' role network");
  }
  const SdeParams& p = model.sde();

  std::vector<double> theta(model.parameters().begin(), model.parameters().end());
  std::vector<double> ema = theta;
  Adam adam(theta.size(), cfg.learning_rate);
  std::vector<TrainRecord> log;
  log.reserve(static_cast<std::size_t>(cfg.total_steps));

  for (int step = 1; step <= cfg.total_steps; ++step) {
    Rng batch_rng(derive_seed(seed, static_cast<std::uint64_t>(step), 0));
    std::vector<LossSample> samples;
    samples.reserve(static_cast<std::size_t>(cfg.batch_size));
    for (int i = 0; i < cfg.batch_size; ++i) {
      const auto& pair = dataset[batch_rng.index(dataset.size())];
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(i) + 1));
      samples.push_back(draw_loss_sample(random_crop(pair, cfg, rng), p, rng));
    }
    const auto inputs = scorer_inputs(samples, cfg, model.sentinel_time());
    const ForwardPass pass = model.forward(inputs);
    BatchLoss loss = evaluate_batch_loss(samples, pass.outputs(), cfg, p);
    loss.record.step = step;
    if (!std::isfinite(loss.total)) {
      throw TrainingDiverged("train: non-finite loss at step " + std::to_string(step),
                             std::move(loss.record));
    }
    std::vector<double> grad = model.backward(pass, loss.output_gradient);
    clip_global_norm(grad, cfg.grad_clip);
    adam.step(theta, grad);
    model.set_parameters(theta);
    if (cfg.ema_decay > 0.0) {
      for (std::size_t k = 0; k < theta.size(); ++k) {
        ema[k] = cfg.ema_decay * ema[k] + (1.0 - cfg.ema_decay) * theta[k];
      }
    }
    if (on_step) on_step(loss.record);
    log.push_back(std::move(loss.record));
  }
  if (cfg.ema_decay > 0.0) model.set_parameters(ema);
  return TrainResult{std::move(model), std::move(log)};
}

void write_loss_log(const std::filesystem::path& path, std::span<const TrainRecord> records) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << "step\tscore_loss\tsup_loss\talpha_mean\ttotal\tscore_term\tsup_term\n";
  f << std::setprecision(10);
  for (const auto& r : records) {
    f << r.step << '\t' << r.score_loss << '\t' << r.sup_loss << '\t' << r.alpha_mean << '\t'
      << r.total << '\t' << r.score_term << '\t' << r.sup_term << '\n';
  }
}

}  // namespace diffse

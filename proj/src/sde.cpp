// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "diffse/sde.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <thread>

namespace diffse {

void SdeParams::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("sde: gamma must be > 0");
  if (!(sigma_min > 0.0)) throw ConfigError("sde: sigma_min must be > 0");
  if (!(sigma_max >= sigma_min) || !std::isfinite(sigma_max)) {
    throw ConfigError("sde: sigma_max must be >= sigma_min");
  }
  if (!(t_eps > 0.0 && t_eps < t_max) || !std::isfinite(t_max)) {
    throw ConfigError("sde: require 0 < t_eps < t_max");
  }
}

ComplexSpectrogram drift(const ComplexSpectrogram& x, const ComplexSpectrogram& y,
                         const SdeParams& p) {
  require_same_shape(x, y, "drift");
  return p.gamma * (y - x);
}

double diffusion_coeff(double t, const SdeParams& p) {
  const double log_ratio = std::log(p.sigma_max / p.sigma_min);
  return p.sigma_min * std::exp(t * log_ratio) * std::sqrt(2.0 * log_ratio);
}

double mean_decay(double t, const SdeParams& p) { return std::exp(-p.gamma * t); }

ComplexSpectrogram kernel_mean(const ComplexSpectrogram& x0, const ComplexSpectrogram& y,
                               double t, const SdeParams& p) {
  require_same_shape(x0, y, "kernel_mean");
  if (t < 0.0) throw InvalidInput("kernel_mean: negative time");
  const double w = mean_decay(t, p);
  return w * x0 + (1.0 - w) * y;
}

double kernel_variance(double t, const SdeParams& p) {
  // sigma_min^2 ((s_max/s_min)^{2t} - e^{-2 gamma t}) log(r) / (gamma + log(r)),
  // with the difference of exponentials written as e^{-2 gamma t} expm1(...)
  // so that small t keeps full relative precision.
  const double log_ratio = std::log(p.sigma_max / p.sigma_min);
  const double diff = std::exp(-2.0 * p.gamma * t) * std::expm1(2.0 * t * (log_ratio + p.gamma));
  return p.sigma_min * p.sigma_min * diff * log_ratio / (p.gamma + log_ratio);
}

double kernel_std(double t, const SdeParams& p) { return std::sqrt(kernel_variance(t, p)); }

PerturbedSample sample_perturbed(const ComplexSpectrogram& x0, const ComplexSpectrogram& y,
                                 double t, const SdeParams& p, Rng& rng) {
  if (t < p.t_eps || t > p.t_max) {
    throw InvalidInput("sample_perturbed: t = " + std::to_string(t) + " outside [t_eps, t_max]");
  }
  PerturbedSample out;
  out.z = rng.complex_normal(x0.rows(), x0.cols());
  out.x_t = kernel_mean(x0, y, t, p) + kernel_std(t, p) * out.z;
  return out;
}

namespace {

constexpr int kPathsPerBlock = 64;

struct BlockMoments {
  // Per checkpoint: block mean and sum of squared deviations, per bin.
  std::vector<ComplexSpectrogram> mean;
  std::vector<RealField> m2;
  int count = 0;
};

}  // namespace

std::vector<MomentSnapshot> simulate_forward(const ComplexSpectrogram& x0,
                                             const ComplexSpectrogram& y, const SdeParams& p,
                                             const SimulationOptions& opts) {
  require_same_shape(x0, y, "simulate_forward");
  if (opts.n_steps <= 0 || opts.n_paths <= 0) {
    throw InvalidInput("simulate_forward: n_steps and n_paths must be positive");
  }
  const double dt = p.t_max / opts.n_steps;
  const double sqrt_dt = std::sqrt(dt);

  // Step indices at which moments are recorded, ascending, always ending at n_steps.
  std::vector<int> record_at;
  for (double t : opts.checkpoints) {
    if (!(t > 0.0 && t <= p.t_max)) throw InvalidInput("simulate_forward: checkpoint out of range");
    record_at.push_back(std::clamp(static_cast<int>(std::lround(t / dt)), 1, opts.n_steps));
  }
  record_at.push_back(opts.n_steps);
  std::sort(record_at.begin(), record_at.end());
  record_at.erase(std::unique(record_at.begin(), record_at.end()), record_at.end());
  const std::size_t n_rec = record_at.size();

  const int n_blocks = (opts.n_paths + kPathsPerBlock - 1) / kPathsPerBlock;
  std::vector<BlockMoments> blocks(static_cast<std::size_t>(n_blocks));
  const Eigen::Index bins = x0.size();

  auto run_block = [&](int b) {
    const int first = b * kPathsPerBlock;
    const int count = std::min(kPathsPerBlock, opts.n_paths - first);
    // states[rec][path] of the block
    std::vector<std::vector<ComplexSpectrogram>> states(n_rec);
    for (int j = 0; j < count; ++j) {
      Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(first + j)));
      ComplexSpectrogram x = x0;
      std::size_t next = 0;
      for (int step = 0; step < opts.n_steps; ++step) {
        const double g = diffusion_coeff(step * dt, p) * sqrt_dt;
        for (Eigen::Index i = 0; i < bins; ++i) {
          x(i) += p.gamma * (y(i) - x(i)) * dt + g * rng.complex_normal();
        }
        if (next < n_rec && step + 1 == record_at[next]) {
          states[next].push_back(x);
          ++next;
        }
      }
    }
    BlockMoments& out = blocks[static_cast<std::size_t>(b)];
    out.count = count;
    for (std::size_t r = 0; r < n_rec; ++r) {
      ComplexSpectrogram mean = ComplexSpectrogram::Zero(x0.rows(), x0.cols());
      for (const auto& s : states[r]) mean += s;
      mean /= static_cast<double>(count);
      RealField m2 = RealField::Zero(x0.rows(), x0.cols());
      for (const auto& s : states[r]) m2 += (s - mean).abs2();
      out.mean.push_back(std::move(mean));
      out.m2.push_back(std::move(m2));
    }
  };

  int threads = opts.threads > 0 ? opts.threads
                                 : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, n_blocks);
  if (threads <= 1) {
    for (int b = 0; b < n_blocks; ++b) run_block(b);
  } else {
    std::atomic<int> next_block{0};
    std::vector<std::jthread> pool;
    for (int i = 0; i < threads; ++i) {
      pool.emplace_back([&] {
        for (int b = next_block++; b < n_blocks; b = next_block++) run_block(b);
      });
    }
  }

  // Chan et al. pairwise merge in block order.
  std::vector<MomentSnapshot> result(n_rec);
  for (std::size_t r = 0; r < n_rec; ++r) {
    ComplexSpectrogram mean = blocks[0].mean[r];
    RealField m2 = blocks[0].m2[r];
    double n = blocks[0].count;
    for (int b = 1; b < n_blocks; ++b) {
      const auto& blk = blocks[static_cast<std::size_t>(b)];
      const double nb = blk.count;
      const ComplexSpectrogram delta = blk.mean[r] - mean;
      mean += delta * (nb / (n + nb));
      m2 += blk.m2[r] + delta.abs2() * (n * nb / (n + nb));
      n += nb;
    }
    result[r].t = record_at[r] * dt;
    result[r].mean = std::move(mean);
    result[r].variance = n > 1 ? RealField(m2 / (n - 1.0)) : RealField::Zero(x0.rows(), x0.cols());
  }
  return result;
}

std::vector<KernelCheck> compare_with_closed_form(const std::vector<MomentSnapshot>& snapshots,
                                                  const ComplexSpectrogram& x0,
                                                  const ComplexSpectrogram& y,
                                                  const SdeParams& p, int n_paths) {
  std::vector<KernelCheck> out;
  for (const auto& snap : snapshots) {
    KernelCheck c;
    c.t = snap.t;
    c.closed_form_variance = kernel_variance(snap.t, p);
    c.empirical_variance = snap.variance.mean();
    c.relative_error = c.closed_form_variance > 0.0
                           ? std::abs(c.empirical_variance - c.closed_form_variance) /
                                 c.closed_form_variance
                           : std::abs(c.empirical_variance);
    const ComplexSpectrogram mu = kernel_mean(x0, y, snap.t, p);
    const RealField se = (snap.variance / n_paths).sqrt();
    const RealField dev = (snap.mean - mu).abs();
    c.max_mean_z = (se > 0.0).select(dev / se, RealField::Zero(se.rows(), se.cols())).maxCoeff();
    out.push_back(c);
  }
  return out;
}

void write_kernel_report(const std::filesystem::path& path,
                         const std::vector<KernelCheck>& checks) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << "t\tclosed_form_var\tempirical_var\trelative_error\tmax_mean_z\n";
  f << std::setprecision(10);
  for (const auto& c : checks) {
    f << c.t << '\t' << c.closed_form_variance << '\t' << c.empirical_variance << '\t'
      << c.relative_error << '\t' << c.max_mean_z << '\n';
  }
}

}  // namespace diffse

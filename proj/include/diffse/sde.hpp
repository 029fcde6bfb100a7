// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "diffse/random.hpp"
#include "diffse/types.hpp"

namespace diffse {

/// Ornstein-Uhlenbeck drift towards y with variance-exploding diffusion:
///
///   dx = gamma (y - x) dt + g(t) dw,
///   g(t) = sigma_min (sigma_max / sigma_min)^t sqrt(2 log(sigma_max / sigma_min)).
struct SdeParams {
  double gamma = 1.5;
  double sigma_min = 0.05;
  double sigma_max = 0.5;
  double t_eps = 0.03;
  double t_max = 1.0;

  /// Requires gamma > 0, sigma_max >= sigma_min > 0 and 0 < t_eps < t_max.
  /// sigma_max == sigma_min is accepted: it is the degenerate noiseless
  /// process (g = 0, sigma(t) = 0).
  void validate() const;
};

/// x_t at time t.
struct ProcessState {
  ComplexSpectrogram x;
  double t = 0.0;
};

ComplexSpectrogram drift(const ComplexSpectrogram& x, const ComplexSpectrogram& y,
                         const SdeParams& p);

double diffusion_coeff(double t, const SdeParams& p);

/// e^{-gamma t}, the weight of x0 in the kernel mean.
double mean_decay(double t, const SdeParams& p);

/// mu(x0, y, t) = e^{-gamma t} x0 + (1 - e^{-gamma t}) y.
ComplexSpectrogram kernel_mean(const ComplexSpectrogram& x0,
                               const ComplexSpectrogram& y, double t,
                               const SdeParams& p);

/// sigma(t)^2 of the Gaussian transition kernel (total variance per complex bin).
double kernel_variance(double t, const SdeParams& p);

/// sigma(t) = sqrt(kernel_variance(t)).
double kernel_std(double t, const SdeParams& p);

struct PerturbedSample {
  ComplexSpectrogram x_t;
  ComplexSpectrogram z;
};

/// x_t = mu + sigma(t) z with z ~ CN(0, I). Throws InvalidInput for t
/// outside [t_eps, t_max].
PerturbedSample sample_perturbed(const ComplexSpectrogram& x0,
                                 const ComplexSpectrogram& y, double t,
                                 const SdeParams& p, Rng& rng);

/// Moments of an Euler-Maruyama ensemble at one recorded time.
struct MomentSnapshot {
  double t = 0.0;
  ComplexSpectrogram mean;
  /// Unbiased per-bin estimate of E|x - E x|^2.
  RealField variance;
};

struct SimulationOptions {
  int n_steps = 1000;
  int n_paths = 10000;
  std::uint64_t seed = 0;
  /// Times (in (0, t_max]) at which moments are recorded in addition to
  /// t_max; each is rounded to the nearest grid step.
  std::vector<double> checkpoints;
  /// 0 selects std::thread::hardware_concurrency().
  int threads = 0;
};

/// Integrates the forward SDE from x0 at t = 0 with step t_max / n_steps over
/// n_paths independent paths. Each path draws from its own stream derived
/// from the seed and partial sums are reduced in a fixed order, so the
/// result does not depend on the thread count.
std::vector<MomentSnapshot> simulate_forward(const ComplexSpectrogram& x0,
                                             const ComplexSpectrogram& y,
                                             const SdeParams& p,
                                             const SimulationOptions& opts);

/// One line of the kernel validation report.
struct KernelCheck {
  double t = 0.0;
  double closed_form_variance = 0.0;
  double empirical_variance = 0.0;  // pooled over bins
  double relative_error = 0.0;
  /// Largest |empirical mean - mu| / standard error over bins.
  double max_mean_z = 0.0;
};

std::vector<KernelCheck> compare_with_closed_form(
    const std::vector<MomentSnapshot>& snapshots, const ComplexSpectrogram& x0,
    const ComplexSpectrogram& y, const SdeParams& p, int n_paths);

/// Tab-separated report: t, closed-form sigma^2, empirical sigma^2, relative
/// error, max mean z-score.
void write_kernel_report(const std::filesystem::path& path,
                         const std::vector<KernelCheck>& checks);

}  // namespace diffse

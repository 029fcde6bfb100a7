// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "diffse/metrics.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iomanip>
#include <memory>
#include <regex>
#include <sstream>
#include <thread>

namespace diffse {

double si_sdr(std::span<const double> estimate, std::span<const double> reference) {
  if (estimate.size() != reference.size()) {
    throw InvalidInput("si_sdr: length mismatch (" + std::to_string(estimate.size()) + " vs " +
                       std::to_string(reference.size()) + ")");
  }
  double ref_energy = 0.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    ref_energy += reference[i] * reference[i];
    dot += estimate[i] * reference[i];
  }
  if (!(ref_energy > 0.0)) throw InvalidInput("si_sdr: reference has zero energy");
  const double a = dot / ref_energy;
  double target = 0.0;
  double distortion = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double s = a * reference[i];
    const double d = s - estimate[i];
    target += s * s;
    distortion += d * d;
  }
  if (distortion <= 1e-20 * target) return kSiSdrCapDb;
  return std::min(kSiSdrCapDb, 10.0 * std::log10(target / distortion));
}

double si_sdr(const Waveform& estimate, const Waveform& reference) {
  return si_sdr(std::span<const double>(estimate.samples),
                std::span<const double>(reference.samples));
}

double spectral_mse(const ComplexSpectrogram& estimate, const ComplexSpectrogram& reference) {
  require_same_shape(estimate, reference, "spectral_mse");
  if (estimate.size() == 0) throw InvalidInput("spectral_mse: empty spectrogram");
  return (estimate - reference).abs2().mean();
}

MetricSummary summarize(std::string name, std::vector<double> values) {
  if (values.empty()) throw InvalidInput("summarize: no values for '" + name + "'");
  MetricSummary s;
  s.name = std::move(name);
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (const double v : values) sum += v;
  s.mean = sum / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (const double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  s.values = std::move(values);
  return s;
}

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (const char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace

double run_external_metric(const ExternalMetric& metric, const std::filesystem::path& estimate,
                           const std::filesystem::path& reference) {
  std::string cmd = metric.command;
  replace_all(cmd, "{estimate}", shell_quote(estimate.string()));
  replace_all(cmd, "{reference}", shell_quote(reference.string()));
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
  if (!pipe) throw IoError("cannot run metric '" + metric.name + "'");
  std::string output;
  std::array<char, 512> buf{};
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe.get()) != nullptr) {
    output += buf.data();
  }
  const int status = pclose(pipe.release());
  if (status != 0) {
    throw IoError("metric '" + metric.name + "' exited with status " + std::to_string(status));
  }
  static const std::regex number(R"([-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?)");
  std::smatch m;
  if (!std::regex_search(output, m, number)) {
    throw IoError("metric '" + metric.name + "' printed no number");
  }
  return std::stod(m.str());
}

const MetricSummary& EvalReport::metric(const std::string& name) const {
  for (const auto& m : metrics) {
    if (m.name == name) return m;
  }
  throw InvalidInput("report has no metric '" + name + "'");
}

EvalReport evaluate_corpus(std::span<const EvalPair> pairs, const MetricSet& metrics, int threads) {
  if (pairs.empty()) throw InvalidInput("evaluate_corpus: no pairs");
  std::vector<std::string> names;
  if (metrics.si_sdr) names.emplace_back("si_sdr");
  if (metrics.spectral_mse) names.emplace_back("spectral_mse");
  for (const auto& ext : metrics.external) names.push_back(ext.name);
  if (names.empty()) throw ConfigError("evaluate_corpus: empty metric set");

  const std::size_t n = pairs.size();
  std::vector<std::vector<double>> values(names.size(), std::vector<double>(n));
  std::vector<std::exception_ptr> errors(n);
  const auto work = [&](std::size_t i) {
    try {
      const EvalPair& p = pairs[i];
      std::size_t k = 0;
      if (metrics.si_sdr) values[k++][i] = si_sdr(p.estimate, p.reference);
      if (metrics.spectral_mse) {
        values[k++][i] = spectral_mse(stft(p.estimate, *metrics.spectral_mse).bins,
                                      stft(p.reference, *metrics.spectral_mse).bins);
      }
      for (const auto& ext : metrics.external) {
        values[k++][i] = run_external_metric(ext, p.estimate_path, p.reference_path);
      }
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

  EvalReport report;
  for (const auto& p : pairs) report.ids.push_back(p.id);
  for (std::size_t k = 0; k < names.size(); ++k) {
    report.metrics.push_back(summarize(names[k], std::move(values[k])));
  }
  return report;
}

void write_report_tsv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << std::setprecision(10) << "id";
  for (const auto& m : report.metrics) f << '\t' << m.name;
  f << '\n';
  for (std::size_t i = 0; i < report.ids.size(); ++i) {
    f << report.ids[i];
    for (const auto& m : report.metrics) f << '\t' << m.values[i];
    f << '\n';
  }
  f << "#mean";
  for (const auto& m : report.metrics) f << '\t' << m.mean;
  f << "\n#std_error";
  for (const auto& m : report.metrics) f << '\t' << m.std_error;
  f << '\n';
}

std::string summary_table(const EvalReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  for (const auto& m : report.metrics) {
    os << std::left << std::setw(14) << m.name << ' ' << m.mean << " ± " << m.std_error << " ("
       << m.values.size() << ")\n";
  }
  return os.str();
}

}  // namespace diffse

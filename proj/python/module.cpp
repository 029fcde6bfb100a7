// Python bindings for the core operations. Spectrograms are complex128
// arrays of shape (F, K); waveforms are float64 vectors at 16 kHz.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "diffse/audio_data.hpp"
#include "diffse/config.hpp"
#include "diffse/metrics.hpp"
#include "diffse/neural_scorer.hpp"
#include "diffse/pipeline.hpp"
#include "diffse/sampler.hpp"
#include "diffse/sde.hpp"
#include "diffse/spectral.hpp"
#include "diffse/training.hpp"
#include "diffse/wav.hpp"

namespace py = pybind11;
using namespace diffse;

namespace {

Waveform to_waveform(std::vector<double> samples) {
  Waveform w;
  w.samples = std::move(samples);
  return w;
}

TweedieFactor factor_arg(const std::string& s) { return tweedie_from_string(s); }

}  // namespace

PYBIND11_MODULE(_diffse, m) {
  m.doc() = "Score-based diffusion speech enhancement";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalDomainError>(m, "NumericalDomainError", PyExc_ArithmeticError);
  py::register_exception<StateError>(m, "StateError", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<SdeParams>(m, "SdeParams")
      .def(py::init<>())
      .def_readwrite("gamma", &SdeParams::gamma)
      .def_readwrite("sigma_min", &SdeParams::sigma_min)
      .def_readwrite("sigma_max", &SdeParams::sigma_max)
      .def_readwrite("t_eps", &SdeParams::t_eps)
      .def_readwrite("t_max", &SdeParams::t_max)
      .def("validate", &SdeParams::validate);

  py::class_<StftConfig>(m, "StftConfig")
      .def(py::init<>())
      .def_readwrite("window_len", &StftConfig::window_len)
      .def_readwrite("hop", &StftConfig::hop)
      .def_readwrite("compression_enabled", &StftConfig::compression_enabled)
      .def_readwrite("compression_exponent", &StftConfig::compression_exponent)
      .def_readwrite("compression_scale", &StftConfig::compression_scale)
      .def("validate", &StftConfig::validate);

  py::class_<SamplerConfig>(m, "SamplerConfig")
      .def(py::init<>())
      .def_readwrite("n_steps", &SamplerConfig::n_steps)
      .def_readwrite("corrector_steps", &SamplerConfig::corrector_steps)
      .def_readwrite("snr", &SamplerConfig::snr)
      .def_readwrite("final_tweedie", &SamplerConfig::final_tweedie)
      .def_readwrite("seed", &SamplerConfig::seed);

  // sde
  m.def("diffusion_coeff", &diffusion_coeff, py::arg("t"), py::arg("params") = SdeParams{});
  m.def("mean_decay", &mean_decay, py::arg("t"), py::arg("params") = SdeParams{});
  m.def("kernel_variance", &kernel_variance, py::arg("t"), py::arg("params") = SdeParams{});
  m.def("kernel_std", &kernel_std, py::arg("t"), py::arg("params") = SdeParams{});
  m.def("kernel_mean", &kernel_mean, py::arg("x0"), py::arg("y"), py::arg("t"),
        py::arg("params") = SdeParams{});
  m.def(
      "sample_perturbed",
      [](const ComplexSpectrogram& x0, const ComplexSpectrogram& y, double t,
         const SdeParams& p, std::uint64_t seed) {
        Rng rng(seed);
        auto s = sample_perturbed(x0, y, t, p, rng);
        return py::make_tuple(s.x_t, s.z);
      },
      py::arg("x0"), py::arg("y"), py::arg("t"), py::arg("params") = SdeParams{},
      py::arg("seed") = 0, "Returns (x_t, z) with x_t = mu + sigma(t) z.");

  // spectral
  m.def(
      "stft",
      [](std::vector<double> samples, const StftConfig& cfg) {
        return stft(to_waveform(std::move(samples)), cfg).bins;
      },
      py::arg("samples"), py::arg("config") = StftConfig{});
  m.def(
      "istft",
      [](const ComplexSpectrogram& s, std::size_t length, const StftConfig& cfg) {
        return istft(s, cfg, length).samples;
      },
      py::arg("spec"), py::arg("length"), py::arg("config") = StftConfig{});

  // training objectives
  m.def("score_matching_loss", &score_matching_loss, py::arg("s"), py::arg("z"),
        py::arg("sigma_t"));
  m.def(
      "tweedie_estimate",
      [](const ComplexSpectrogram& x_t, const ComplexSpectrogram& y, double t,
         const ComplexSpectrogram& s, const SdeParams& p, const std::string& factor) {
        return tweedie_estimate(x_t, y, t, s, p, factor_arg(factor));
      },
      py::arg("x_t"), py::arg("y"), py::arg("t"), py::arg("s"),
      py::arg("params") = SdeParams{}, py::arg("factor") = "half");
  m.def(
      "supervised_loss",
      [](const ComplexSpectrogram& x_t, const ComplexSpectrogram& y, double t,
         const ComplexSpectrogram& s, const ComplexSpectrogram& x0, const SdeParams& p,
         const std::string& factor) {
        return supervised_loss(x_t, y, t, s, x0, p, factor_arg(factor));
      },
      py::arg("x_t"), py::arg("y"), py::arg("t"), py::arg("s"), py::arg("x0"),
      py::arg("params") = SdeParams{}, py::arg("factor") = "half");
  m.def("alpha_weight", &alpha_weight, py::arg("t"), py::arg("params") = SdeParams{});
  m.def(
      "oracle_score",
      [](const ComplexSpectrogram& x_t, const ComplexSpectrogram& y, double t,
         const ComplexSpectrogram& x0, const SdeParams& p, const std::string& convention) {
        return OracleScore(x0, p, convention_from_string(convention)).evaluate(x_t, y, t);
      },
      py::arg("x_t"), py::arg("y"), py::arg("t"), py::arg("x0"),
      py::arg("params") = SdeParams{}, py::arg("convention") = "conjugate");

  // sampling
  m.def(
      "enhance_oracle",
      [](std::vector<double> noisy, std::vector<double> clean, const SamplerConfig& cfg,
         const SdeParams& p, const StftConfig& stft_cfg) {
        const Waveform y = to_waveform(std::move(noisy));
        const OracleScore oracle = make_oracle(to_waveform(std::move(clean)), y, p, stft_cfg);
        py::gil_scoped_release release;
        return enhance(y, oracle, p, cfg, stft_cfg).samples;
      },
      py::arg("noisy"), py::arg("clean"), py::arg("sampler") = SamplerConfig{},
      py::arg("params") = SdeParams{}, py::arg("stft") = StftConfig{},
      "Reverse diffusion driven by the analytic score of the clean reference.");

  py::class_<NeuralScorer>(m, "Model")
      .def_static(
          "load",
          [](const std::filesystem::path& path) {
            return model_from_checkpoint(load_checkpoint(path));
          },
          py::arg("path"))
      .def_property_readonly("parameter_count", &NeuralScorer::parameter_count)
      .def_property_readonly("role",
                             [](const NeuralScorer& s) { return to_string(s.architecture().role); })
      .def("score", &NeuralScorer::evaluate, py::arg("x_t"), py::arg("y"), py::arg("t"))
      .def(
          "enhance",
          [](const NeuralScorer& model, std::vector<double> noisy, const SamplerConfig& cfg,
             const StftConfig& stft_cfg) {
            const Waveform y = to_waveform(std::move(noisy));
            py::gil_scoped_release release;
            return enhance_with(model, y, cfg, stft_cfg).samples;
          },
          py::arg("noisy"), py::arg("sampler") = SamplerConfig{},
          py::arg("stft") = StftConfig{});

  // audio data and metrics
  m.def("read_wav", [](const std::filesystem::path& p) { return read_wav(p).samples; });
  m.def(
      "write_wav",
      [](const std::filesystem::path& p, std::vector<double> samples) {
        return write_wav(p, to_waveform(std::move(samples)));
      },
      py::arg("path"), py::arg("samples"), "Returns the number of clipped samples.");
  m.def(
      "synth_clean",
      [](double duration, const std::string& kind, std::uint64_t seed) {
        Rng rng(seed);
        return synth_clean(duration, clean_kind_from_string(kind), rng).samples;
      },
      py::arg("duration_s"), py::arg("kind") = "harmonic", py::arg("seed") = 0);
  m.def(
      "synth_noise",
      [](double duration, const std::string& kind, std::uint64_t seed) {
        Rng rng(seed);
        return synth_noise(duration, noise_kind_from_string(kind), rng).samples;
      },
      py::arg("duration_s"), py::arg("kind") = "white", py::arg("seed") = 0);
  m.def(
      "mix_at_snr",
      [](std::vector<double> clean, std::vector<double> noise, double snr_db,
         std::uint64_t seed) {
        Rng rng(seed);
        return mix_at_snr(to_waveform(std::move(clean)), to_waveform(std::move(noise)), snr_db,
                          rng)
            .noisy.samples;
      },
      py::arg("clean"), py::arg("noise"), py::arg("snr_db"), py::arg("seed") = 0);
  m.def(
      "si_sdr",
      [](const std::vector<double>& estimate, const std::vector<double>& reference) {
        return si_sdr(estimate, reference);
      },
      py::arg("estimate"), py::arg("reference"));
  m.def("spectral_mse", &spectral_mse, py::arg("estimate"), py::arg("reference"));
  m.def(
      "summarize",
      [](std::vector<double> values) {
        const auto s = summarize("metric", std::move(values));
        return py::make_tuple(s.mean, s.std_error);
      },
      py::arg("values"), "Returns (mean, standard error).");
}

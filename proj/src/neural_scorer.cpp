// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "diffse/neural_scorer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <variant>

#include <Eigen/Dense>

#include "json_io.hpp"

namespace diffse {

std::string to_string(ScorerRole r) { return r == ScorerRole::score ? "score" : "direct"; }

ScorerRole role_from_string(const std::string& name) {
  if (name == "score") return ScorerRole::score;
  if (name == "direct") return ScorerRole::direct;
  throw ConfigError("unknown scorer role '" + name + "'");
}

void ScorerArchitecture::validate() const {
  if (hidden_channels.empty()) throw ConfigError("model: at least one hidden layer required");
  for (int c : hidden_channels) {
    if (c <= 0) throw ConfigError("model: hidden channel counts must be positive");
  }
  if (dilations.size() != layer_count()) {
    throw ConfigError("model: need " + std::to_string(layer_count()) +
                      " dilations (hidden layers + output), got " +
                      std::to_string(dilations.size()));
  }
  for (int d : dilations) {
    if (d <= 0) throw ConfigError("model: dilations must be positive");
  }
  if (time_embedding < 0 || time_embedding % 2 != 0) {
    throw ConfigError("model: time_embedding must be a non-negative even number");
  }
  if (!(data_scale > 0.0) || !std::isfinite(data_scale)) {
    throw ConfigError("model: data_scale must be positive and finite");
  }
}

std::size_t ScorerArchitecture::parameter_count() const {
  std::size_t n = 0;
  int in = input_channels();
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const int out = l + 1 < layer_count() ? hidden_channels[l] : 2;
    n += static_cast<std::size_t>(out) * in * 9 + out;
    in = out;
  }
  return n;
}

std::vector<double> time_embedding(double t, int size) {
  std::vector<double> e(static_cast<std::size_t>(size));
  for (int k = 0; k < size / 2; ++k) {
    const double w = 0.5 * std::numbers::pi * std::ldexp(1.0, k);
    e[2 * k] = std::sin(w * t);
    e[2 * k + 1] = std::cos(w * t);
  }
  return e;
}

namespace detail {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

struct ImageGeom {
  Eigen::Index rows = 0;  // frequency bins (fast axis)
  Eigen::Index cols = 0;  // frames
  Eigen::Index offset = 0;
};

/// The x_t channels enter as gain * (x_t - shift * y).
struct InputScale {
  double shift = 0.0;
  double gain = 1.0;
};

/// The output is scale * F + skip * (x_t - y) + base * y, F being the raw
/// network output.
struct OutputMap {
  double scale = 1.0;
  double skip = 0.0;
  double base = 0.0;
};

struct LayerShape {
  int in = 0;
  int out = 0;
  int dilation = 1;
  std::size_t weight_offset = 0;  // row-major out x (in * 9)
  std::size_t bias_offset = 0;
};

std::vector<LayerShape> layer_shapes(const ScorerArchitecture& arch) {
  std::vector<LayerShape> shapes;
  std::size_t off = 0;
  int in = arch.input_channels();
  for (std::size_t l = 0; l < arch.layer_count(); ++l) {
    LayerShape s;
    s.in = in;
    s.out = l + 1 < arch.layer_count() ? arch.hidden_channels[l] : 2;
    s.dilation = arch.dilations[l];
    s.weight_offset = off;
    off += static_cast<std::size_t>(s.out) * s.in * 9;
    s.bias_offset = off;
    off += static_cast<std::size_t>(s.out);
    shapes.push_back(s);
    in = s.out;
  }
  return shapes;
}

// Column j = c * 9 + a * 3 + b holds channel c shifted by ((a-1) d, (b-1) d)
// along (frequency, frame), zero outside the image.
template <typename T>
void im2col(const Mat<T>& act, const std::vector<ImageGeom>& geom, int d, Mat<T>& cols) {
  const Eigen::Index n = act.rows();
  const Eigen::Index channels = act.cols();
  cols.resize(n, channels * 9);
  for (Eigen::Index c = 0; c < channels; ++c) {
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        const Eigen::Index df = (a - 1) * d;
        const Eigen::Index dk = (b - 1) * d;
        T* dst_col = cols.col(c * 9 + a * 3 + b).data();
        const T* src_col = act.col(c).data();
        for (const auto& g : geom) {
          const Eigen::Index f_lo = std::clamp<Eigen::Index>(-df, 0, g.rows);
          const Eigen::Index f_hi = std::clamp<Eigen::Index>(g.rows - df, 0, g.rows);
          for (Eigen::Index k = 0; k < g.cols; ++k) {
            T* dst = dst_col + g.offset + k * g.rows;
            const Eigen::Index ks = k + dk;
            if (ks < 0 || ks >= g.cols || f_lo >= f_hi) {
              std::fill(dst, dst + g.rows, T(0));
              continue;
            }
            const T* src = src_col + g.offset + ks * g.rows + df;
            std::fill(dst, dst + f_lo, T(0));
            std::copy(src + f_lo, src + f_hi, dst + f_lo);
            std::fill(dst + f_hi, dst + g.rows, T(0));
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const Mat<T>& dcols, const std::vector<ImageGeom>& geom, int d, Mat<T>& dact) {
  const Eigen::Index channels = dcols.cols() / 9;
  dact.setZero(dcols.rows(), channels);
  for (Eigen::Index c = 0; c < channels; ++c) {
    T* dst_col = dact.col(c).data();
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        const Eigen::Index df = (a - 1) * d;
        const Eigen::Index dk = (b - 1) * d;
        const T* src_col = dcols.col(c * 9 + a * 3 + b).data();
        for (const auto& g : geom) {
          const Eigen::Index f_lo = std::clamp<Eigen::Index>(-df, 0, g.rows);
          const Eigen::Index f_hi = std::clamp<Eigen::Index>(g.rows - df, 0, g.rows);
          for (Eigen::Index k = 0; k < g.cols; ++k) {
            const Eigen::Index ks = k + dk;
            if (ks < 0 || ks >= g.cols) continue;
            const T* src = src_col + g.offset + k * g.rows;
            T* dst = dst_col + g.offset + ks * g.rows + df;
            for (Eigen::Index f = f_lo; f < f_hi; ++f) dst[f] += src[f];
          }
        }
      }
    }
  }
}

template <typename T>
T sigmoid(T z) {
  return T(1) / (T(1) + std::exp(-z));
}

template <typename T>
struct CacheT {
  std::vector<Mat<T>> cols;  // im2col input of each layer
  std::vector<Mat<T>> pre;   // pre-activation of each hidden layer
};

struct ForwardCache {
  std::vector<ImageGeom> geom;
  std::vector<OutputMap> out_map;
  std::variant<CacheT<float>, CacheT<double>> data;
};

template <typename T>
Mat<T> weight_matrix(std::span<const double> params, const LayerShape& s) {
  Mat<T> w(s.out, s.in * 9);
  for (int o = 0; o < s.out; ++o) {
    for (int j = 0; j < s.in * 9; ++j) {
      w(o, j) = static_cast<T>(params[s.weight_offset + static_cast<std::size_t>(o) * s.in * 9 + j]);
    }
  }
  return w;
}

template <typename T>
RowVec<T> bias_vector(std::span<const double> params, const LayerShape& s) {
  RowVec<T> b(s.out);
  for (int o = 0; o < s.out; ++o) b(o) = static_cast<T>(params[s.bias_offset + o]);
  return b;
}

template <typename T>
Mat<T> build_input(std::span<const ScorerInput> batch, const std::vector<ImageGeom>& geom,
                   const std::vector<InputScale>& in_scale, double y_gain, int embedding) {
  const Eigen::Index n = geom.back().offset + geom.back().rows * geom.back().cols;
  Mat<T> a(n, kSpectralChannels + embedding);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& g = geom[b];
    const Eigen::Index len = g.rows * g.cols;
    const auto& x = batch[b].x_t;
    const auto& y = batch[b].y;
    const auto [shift, gain] = in_scale[b];
    for (Eigen::Index i = 0; i < len; ++i) {
      const Complex u = gain * (x(i) - shift * y(i));
      a(g.offset + i, 0) = static_cast<T>(u.real());
      a(g.offset + i, 1) = static_cast<T>(u.imag());
      const Complex v = y_gain * y(i);
      a(g.offset + i, 2) = static_cast<T>(v.real());
      a(g.offset + i, 3) = static_cast<T>(v.imag());
      a(g.offset + i, 4) = static_cast<T>(std::abs(u));
      a(g.offset + i, 5) = static_cast<T>(std::abs(v));
    }
    const auto e = time_embedding(batch[b].t, embedding);
    for (int k = 0; k < embedding; ++k) {
      a.col(kSpectralChannels + k).segment(g.offset, len).setConstant(static_cast<T>(e[k]));
    }
  }
  return a;
}

template <typename T>
std::vector<ComplexSpectrogram> run_forward(const ScorerArchitecture& arch,
                                            std::span<const double> params,
                                            std::span<const ScorerInput> batch,
                                            const std::vector<ImageGeom>& geom,
                                            const std::vector<InputScale>& in_scale,
                                            const std::vector<OutputMap>& out_map,
                                            CacheT<T>* cache) {
  const auto shapes = layer_shapes(arch);
  Mat<T> act = build_input<T>(batch, geom, in_scale, 1.0 / arch.data_scale, arch.time_embedding);
  Mat<T> cols;
  Mat<T> z;
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const auto& s = shapes[l];
    im2col(act, geom, s.dilation, cols);
    z.noalias() = cols * weight_matrix<T>(params, s).transpose();
    z.rowwise() += bias_vector<T>(params, s);
    if (cache != nullptr) cache->cols.push_back(std::move(cols));
    if (l + 1 < shapes.size()) {
      act = z.unaryExpr([](T v) { return v * sigmoid(v); });
      if (cache != nullptr) cache->pre.push_back(std::move(z));
    }
  }
  std::vector<ComplexSpectrogram> out;
  out.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& g = geom[b];
    const auto [scale, skip, base] = out_map[b];
    const auto& x = batch[b].x_t;
    const auto& y = batch[b].y;
    ComplexSpectrogram s(g.rows, g.cols);
    for (Eigen::Index i = 0; i < g.rows * g.cols; ++i) {
      s(i) = Complex(static_cast<double>(z(g.offset + i, 0)),
                     static_cast<double>(z(g.offset + i, 1))) *
                 scale +
             skip * (x(i) - y(i)) + base * y(i);
    }
    out.push_back(std::move(s));
  }
  return out;
}

template <typename T>
std::vector<double> run_backward(const ScorerArchitecture& arch, const ForwardCache& fc,
                                 const CacheT<T>& cache, std::span<const double> params,
                                 std::span<const ComplexSpectrogram> upstream) {
  const auto shapes = layer_shapes(arch);
  const auto& geom = fc.geom;
  const Eigen::Index n = geom.back().offset + geom.back().rows * geom.back().cols;
  Mat<T> dz(n, 2);
  for (std::size_t b = 0; b < upstream.size(); ++b) {
    const auto& g = geom[b];
    const T scale = static_cast<T>(fc.out_map[b].scale);
    for (Eigen::Index i = 0; i < g.rows * g.cols; ++i) {
      dz(g.offset + i, 0) = static_cast<T>(upstream[b](i).real()) * scale;
      dz(g.offset + i, 1) = static_cast<T>(upstream[b](i).imag()) * scale;
    }
  }

  std::vector<double> grad(arch.parameter_count(), 0.0);
  Mat<T> dw;
  Mat<T> dcols;
  Mat<T> dact;
  for (std::size_t li = shapes.size(); li-- > 0;) {
    const auto& s = shapes[li];
    dw.noalias() = dz.transpose() * cache.cols[li];
    const RowVec<T> db = dz.colwise().sum();
    for (int o = 0; o < s.out; ++o) {
      for (int j = 0; j < s.in * 9; ++j) {
        grad[s.weight_offset + static_cast<std::size_t>(o) * s.in * 9 + j] =
            static_cast<double>(dw(o, j));
      }
      grad[s.bias_offset + o] = static_cast<double>(db(o));
    }
    if (li == 0) break;
    dcols.noalias() = dz * weight_matrix<T>(params, s);
    col2im(dcols, geom, s.dilation, dact);
    const Mat<T>& pre = cache.pre[li - 1];
    dz = dact.binaryExpr(pre, [](T g, T v) {
      const T sg = sigmoid(v);
      return g * sg * (T(1) + v * (T(1) - sg));
    });
  }
  return grad;
}

}  // namespace detail

ForwardPass::ForwardPass() = default;
ForwardPass::~ForwardPass() = default;
ForwardPass::ForwardPass(ForwardPass&&) noexcept = default;
ForwardPass& ForwardPass::operator=(ForwardPass&&) noexcept = default;

NeuralScorer::NeuralScorer(ScorerArchitecture arch, SdeParams sde, std::uint64_t seed)
    : arch_(std::move(arch)), sde_(sde) {
  arch_.validate();
  sde_.validate();
  params_.assign(arch_.parameter_count(), 0.0);
  Rng rng(seed);
  const auto shapes = detail::layer_shapes(arch_);
  for (std::size_t l = 0; l + 1 < shapes.size(); ++l) {
    const auto& s = shapes[l];
    const double bound = std::sqrt(6.0 / (s.in * 9.0));
    for (std::size_t i = 0; i < static_cast<std::size_t>(s.out) * s.in * 9; ++i) {
      params_[s.weight_offset + i] = rng.uniform(-bound, bound);
    }
  }
}

NeuralScorer::NeuralScorer(ScorerArchitecture arch, SdeParams sde, std::vector<double> parameters)
    : arch_(std::move(arch)), sde_(sde), params_(std::move(parameters)) {
  arch_.validate();
  sde_.validate();
  if (params_.size() != arch_.parameter_count()) {
    throw InvalidInput("NeuralScorer: expected " + std::to_string(arch_.parameter_count()) +
                       " parameters, got " + std::to_string(params_.size()));
  }
}

void NeuralScorer::set_parameters(std::span<const double> values) {
  if (values.size() != params_.size()) {
    throw InvalidInput("set_parameters: size mismatch");
  }
  std::copy(values.begin(), values.end(), params_.begin());
  ++version_;
}

namespace {

std::vector<detail::ImageGeom> batch_geometry(std::span<const ScorerInput> batch) {
  if (batch.empty()) throw InvalidInput("neural_forward: empty batch");
  std::vector<detail::ImageGeom> geom;
  Eigen::Index off = 0;
  for (const auto& in : batch) {
    require_same_shape(in.x_t, in.y, "neural_forward");
    if (in.x_t.size() == 0) throw InvalidInput("neural_forward: empty spectrogram");
    geom.push_back({in.x_t.rows(), in.x_t.cols(), off});
    off += in.x_t.size();
  }
  return geom;
}

}  // namespace

// Both roles see y / c, c = data_scale. A direct-role network predicts
// x0 = y + c F.
// A score-role network is a denoiser in disguise. With e = e^{-gamma t},
// d = (x_t - y) / e is a noisy view of x0 - y with noise level s = sigma / e.
// The network sees d / sqrt(s^2 + c^2) (c = data_scale) and predicts
// D = y + c^2 / (s^2 + c^2) d + s c / sqrt(s^2 + c^2) F; the score is the
// kernel score around D, -(x_t - (1 - e) y - e D) / sigma^2. With F = 0 this
// is the exact score for x0 - y ~ CN(0, c^2).
std::pair<detail::InputScale, detail::OutputMap> NeuralScorer::sample_scales(double t) const {
  const double c = arch_.data_scale;
  if (arch_.role == ScorerRole::direct) {
    return {detail::InputScale{0.0, 1.0 / c}, detail::OutputMap{c, 0.0, 1.0}};
  }
  const double sigma = kernel_std(t, sde_);
  if (!(sigma > 0.0)) {
    throw NumericalDomainError("neural_forward: sigma(t) = 0 at t = " + std::to_string(t));
  }
  const double e = mean_decay(t, sde_);
  const double s = sigma / e;
  const double norm = std::sqrt(s * s + c * c);
  const double keep = s * s / (s * s + c * c);
  return {detail::InputScale{1.0, 1.0 / (e * norm)},
          detail::OutputMap{c / (sigma * norm), -keep / (sigma * sigma), 0.0}};
}

ForwardPass NeuralScorer::forward(std::span<const ScorerInput> batch) const {
  ForwardPass pass;
  pass.cache_ = std::make_unique<detail::ForwardCache>();
  auto& fc = *pass.cache_;
  fc.geom = batch_geometry(batch);
  std::vector<detail::InputScale> in_scale;
  for (const auto& in : batch) {
    const auto [scale_in, map] = sample_scales(in.t);
    in_scale.push_back(scale_in);
    fc.out_map.push_back(map);
  }
  if (precision_ == Precision::f32) {
    auto& c = fc.data.emplace<detail::CacheT<float>>();
    pass.outputs_ = detail::run_forward<float>(arch_, params_, batch, fc.geom, in_scale, fc.out_map, &c);
  } else {
    auto& c = fc.data.emplace<detail::CacheT<double>>();
    pass.outputs_ = detail::run_forward<double>(arch_, params_, batch, fc.geom, in_scale, fc.out_map, &c);
  }
  pass.owner_ = this;
  pass.version_ = version_;
  return pass;
}

std::vector<double> NeuralScorer::backward(const ForwardPass& pass,
                                           std::span<const ComplexSpectrogram> upstream) const {
  if (!pass.valid() || pass.owner_ != this || pass.version_ != version_) {
    throw StateError("neural_backward: no matching forward pass for the current parameters");
  }
  if (upstream.size() != pass.outputs_.size()) {
    throw InvalidInput("neural_backward: expected " + std::to_string(pass.outputs_.size()) +
                       " upstream gradients");
  }
  for (std::size_t b = 0; b < upstream.size(); ++b) {
    require_same_shape(upstream[b], pass.outputs_[b], "neural_backward");
  }
  const auto& fc = *pass.cache_;
  return std::visit(
      [&](const auto& cache) {
        return detail::run_backward(arch_, fc, cache, params_, upstream);
      },
      fc.data);
}

ComplexSpectrogram NeuralScorer::evaluate(const ComplexSpectrogram& x_t,
                                          const ComplexSpectrogram& y, double t) const {
  const bool direct = arch_.role == ScorerRole::direct;
  const ScorerInput in{direct ? y : x_t, y, direct ? sentinel_time() : t};
  const std::span<const ScorerInput> batch(&in, 1);
  const auto geom = batch_geometry(batch);
  const auto [scale_in, map] = sample_scales(in.t);
  const std::vector<detail::InputScale> in_scale{scale_in};
  const std::vector<detail::OutputMap> out_map{map};
  auto out = precision_ == Precision::f32
                 ? detail::run_forward<float>(arch_, params_, batch, geom, in_scale, out_map, nullptr)
                 : detail::run_forward<double>(arch_, params_, batch, geom, in_scale, out_map, nullptr);
  return std::move(out.front());
}

GradientCheckResult gradient_check(const NeuralScorer& model, std::span<const ScorerInput> batch,
                                   const OutputLoss& loss, double eps, std::size_t n_params,
                                   std::uint64_t seed) {
  if (!(eps >= 1e-6 && eps <= 1e-3)) throw InvalidInput("gradient_check: eps must be in [1e-6, 1e-3]");
  NeuralScorer probe = model;
  probe.set_precision(Precision::f64);

  const ForwardPass pass = probe.forward(batch);
  const auto upstream = loss.gradient(pass.outputs());
  const auto grad = probe.backward(pass, upstream);

  std::vector<std::size_t> order(probe.parameter_count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng.engine());
  order.resize(std::min(n_params, order.size()));

  GradientCheckResult result;
  std::vector<double> theta(probe.parameters().begin(), probe.parameters().end());
  for (const std::size_t idx : order) {
    const double saved = theta[idx];
    theta[idx] = saved + eps;
    probe.set_parameters(theta);
    const double up = loss.value(probe.forward(batch).outputs());
    theta[idx] = saved - eps;
    probe.set_parameters(theta);
    const double down = loss.value(probe.forward(batch).outputs());
    theta[idx] = saved;

    const double numeric = (up - down) / (2.0 * eps);
    const double analytic = grad[idx];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    result.max_relative_error = std::max(result.max_relative_error, std::abs(analytic - numeric) / denom);
    result.indices.push_back(idx);
    result.analytic.push_back(analytic);
    result.numeric.push_back(numeric);
  }
  return result;
}

namespace {

constexpr char kMagic[8] = {'D', 'I', 'F', 'F', 'S', 'E', 'C', 'K'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename U>
void put_le(std::string& out, U v) {
  unsigned char bytes[sizeof(U)];
  std::memcpy(bytes, &v, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U get_le(const std::string& in, std::size_t& pos, const std::string& what) {
  if (pos + sizeof(U) > in.size()) throw IoError("checkpoint truncated while reading " + what);
  unsigned char bytes[sizeof(U)];
  std::memcpy(bytes, in.data() + pos, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
  pos += sizeof(U);
  U v;
  std::memcpy(&v, bytes, sizeof(U));
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const NeuralScorer& model,
                     std::uint64_t step) {
  nlohmann::json header;
  header["architecture"] = model.architecture();
  header["sde"] = model.sde();
  header["convention"] = to_string(model.convention());
  const std::string header_text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kFormatVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(header_text.size()));
  out += header_text;
  put_le<std::uint64_t>(out, step);
  put_le<std::uint64_t>(out, model.parameter_count());
  for (const double v : model.parameters()) put_le<double>(out, v);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path.string());
  const std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (in.size() < sizeof(kMagic) || std::memcmp(in.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IoError(path.string() + ": not a diffse checkpoint");
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = get_le<std::uint32_t>(in, pos, "version");
  if (version != kFormatVersion) {
    throw IoError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = get_le<std::uint32_t>(in, pos, "header length");
  if (pos + header_len > in.size()) throw IoError("checkpoint truncated in header");
  Checkpoint ckpt;
  try {
    const auto header = nlohmann::json::parse(in.substr(pos, header_len));
    ckpt.architecture = header.at("architecture").get<ScorerArchitecture>();
    ckpt.sde = header.at("sde").get<SdeParams>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": bad checkpoint header: " + e.what());
  }
  pos += header_len;
  ckpt.step = get_le<std::uint64_t>(in, pos, "step");
  const auto n = get_le<std::uint64_t>(in, pos, "parameter count");
  if (n != ckpt.architecture.parameter_count()) {
    throw IoError(path.string() + ": parameter count does not match architecture");
  }
  ckpt.parameters.resize(n);
  for (auto& v : ckpt.parameters) v = get_le<double>(in, pos, "parameters");
  return ckpt;
}

NeuralScorer model_from_checkpoint(const Checkpoint& ckpt) {
  return NeuralScorer(ckpt.architecture, ckpt.sde, ckpt.parameters);
}

}  // namespace diffse

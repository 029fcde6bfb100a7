// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "diffse/wav.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace diffse {
namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  const auto fail = [&](const std::string& msg) {
    return IoError(path.string() + ": " + msg);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw fail("not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw fail("truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw fail("fmt chunk too short");
      const std::uint16_t format = read_u16(bytes.data() + body);
      const std::uint16_t channels = read_u16(bytes.data() + body + 2);
      const std::uint32_t rate = read_u32(bytes.data() + body + 4);
      const std::uint16_t bits = read_u16(bytes.data() + body + 14);
      if (format != 1) throw fail("format tag " + std::to_string(format) + ", expected PCM (1)");
      if (channels != 1) throw fail(std::to_string(channels) + " channels, expected mono");
      if (rate != static_cast<std::uint32_t>(kPipelineSampleRate)) {
        throw fail("sample rate " + std::to_string(rate) + " Hz, expected 16000");
      }
      if (bits != 16) throw fail(std::to_string(bits) + "-bit samples, expected 16-bit");
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw fail("data chunk before fmt chunk");
      Waveform w;
      w.sample_rate = kPipelineSampleRate;
      w.samples.resize(size / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(read_u16(bytes.data() + body + 2 * i));
        w.samples[i] = static_cast<double>(v) / 32768.0;
      }
      return w;
    }
    pos = body + size + (size & 1u);
  }
  throw fail(have_fmt ? "missing data chunk" : "missing fmt chunk");
}

std::vector<std::int16_t> quantize_pcm16(const std::vector<double>& samples,
                                         std::size_t* clipped) {
  std::vector<std::int16_t> out(samples.size());
  std::size_t n_clipped = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double v = std::nearbyint(samples[i] * 32768.0);
    if (v > 32767.0 || v < -32768.0) {
      ++n_clipped;
      v = std::clamp(v, -32768.0, 32767.0);
    }
    out[i] = static_cast<std::int16_t>(v);
  }
  if (clipped != nullptr) *clipped = n_clipped;
  return out;
}

std::size_t write_wav(const std::filesystem::path& path, const Waveform& w) {
  if (w.sample_rate != kPipelineSampleRate) {
    throw IoError(path.string() + ": refusing to write sample rate " +
                  std::to_string(w.sample_rate));
  }
  std::size_t clipped = 0;
  const auto pcm = quantize_pcm16(w.samples, &clipped);
  const auto data_bytes = static_cast<std::uint32_t>(pcm.size() * 2);

  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, kPipelineSampleRate);
  put_u32(out, kPipelineSampleRate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (const std::int16_t v : pcm) put_u16(out, static_cast<std::uint16_t>(v));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for " + path.string());
  return clipped;
}

}  // namespace diffse

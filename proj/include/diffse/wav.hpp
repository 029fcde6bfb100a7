// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "diffse/types.hpp"

namespace diffse {

/// Reads a RIFF/WAVE file. Only 16-bit PCM, mono, 16 kHz is accepted; any
/// other format raises IoError naming the offending field.
Waveform read_wav(const std::filesystem::path& path);

/// Float samples to 16-bit PCM (x * 32768, rounded, saturated).
/// `clipped` receives the number of saturated samples when non-null.
std::vector<std::int16_t> quantize_pcm16(const std::vector<double>& samples,
                                         std::size_t* clipped = nullptr);

/// Writes 16-bit PCM mono. Returns the number of clipped samples.
std::size_t write_wav(const std::filesystem::path& path, const Waveform& w);

}  // namespace diffse

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "dialoforge/schema.hpp"

namespace dialoforge {

/// RIFF/WAVE, PCM 16-bit signed little-endian, mono. Samples are clamped to
/// [-1, 1] and scaled by 32767.
std::string encode_wav(const Waveform& w);
/// Accepts PCM16 or IEEE float32, any channel count (channels are averaged).
Waveform decode_wav(std::string_view bytes);

void write_wav(const std::filesystem::path& path, const Waveform& w);
Waveform read_wav(const std::filesystem::path& path);

/// Rounds every sample to the PCM16 grid, i.e. decode_wav(encode_wav(w)).
Waveform quantize_pcm16(const Waveform& w);

}  // namespace dialoforge

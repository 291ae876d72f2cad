#include "dialoforge/wav_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "dialoforge/errors.hpp"
#include "dialoforge/manifest.hpp"

namespace dialoforge {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}
std::uint32_t get_u32(std::string_view b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[at + i]);
  return v;
}
std::uint16_t get_u16(std::string_view b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    (static_cast<unsigned char>(b[at + 1]) << 8));
}

std::int16_t to_pcm16(double x) {
  const double c = std::clamp(x, -1.0, 1.0);
  return static_cast<std::int16_t>(std::lround(c * 32767.0));
}

}  // namespace

std::string encode_wav(const Waveform& w) {
  if (w.sample_rate <= 0) throw ContractError("encode_wav: sample rate must be > 0");
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVE";
  out += "fmt ";
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (double x : w.samples) put_u16(out, static_cast<std::uint16_t>(to_pcm16(x)));
  return out;
}

Waveform decode_wav(std::string_view b) {
  if (b.size() < 12 || b.substr(0, 4) != "RIFF" || b.substr(8, 4) != "WAVE")
    throw Error("not a RIFF/WAVE stream");
  std::size_t pos = 12;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (pos + 8 <= b.size()) {
    const auto id = b.substr(pos, 4);
    const std::uint32_t size = get_u32(b, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > b.size() && id != "data") throw Error("truncated WAV chunk");
    if (id == "fmt ") {
      if (size < 16) throw Error("short fmt chunk");
      format = get_u16(b, body);
      channels = get_u16(b, body + 2);
      rate = get_u32(b, body + 4);
      bits = get_u16(b, body + 14);
      if (format == 0xFFFE && size >= 26) format = get_u16(b, body + 24);  // WAVE_FORMAT_EXTENSIBLE
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw Error("WAV data chunk before fmt chunk");
      if (channels == 0 || rate == 0) throw Error("invalid WAV format header");
      const std::size_t avail = std::min<std::size_t>(size, b.size() - body);
      Waveform w;
      w.sample_rate = static_cast<int>(rate);
      if (format == 1 && bits == 16) {
        const std::size_t frames = avail / (2u * channels);
        w.samples.resize(frames);
        for (std::size_t f = 0; f < frames; ++f) {
          double acc = 0.0;
          for (std::size_t c = 0; c < channels; ++c) {
            const auto raw = static_cast<std::int16_t>(get_u16(b, body + 2 * (f * channels + c)));
            acc += std::max(-1.0, raw / 32767.0);
          }
          w.samples[f] = acc / channels;
        }
      } else if (format == 3 && bits == 32) {
        const std::size_t frames = avail / (4u * channels);
        w.samples.resize(frames);
        for (std::size_t f = 0; f < frames; ++f) {
          double acc = 0.0;
          for (std::size_t c = 0; c < channels; ++c) {
            const std::uint32_t raw = get_u32(b, body + 4 * (f * channels + c));
            float x;
            std::memcpy(&x, &raw, sizeof x);
            acc += x;
          }
          w.samples[f] = acc / channels;
        }
      } else {
        throw Error("unsupported WAV encoding (format " + std::to_string(format) + ", " +
                    std::to_string(bits) + " bits)");
      }
      return w;
    }
    pos = body + size + (size & 1u);
  }
  throw Error("WAV stream has no data chunk");
}

void write_wav(const std::filesystem::path& path, const Waveform& w) { write_file_atomic(path, encode_wav(w)); }

Waveform read_wav(const std::filesystem::path& path) { return decode_wav(read_text_file(path)); }

Waveform quantize_pcm16(const Waveform& w) {
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.resize(w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    out.samples[i] = std::max(-1.0, to_pcm16(w.samples[i]) / 32767.0);
  return out;
}

}  // namespace dialoforge

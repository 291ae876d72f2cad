#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "dialoforge/quality_gate.hpp"
#include "dialoforge/voice_render.hpp"

namespace dialoforge {

/// Shared state of the deterministic speech stand-ins: the mock TTS records
/// which text every waveform it produced carries, the mock ASR reads it back.
class MockSpeechRegistry {
 public:
  void remember(const Waveform& w, const std::string& text);
  std::optional<std::string> lookup(const Waveform& w) const;

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::uint64_t, std::string> texts_;
};

/// Harmonic tone generator: carrier frequency keyed by speaker id, amplitude
/// by pitch, duration proportional to word count over the speed factor, and a
/// small seeded noise floor. Pure in (content, style, speaker_id, seed).
class MockTtsClient final : public TtsClient {
 public:
  struct Options {
    int native_rate = kCanonicalSampleRate;
    double seconds_per_word = 0.3;
    double noise_level = 0.004;
  };

  explicit MockTtsClient(std::shared_ptr<MockSpeechRegistry> registry);
  MockTtsClient(std::shared_ptr<MockSpeechRegistry> registry, Options opts);

  Waveform synthesize(const std::string& content, const StyleSpec& style, int speaker_id,
                      std::uint64_t seed) override;
  bool thread_safe() const override { return true; }

  static double carrier_hz(int speaker_id);
  static double amplitude(Pitch pitch);
  static double speed_factor(Speed speed);

 private:
  std::shared_ptr<MockSpeechRegistry> registry_;
  Options opts_;
};

/// Returns the registered ground-truth text, replacing each word with
/// probability `corruption_rate` (seeded per waveform, so the result is pure).
class MockAsrClient final : public AsrClient {
 public:
  MockAsrClient(std::shared_ptr<MockSpeechRegistry> registry, double corruption_rate = 0.0, std::uint64_t seed = 0);

  std::string transcribe(const Waveform& w) override;
  bool thread_safe() const override { return true; }

 private:
  std::shared_ptr<MockSpeechRegistry> registry_;
  double corruption_rate_;
  std::uint64_t seed_;
};

/// Long-term average magnitude spectrum over the 64 FFT bins below 1 kHz, L2-normalized.
/// Utterances from the same mock speaker land close together.
class SpectralSpeakerEmbedder final : public SpeakerEmbedClient {
 public:
  static constexpr std::size_t kDim = 64;
  std::vector<double> embed(const Waveform& w) override;
  bool thread_safe() const override { return true; }
};

}  // namespace dialoforge

#include "dialoforge/mock_speech.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "dialoforge/dsp.hpp"
#include "dialoforge/rng.hpp"
#include "dialoforge/text.hpp"

namespace dialoforge {

void MockSpeechRegistry::remember(const Waveform& w, const std::string& text) {
  std::lock_guard lock(mu_);
  texts_[dsp::fingerprint(w)] = text;
}

std::optional<std::string> MockSpeechRegistry::lookup(const Waveform& w) const {
  const auto fp = dsp::fingerprint(w);
  std::lock_guard lock(mu_);
  auto it = texts_.find(fp);
  if (it == texts_.end()) return std::nullopt;
  return it->second;
}

MockTtsClient::MockTtsClient(std::shared_ptr<MockSpeechRegistry> registry)
    : MockTtsClient(std::move(registry), Options{}) {}

MockTtsClient::MockTtsClient(std::shared_ptr<MockSpeechRegistry> registry, Options opts)
    : registry_(std::move(registry)), opts_(opts) {}

double MockTtsClient::carrier_hz(int speaker_id) {
  const auto k = static_cast<std::uint64_t>(speaker_id) % 13;
  return 100.0 + 13.0 * static_cast<double>(k);
}

double MockTtsClient::amplitude(Pitch pitch) {
  switch (pitch) {
    case Pitch::low: return 0.25;
    case Pitch::normal: return 0.4;
    case Pitch::high: return 0.55;
  }
  return 0.4;
}

double MockTtsClient::speed_factor(Speed speed) {
  switch (speed) {
    case Speed::slow: return 0.8;
    case Speed::normal: return 1.0;
    case Speed::fast: return 1.25;
  }
  return 1.0;
}

Waveform MockTtsClient::synthesize(const std::string& content, const StyleSpec& style, int speaker_id,
                                   std::uint64_t seed) {
  const auto words = text::normalize_words(content);
  if (words.empty()) throw SynthesisError("mock tts: nothing to say");

  const int rate = opts_.native_rate;
  const double word_s = opts_.seconds_per_word / speed_factor(style.speed);
  const auto word_len = static_cast<std::size_t>(std::llround(word_s * rate));
  const auto pad = static_cast<std::size_t>(std::llround(0.05 * rate));
  Waveform w;
  w.sample_rate = rate;
  w.samples.assign(word_len * words.size() + 2 * pad, 0.0);

  // Speaker timbre: fixed harmonic weights derived from the speaker id.
  constexpr int kHarmonics = 6;
  std::array<double, kHarmonics> weights{};
  CounterRng timbre(derive_seed(0x5EA4E7, {static_cast<std::uint64_t>(speaker_id)}));
  double weight_sum = 0.0;
  for (int h = 0; h < kHarmonics; ++h) {
    weights[static_cast<std::size_t>(h)] = timbre.uniform(0.3, 1.0) / (h + 1);
    weight_sum += weights[static_cast<std::size_t>(h)];
  }
  const double f0 = carrier_hz(speaker_id);
  const double amp = amplitude(style.pitch);
  // Emotion shapes the attack of each word envelope.
  const double attack = 0.15 + 0.1 * static_cast<double>(hash_string(style.emotion) % 4);

  CounterRng noise(derive_seed(seed, {static_cast<std::uint64_t>(speaker_id)}));
  for (std::size_t wi = 0; wi < words.size(); ++wi) {
    const double word_gain = 0.6 + 0.4 * counter_uniform(derive_seed(0x30D, {hash_string(words[wi])}), 0);
    for (std::size_t i = 0; i < word_len; ++i) {
      const std::size_t n = pad + wi * word_len + i;
      const double t = static_cast<double>(n) / rate;
      const double pos = static_cast<double>(i) / static_cast<double>(word_len);
      const double env = pos < attack ? std::sin(0.5 * std::numbers::pi * pos / attack)
                                      : std::cos(0.5 * std::numbers::pi * (pos - attack) / (1.0 - attack));
      double s = 0.0;
      for (int h = 0; h < kHarmonics; ++h)
        s += weights[static_cast<std::size_t>(h)] * std::sin(2.0 * std::numbers::pi * f0 * (h + 1) * t);
      w.samples[n] = amp * word_gain * env * env * s / weight_sum;
    }
  }
  for (auto& x : w.samples) x = std::clamp(x + opts_.noise_level * noise.gaussian(), -1.0, 1.0);

  if (registry_) {
    registry_->remember(w, content);
    if (rate != kCanonicalSampleRate) registry_->remember(dsp::resample(w, kCanonicalSampleRate), content);
  }
  return w;
}

MockAsrClient::MockAsrClient(std::shared_ptr<MockSpeechRegistry> registry, double corruption_rate, std::uint64_t seed)
    : registry_(std::move(registry)), corruption_rate_(corruption_rate), seed_(seed) {}

std::string MockAsrClient::transcribe(const Waveform& w) {
  auto truth = registry_ ? registry_->lookup(w) : std::nullopt;
  if (!truth) throw ClientError("mock asr: waveform was not produced by the mock tts");
  if (corruption_rate_ <= 0.0) return *truth;
  auto words = text::split_whitespace(*truth);
  const std::uint64_t s = derive_seed(seed_, {dsp::fingerprint(w)});
  for (std::size_t i = 0; i < words.size(); ++i)
    if (counter_uniform(s, i) < corruption_rate_) words[i] = "zzgarbled";
  return text::join(words, " ");
}

std::vector<double> SpectralSpeakerEmbedder::embed(const Waveform& w) {
  const Waveform x = w.sample_rate == kCanonicalSampleRate ? w : dsp::resample(w, kCanonicalSampleRate);
  constexpr std::size_t kFrame = 1024, kHop = 512;
  // one embedding dimension per FFT bin below 1 kHz, where the voiced harmonics sit
  const std::size_t max_bin = kDim;

  std::vector<double> power(max_bin, 0.0);
  std::vector<std::complex<double>> buf(kFrame);
  std::vector<double> hann(kFrame);
  for (std::size_t i = 0; i < kFrame; ++i) hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / kFrame);
  for (std::size_t start = 0; start + kFrame <= x.samples.size() || start == 0; start += kHop) {
    for (std::size_t i = 0; i < kFrame; ++i) {
      const std::size_t n = start + i;
      buf[i] = n < x.samples.size() ? x.samples[n] * hann[i] : 0.0;
    }
    dsp::fft(buf);
    for (std::size_t k = 0; k < max_bin; ++k) power[k] += std::norm(buf[k]);
    if (start + kFrame >= x.samples.size()) break;
  }
  std::vector<double> emb(kDim, 0.0);
  double norm = 0.0;
  for (std::size_t k = 0; k < kDim; ++k) {
    emb[k] = std::sqrt(power[k]);
    norm += power[k];
  }
  if (norm == 0.0) throw ClientError("speaker embedder: silent waveform");
  norm = std::sqrt(norm);
  for (auto& v : emb) v /= norm;
  return emb;
}

}  // namespace dialoforge

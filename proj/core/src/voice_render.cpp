#include "dialoforge/voice_render.hpp"

#include <cmath>

#include "dialoforge/dsp.hpp"
#include "dialoforge/rng.hpp"
#include "dialoforge/text.hpp"

namespace dialoforge {

TrackLayout TrackLayout::shifted(std::size_t samples) const {
  TrackLayout out = *this;
  for (auto& s : out.segments) {
    s.start_sample += samples;
    s.end_sample += samples;
  }
  return out;
}

Waveform synthesize_turn(TtsClient& client, const TurnScript& turn, int speaker_id, std::uint64_t seed) {
  if (text::normalize_words(turn.content).empty()) throw ContractError("synthesize_turn: empty content");
  Waveform w;
  try {
    w = client.synthesize(turn.content, turn.style, speaker_id, seed);
  } catch (const SynthesisError&) {
    throw;
  } catch (const std::exception& e) {
    throw SynthesisError(std::string("tts client failed: ") + e.what());
  }
  if (w.samples.empty()) throw SynthesisError("tts client returned an empty waveform");
  if (w.sample_rate <= 0) throw SynthesisError("tts client returned an invalid sample rate");
  for (double x : w.samples)
    if (!std::isfinite(x)) throw SynthesisError("tts client returned non-finite samples");
  return w;
}

Waveform resample_16k(const Waveform& w) {
  if (w.sample_rate <= 0) throw ContractError("resample_16k: sample rate must be > 0");
  return dsp::resample(w, kCanonicalSampleRate);
}

void require_canonical(const Waveform& w, const char* what) {
  if (w.sample_rate != kCanonicalSampleRate)
    throw ContractError(std::string(what) + ": expected 16000 Hz, got " + std::to_string(w.sample_rate));
  for (double x : w.samples)
    if (!std::isfinite(x)) throw ContractError(std::string(what) + ": non-finite sample");
}

AssembledTrack assemble_dialogue_track(const std::vector<Waveform>& utterances, const std::vector<double>& gaps_s) {
  if (utterances.empty()) throw ContractError("assemble_dialogue_track: no utterances");
  if (gaps_s.size() + 1 != utterances.size())
    throw ContractError("assemble_dialogue_track: expected " + std::to_string(utterances.size() - 1) + " gaps, got " +
                        std::to_string(gaps_s.size()));
  AssembledTrack out;
  std::size_t total = 0;
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    require_canonical(utterances[i], "assemble_dialogue_track");
    total += utterances[i].samples.size();
    if (i < gaps_s.size()) {
      if (!(gaps_s[i] >= 0.0)) throw ContractError("assemble_dialogue_track: gaps must be >= 0");
      out.layout.gap_samples.push_back(dsp::seconds_to_samples(gaps_s[i]));
      total += out.layout.gap_samples.back();
    }
  }
  out.track.sample_rate = kCanonicalSampleRate;
  out.track.samples.reserve(total);
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    const std::size_t start = out.track.samples.size();
    out.track.samples.insert(out.track.samples.end(), utterances[i].samples.begin(), utterances[i].samples.end());
    out.layout.segments.push_back({static_cast<int>(i), start, out.track.samples.size()});
    if (i < out.layout.gap_samples.size()) out.track.samples.resize(out.track.samples.size() + out.layout.gap_samples[i], 0.0);
  }
  return out;
}

std::vector<double> sample_gaps(std::size_t count, double lo_s, double hi_s, std::uint64_t seed) {
  if (!(lo_s >= 0.0) || hi_s < lo_s) throw ContractError("sample_gaps: need 0 <= lo <= hi");
  CounterRng rng(seed);
  std::vector<double> out(count);
  for (auto& g : out) g = rng.uniform(lo_s, hi_s);
  return out;
}

}  // namespace dialoforge

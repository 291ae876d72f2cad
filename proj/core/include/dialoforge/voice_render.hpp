#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dialoforge/errors.hpp"
#include "dialoforge/schema.hpp"

namespace dialoforge {

/// Controllable text-to-speech backend.
class TtsClient {
 public:
  virtual ~TtsClient() = default;
  /// Returns a nonempty waveform at the client's native rate.
  virtual Waveform synthesize(const std::string& content, const StyleSpec& style, int speaker_id,
                              std::uint64_t seed) = 0;
  virtual bool thread_safe() const { return false; }
};

/// Retryable TTS failure.
class SynthesisError : public Error {
 public:
  using Error::Error;
};

struct TrackSegment {
  int turn_index = 0;
  std::size_t start_sample = 0;
  std::size_t end_sample = 0;  // exclusive

  double start_s() const { return static_cast<double>(start_sample) / kCanonicalSampleRate; }
  double end_s() const { return static_cast<double>(end_sample) / kCanonicalSampleRate; }
  bool operator==(const TrackSegment&) const = default;
};

/// Where each utterance sits inside an assembled 16 kHz track.
struct TrackLayout {
  std::vector<TrackSegment> segments;
  std::vector<std::size_t> gap_samples;

  /// Moves every segment later by `samples`.
  TrackLayout shifted(std::size_t samples) const;
  bool operator==(const TrackLayout&) const = default;
};

struct AssembledTrack {
  Waveform track;
  TrackLayout layout;
};

/// Throws ContractError on empty content, SynthesisError when the client fails
/// or returns an empty/invalid waveform.
Waveform synthesize_turn(TtsClient& client, const TurnScript& turn, int speaker_id, std::uint64_t seed);

/// Converts to the 16 kHz pipeline canon. Identity for 16 kHz input.
Waveform resample_16k(const Waveform& w);

/// Concatenates 16 kHz utterances with silent gaps (seconds, rounded to whole
/// samples). gaps.size() must be utterances.size() - 1.
AssembledTrack assemble_dialogue_track(const std::vector<Waveform>& utterances, const std::vector<double>& gaps_s);

/// Inter-turn gaps drawn uniformly from [lo_s, hi_s].
std::vector<double> sample_gaps(std::size_t count, double lo_s, double hi_s, std::uint64_t seed);

/// Throws ContractError unless the waveform is 16 kHz with finite samples.
void require_canonical(const Waveform& w, const char* what);

}  // namespace dialoforge

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "dialoforge/errors.hpp"
#include "dialoforge/schema.hpp"
#include "dialoforge/script_forge.hpp"
#include "dialoforge/voice_render.hpp"

namespace dialoforge {

class InvalidRmsError : public ContractError {
 public:
  using ContractError::ContractError;
};

inline constexpr std::string_view kEventDescriptionMarker = "Event description: ";

/// Keyword rule: impact/onset words vote temporary, sustained-sound nouns vote
/// continuous; ties go to temporary.
EventClass heuristic_event_class(std::string_view caption);

std::string event_duration_prompt(std::string_view caption);

struct EventClassification {
  EventClass event_class = EventClass::temporary;
  bool fallback = false;  // true when the client's answer could not be parsed
};

/// Asks the client; an answer naming exactly one class wins, anything else
/// falls back to heuristic_event_class and sets `fallback`.
EventClassification classify_event_duration(std::string_view caption, ChatClient& client, std::uint64_t seed = 0);

/// event ++ silence(gap_s) ++ track, with the layout shifted accordingly.
/// An empty event returns the track unchanged.
AssembledTrack splice_temporary(const Waveform& event, const Waveform& track, const TrackLayout& layout, double gap_s);

/// Repeats `bg` to exactly round(duration_s * 16000) samples, joining repeats
/// with a linear crossfade of crossfade_ms (capped at half the clip). Longer
/// clips are truncated.
Waveform loop_continuous(const Waveform& bg, double duration_s, double crossfade_ms);

struct OverlayResult {
  Waveform mix;
  double gain = 1.0;         // g applied to the background
  double peak_rescale = 1.0; // < 1 when the peak guard rescaled the mix
};

/// mix = speech + g * background with g = rms(speech)/rms(background) * 10^(-snr/20);
/// rescaled by 1/peak when any |sample| exceeds 1.
OverlayResult overlay_at_snr(const Waveform& speech, const Waveform& background, double target_snr_db);

struct SceneOptions {
  double snr_min_db = 5.0;
  double snr_max_db = 20.0;
  double crossfade_ms = 10.0;
  double intro_min_s = 2.0;
  double intro_max_s = 5.0;
  double splice_gap_min_s = 0.2;
  double splice_gap_max_s = 0.5;
};

struct SceneMixResult {
  Waveform track;
  TrackLayout layout;
  MixPlan plan;
};

/// First draw of the plan seed picks the method (uniformly between the two music methods).
MixMethod music_method_for(std::uint64_t plan_seed);

/// music_full_background: loop/truncate music to the track and overlay at the
/// seeded SNR. music_intro_segment: prepend a seeded 2-5 s music segment
/// (levelled to the seeded SNR against the speech) that fades out over crossfade_ms.
SceneMixResult integrate_music(const Waveform& track, const TrackLayout& layout, const Waveform& music,
                               std::uint64_t plan_seed, const SceneOptions& opts = {});

/// temporary -> splice_prefix with a seeded gap; continuous -> loop_background overlay.
SceneMixResult integrate_audio_event(const Waveform& track, const TrackLayout& layout, const Waveform& event,
                                     EventClass event_class, std::uint64_t plan_seed, const SceneOptions& opts = {});

/// Deterministic stand-in clips keyed by source id (mock mode has no asset files).
Waveform synth_event_clip(std::string_view source_id, EventClass event_class);
Waveform synth_music_clip(std::string_view source_id);

}  // namespace dialoforge

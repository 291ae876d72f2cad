#include "dialoforge/scene_mixer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "dialoforge/dsp.hpp"
#include "dialoforge/rng.hpp"
#include "dialoforge/text.hpp"

namespace dialoforge {

namespace {

constexpr std::array<std::string_view, 22> kOnsetRoots{
    "slam", "knock", "bang", "ring", "honk", "shatter", "crash", "pop", "beep", "click", "bark",
    "clap", "thud", "explo", "gunshot", "thump", "snap", "drop", "smash", "burst", "slap", "doorbell"};
constexpr std::array<std::string_view, 25> kSustainedRoots{
    "noise", "chatter", "rain", "wind", "hum", "engine", "idl", "traffic", "wave", "cricket",
    "buzz", "background", "water", "stream", "ambien", "crowd", "machine", "motor", "fan", "static",
    "drone", "chirp", "flow", "breez", "murmur"};

bool has_root(const std::string& word, std::string_view root) { return word.rfind(root, 0) == 0; }

}  // namespace

EventClass heuristic_event_class(std::string_view caption) {
  int onset = 0, sustained = 0;
  for (const auto& w : text::normalize_words(caption)) {
    for (auto r : kOnsetRoots) onset += has_root(w, r) ? 1 : 0;
    for (auto r : kSustainedRoots) sustained += has_root(w, r) ? 1 : 0;
  }
  return sustained > onset ? EventClass::continuous : EventClass::temporary;
}

std::string event_duration_prompt(std::string_view caption) {
  std::string p =
      "Decide whether the following audio event is temporary or continuous.\n"
      "A temporary event is a short sound that happens once or briefly, such as a door slamming or a phone "
      "ringing. A continuous event persists for a long time, such as background chatter or street noise.\n";
  p += kEventDescriptionMarker;
  p += caption;
  p += "\nAnswer with exactly one word: temporary or continuous.\n";
  return p;
}

EventClassification classify_event_duration(std::string_view caption, ChatClient& client, std::uint64_t seed) {
  if (text::trim(caption).empty()) throw ContractError("classify_event_duration: empty caption");
  std::string answer;
  try {
    answer = client.complete(event_duration_prompt(caption), seed);
  } catch (const std::exception&) {
    return {heuristic_event_class(caption), true};
  }
  const bool temporary = text::contains_word(answer, "temporary");
  const bool continuous = text::contains_word(answer, "continuous");
  if (temporary != continuous) return {temporary ? EventClass::temporary : EventClass::continuous, false};
  return {heuristic_event_class(caption), true};
}

AssembledTrack splice_temporary(const Waveform& event, const Waveform& track, const TrackLayout& layout, double gap_s) {
  require_canonical(event, "splice_temporary");
  require_canonical(track, "splice_temporary");
  if (event.samples.empty()) return {track, layout};
  const std::size_t gap = dsp::seconds_to_samples(gap_s);
  AssembledTrack out;
  out.track.sample_rate = kCanonicalSampleRate;
  out.track.samples.reserve(event.samples.size() + gap + track.samples.size());
  out.track.samples = event.samples;
  out.track.samples.resize(event.samples.size() + gap, 0.0);
  out.track.samples.insert(out.track.samples.end(), track.samples.begin(), track.samples.end());
  out.layout = layout.shifted(event.samples.size() + gap);
  return out;
}

Waveform loop_continuous(const Waveform& bg, double duration_s, double crossfade_ms) {
  require_canonical(bg, "loop_continuous");
  if (bg.samples.empty()) throw ContractError("loop_continuous: empty background");
  if (!(duration_s > 0.0)) throw ContractError("loop_continuous: duration must be > 0");
  if (!(crossfade_ms >= 0.0)) throw ContractError("loop_continuous: crossfade must be >= 0");
  const std::size_t n = dsp::seconds_to_samples(duration_s);
  Waveform out;
  out.sample_rate = kCanonicalSampleRate;
  if (bg.samples.size() >= n) {
    out.samples.assign(bg.samples.begin(), bg.samples.begin() + static_cast<std::ptrdiff_t>(n));
    return out;
  }
  const std::size_t xf = std::min(dsp::seconds_to_samples(crossfade_ms / 1000.0), bg.samples.size() / 2);
  out.samples = bg.samples;
  out.samples.reserve(n + bg.samples.size());
  while (out.samples.size() < n) {
    const std::size_t tail = out.samples.size() - xf;
    for (std::size_t i = 0; i < xf; ++i) {
      const double a = static_cast<double>(i + 1) / static_cast<double>(xf + 1);
      out.samples[tail + i] = (1.0 - a) * out.samples[tail + i] + a * bg.samples[i];
    }
    out.samples.insert(out.samples.end(), bg.samples.begin() + static_cast<std::ptrdiff_t>(xf), bg.samples.end());
  }
  out.samples.resize(n);
  return out;
}

OverlayResult overlay_at_snr(const Waveform& speech, const Waveform& background, double target_snr_db) {
  require_canonical(speech, "overlay_at_snr");
  require_canonical(background, "overlay_at_snr");
  if (speech.samples.size() != background.samples.size())
    throw ContractError("overlay_at_snr: length mismatch (" + std::to_string(speech.samples.size()) + " vs " +
                        std::to_string(background.samples.size()) + ")");
  if (!std::isfinite(target_snr_db)) throw ContractError("overlay_at_snr: target SNR must be finite");
  const double rs = dsp::rms(speech.samples);
  const double rb = dsp::rms(background.samples);
  if (!(rs > 0.0)) throw InvalidRmsError("overlay_at_snr: speech has zero RMS");
  if (!(rb > 0.0)) throw InvalidRmsError("overlay_at_snr: background has zero RMS");

  OverlayResult r;
  r.gain = rs / rb * std::pow(10.0, -target_snr_db / 20.0);
  r.mix.sample_rate = kCanonicalSampleRate;
  r.mix.samples.resize(speech.samples.size());
  for (std::size_t i = 0; i < speech.samples.size(); ++i)
    r.mix.samples[i] = speech.samples[i] + r.gain * background.samples[i];
  const double pk = dsp::peak(r.mix.samples);
  if (pk > 1.0) {
    r.peak_rescale = 1.0 / pk;
    for (auto& x : r.mix.samples) x *= r.peak_rescale;
  }
  return r;
}

namespace {

double apply_peak_guard(Waveform& w) {
  const double pk = dsp::peak(w.samples);
  if (pk <= 1.0) return 1.0;
  const double s = 1.0 / pk;
  for (auto& x : w.samples) x *= s;
  return s;
}

}  // namespace

MixMethod music_method_for(std::uint64_t plan_seed) {
  return counter_uniform(plan_seed, 0) < 0.5 ? MixMethod::music_full_background : MixMethod::music_intro_segment;
}

SceneMixResult integrate_music(const Waveform& track, const TrackLayout& layout, const Waveform& music,
                               std::uint64_t plan_seed, const SceneOptions& opts) {
  require_canonical(track, "integrate_music");
  require_canonical(music, "integrate_music");
  CounterRng rng(plan_seed);
  SceneMixResult out;
  out.plan.method = rng.uniform() < 0.5 ? MixMethod::music_full_background : MixMethod::music_intro_segment;
  out.plan.target_snr_db = rng.uniform(opts.snr_min_db, opts.snr_max_db);
  out.plan.crossfade_ms = opts.crossfade_ms;

  if (out.plan.method == MixMethod::music_full_background) {
    const Waveform bg = loop_continuous(music, track.duration_s(), opts.crossfade_ms);
    auto r = overlay_at_snr(track, bg, out.plan.target_snr_db);
    out.track = std::move(r.mix);
    out.layout = layout;
    out.plan.peak_rescale = r.peak_rescale;
    return out;
  }

  const double intro_s = rng.uniform(opts.intro_min_s, opts.intro_max_s);
  Waveform intro = loop_continuous(music, intro_s, opts.crossfade_ms);
  const double rs = dsp::rms(track.samples);
  const double rm = dsp::rms(intro.samples);
  if (!(rs > 0.0) || !(rm > 0.0)) throw InvalidRmsError("integrate_music: zero RMS input");
  const double g = rs / rm * std::pow(10.0, -out.plan.target_snr_db / 20.0);
  const std::size_t fade = std::min(intro.samples.size(), dsp::seconds_to_samples(opts.crossfade_ms / 1000.0));
  for (std::size_t i = 0; i < intro.samples.size(); ++i) {
    double f = 1.0;
    const std::size_t from_end = intro.samples.size() - i;
    if (from_end <= fade) f = static_cast<double>(from_end - 1) / static_cast<double>(fade);
    intro.samples[i] *= g * f;
  }
  auto spliced = splice_temporary(intro, track, layout, 0.0);
  out.track = std::move(spliced.track);
  out.layout = std::move(spliced.layout);
  out.plan.peak_rescale = apply_peak_guard(out.track);
  return out;
}

SceneMixResult integrate_audio_event(const Waveform& track, const TrackLayout& layout, const Waveform& event,
                                     EventClass event_class, std::uint64_t plan_seed, const SceneOptions& opts) {
  CounterRng rng(plan_seed);
  SceneMixResult out;
  out.plan.crossfade_ms = opts.crossfade_ms;
  out.plan.target_snr_db = rng.uniform(opts.snr_min_db, opts.snr_max_db);
  if (event_class == EventClass::temporary) {
    out.plan.method = MixMethod::splice_prefix;
    auto spliced = splice_temporary(event, track, layout, rng.uniform(opts.splice_gap_min_s, opts.splice_gap_max_s));
    out.track = std::move(spliced.track);
    out.layout = std::move(spliced.layout);
    out.plan.peak_rescale = apply_peak_guard(out.track);
    return out;
  }
  out.plan.method = MixMethod::loop_background;
  const Waveform bg = loop_continuous(event, track.duration_s(), opts.crossfade_ms);
  auto r = overlay_at_snr(track, bg, out.plan.target_snr_db);
  out.track = std::move(r.mix);
  out.layout = layout;
  out.plan.peak_rescale = r.peak_rescale;
  return out;
}

Waveform synth_event_clip(std::string_view source_id, EventClass event_class) {
  CounterRng rng(derive_seed(hash_string(source_id), {0xE7E47}));
  Waveform w;
  if (event_class == EventClass::temporary) {
    const std::size_t n = dsp::seconds_to_samples(rng.uniform(0.4, 0.9));
    const double decay = rng.uniform(6.0, 14.0);
    const double tone = rng.uniform(300.0, 1500.0);
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / kCanonicalSampleRate;
      const double env = std::exp(-decay * t);
      w.samples[i] = std::clamp(0.6 * env * (0.7 * rng.gaussian() * 0.5 + 0.3 * std::sin(2 * std::numbers::pi * tone * t)),
                                -1.0, 1.0);
    }
  } else {
    const std::size_t n = dsp::seconds_to_samples(3.0);
    const double smooth = rng.uniform(0.05, 0.3);
    const double wobble = rng.uniform(0.2, 1.0);
    w.samples.resize(n);
    double state = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / kCanonicalSampleRate;
      state += smooth * (rng.gaussian() - state);
      w.samples[i] = std::clamp(0.3 * state * (0.8 + 0.2 * std::sin(2 * std::numbers::pi * wobble * t)), -1.0, 1.0);
    }
  }
  return w;
}

Waveform synth_music_clip(std::string_view source_id) {
  CounterRng rng(derive_seed(hash_string(source_id), {0x3051C}));
  constexpr std::array<double, 7> kScale{261.63, 293.66, 329.63, 349.23, 392.0, 440.0, 493.88};
  const double bpm = rng.uniform(70.0, 130.0);
  const double beat_s = 60.0 / bpm;
  const std::size_t n = dsp::seconds_to_samples(4.0);
  std::array<std::size_t, 4> roots{};
  for (auto& r : roots) r = rng.below(kScale.size());
  Waveform w;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kCanonicalSampleRate;
    const std::size_t chord = std::min<std::size_t>(3, static_cast<std::size_t>(t));
    double s = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      const double f = kScale[(roots[chord] + 2 * k) % kScale.size()] * (roots[chord] + 2 * k >= kScale.size() ? 2.0 : 1.0);
      s += std::sin(2 * std::numbers::pi * f * t) / 3.0;
    }
    const double beat_phase = std::fmod(t, beat_s);
    const double kick = std::exp(-30.0 * beat_phase) * std::sin(2 * std::numbers::pi * 60.0 * beat_phase);
    w.samples[i] = 0.25 * s + 0.2 * kick;
  }
  return w;
}

}  // namespace dialoforge

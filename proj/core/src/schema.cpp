#include "dialoforge/schema.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <set>
#include <utility>

#include "dialoforge/errors.hpp"
#include "dialoforge/text.hpp"

namespace dialoforge {

namespace {

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::pair<E, std::string_view>, N>& table, std::string_view s) {
  for (const auto& [value, name] : table)
    if (name == s) return value;
  return std::nullopt;
}

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E v) {
  for (const auto& [value, name] : table)
    if (value == v) return name;
  return "?";
}

constexpr std::array<std::pair<Gender, std::string_view>, 2> kGenders{
    {{Gender::male, "male"}, {Gender::female, "female"}}};
constexpr std::array<std::pair<Pitch, std::string_view>, 3> kPitches{
    {{Pitch::low, "low"}, {Pitch::normal, "normal"}, {Pitch::high, "high"}}};
constexpr std::array<std::pair<Speed, std::string_view>, 3> kSpeeds{
    {{Speed::slow, "slow"}, {Speed::normal, "normal"}, {Speed::fast, "fast"}}};
constexpr std::array<std::pair<Role, std::string_view>, 2> kRoles{
    {{Role::human, "human"}, {Role::assistant, "assistant"}}};
constexpr std::array<std::pair<Subset, std::string_view>, 3> kSubsets{
    {{Subset::emotion, "emotion"}, {Subset::audio, "audio"}, {Subset::music, "music"}}};
constexpr std::array<std::pair<EventClass, std::string_view>, 2> kEventClasses{
    {{EventClass::temporary, "temporary"}, {EventClass::continuous, "continuous"}}};
constexpr std::array<std::pair<MixMethod, std::string_view>, 4> kMixMethods{
    {{MixMethod::splice_prefix, "splice_prefix"},
     {MixMethod::loop_background, "loop_background"},
     {MixMethod::music_full_background, "music_full_background"},
     {MixMethod::music_intro_segment, "music_intro_segment"}}};
constexpr std::array<std::pair<ReviewStatus, std::string_view>, 3> kReviewStatuses{
    {{ReviewStatus::pending, "pending"},
     {ReviewStatus::approved, "approved"},
     {ReviewStatus::rejected, "rejected"}}};

}  // namespace

std::string_view to_string(Gender v) { return name_of(kGenders, v); }
std::string_view to_string(Pitch v) { return name_of(kPitches, v); }
std::string_view to_string(Speed v) { return name_of(kSpeeds, v); }
std::string_view to_string(Role v) { return name_of(kRoles, v); }
std::string_view to_string(Subset v) { return name_of(kSubsets, v); }
std::string_view to_string(EventClass v) { return name_of(kEventClasses, v); }
std::string_view to_string(MixMethod v) { return name_of(kMixMethods, v); }
std::string_view to_string(ReviewStatus v) { return name_of(kReviewStatuses, v); }

std::optional<Gender> parse_gender(std::string_view s) { return lookup(kGenders, s); }
std::optional<Pitch> parse_pitch(std::string_view s) { return lookup(kPitches, s); }
std::optional<Speed> parse_speed(std::string_view s) { return lookup(kSpeeds, s); }
std::optional<Role> parse_role(std::string_view s) { return lookup(kRoles, s); }
std::optional<Subset> parse_subset(std::string_view s) { return lookup(kSubsets, s); }
std::optional<EventClass> parse_event_class(std::string_view s) { return lookup(kEventClasses, s); }
std::optional<MixMethod> parse_mix_method(std::string_view s) { return lookup(kMixMethods, s); }

EmotionVocabulary::EmotionVocabulary()
    : labels_{"neutral", "happy", "sad", "angry", "surprised", "fearful", "disgusted"} {}

EmotionVocabulary::EmotionVocabulary(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.empty()) throw ConfigError("emotion vocabulary must not be empty");
  std::set<std::string> seen;
  for (const auto& l : labels_) {
    if (l.empty() || l != text::to_lower(l) ||
        std::any_of(l.begin(), l.end(), [](unsigned char c) { return std::isspace(c); }))
      throw ConfigError("emotion label '" + l + "' must be a lowercase identifier");
    if (!seen.insert(l).second) throw ConfigError("duplicate emotion label '" + l + "'");
  }
}

bool EmotionVocabulary::contains(std::string_view label) const {
  return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
}

std::string EmotionVocabulary::joined() const { return text::join(labels_, ", "); }

std::vector<Violation> validate_script(const DialogueScript& script, const EmotionVocabulary& vocab) {
  std::vector<Violation> out;
  if (script.id.empty()) out.push_back({"id", "empty id"});
  if (script.turns.size() < 2)
    out.push_back({"turns", "turn count " + std::to_string(script.turns.size()) + " < 2"});

  for (std::size_t k = 0; k < script.turns.size(); ++k) {
    const auto& turn = script.turns[k];
    const std::string prefix = "turns[" + std::to_string(k) + "]";
    if (k == 0 && turn.role != Role::human) out.push_back({prefix + ".role", "must start with human"});
    if (k > 0 && turn.role == script.turns[k - 1].role)
      out.push_back({prefix + ".role", "non-alternating at index " + std::to_string(k)});
    if (text::normalize_words(turn.content).empty())
      out.push_back({prefix + ".content", "content has no word tokens"});
    if (!vocab.contains(turn.style.emotion))
      out.push_back({prefix + ".style.emotion", "unknown emotion '" + turn.style.emotion + "'"});
  }

  const auto& seed = script.seed;
  const bool has_topic = seed.topic.has_value();
  const bool has_caption = seed.caption.has_value();
  const bool has_aspects = seed.aspect_list.has_value();
  switch (script.subset) {
    case Subset::emotion:
      if (!has_topic || text::trim(*seed.topic).empty())
        out.push_back({"seed.topic", "emotion subset requires a topic"});
      if (has_caption || has_aspects) out.push_back({"seed", "emotion subset carries only a topic"});
      break;
    case Subset::audio:
      if (!has_caption || text::trim(*seed.caption).empty())
        out.push_back({"seed.caption", "audio subset requires a caption"});
      if (has_topic || has_aspects) out.push_back({"seed", "audio subset carries only a caption"});
      break;
    case Subset::music:
      if (!has_aspects || seed.aspect_list->empty())
        out.push_back({"seed.aspect_list", "music subset requires an aspect list"});
      if (has_topic || has_caption) out.push_back({"seed", "music subset carries only an aspect list"});
      break;
  }
  if (seed.event_class && script.subset != Subset::audio)
    out.push_back({"seed.event_class", "event class is only valid for the audio subset"});
  return out;
}

std::vector<Violation> validate_entry(const ManifestEntry& entry, const EmotionVocabulary& vocab) {
  auto out = validate_script(entry.script, vocab);
  if (entry.utterances.size() != entry.script.turns.size())
    out.push_back({"utterances", "utterance count " + std::to_string(entry.utterances.size()) +
                                     " != turn count " + std::to_string(entry.script.turns.size())});
  for (std::size_t i = 0; i < entry.utterances.size(); ++i) {
    const auto& u = entry.utterances[i];
    const std::string prefix = "utterances[" + std::to_string(i) + "]";
    if (u.turn_index != static_cast<int>(i)) out.push_back({prefix + ".turn_index", "out of order"});
    if (!(u.duration_s > 0.0) || !std::isfinite(u.duration_s))
      out.push_back({prefix + ".duration_s", "duration must be > 0"});
    if (text::trim(u.transcript).empty()) out.push_back({prefix + ".transcript", "empty transcript"});
    if (!vocab.contains(u.style.emotion))
      out.push_back({prefix + ".style.emotion", "unknown emotion '" + u.style.emotion + "'"});
  }
  if (!(entry.mixed_duration_s >= 0.0)) out.push_back({"mixed_duration_s", "negative duration"});

  const auto& v = entry.verification;
  if (v.max_attempts < 1) out.push_back({"verification.max_attempts", "must be >= 1"});
  if (v.attempts_used < 1 || v.attempts_used > v.max_attempts)
    out.push_back({"verification.attempts_used", "outside [1, max_attempts]"});
  for (double w : v.per_utterance_wer)
    if (!(w >= 0.0) || !std::isfinite(w)) {
      out.push_back({"verification.per_utterance_wer", "rates must be finite and >= 0"});
      break;
    }
  if (!(v.speaker_min_cosine >= -1.0 - 1e-9 && v.speaker_min_cosine <= 1.0 + 1e-9))
    out.push_back({"verification.speaker_min_cosine", "outside [-1, 1]"});
  if (v.machine_verdict.pass && !v.machine_verdict.reason.empty())
    out.push_back({"verification.machine_verdict", "pass verdict carries a failure reason"});
  if (!v.machine_verdict.pass && v.machine_verdict.reason.empty())
    out.push_back({"verification.machine_verdict", "fail verdict needs a reason"});
  if (v.human_verdict.status != ReviewStatus::pending && !v.machine_verdict.pass)
    out.push_back({"verification.human_verdict", "only machine-passed entries can be reviewed"});
  if (entry.scene) {
    if (!std::isfinite(entry.scene->target_snr_db)) out.push_back({"scene.target_snr_db", "not finite"});
    if (!(entry.scene->crossfade_ms >= 0.0)) out.push_back({"scene.crossfade_ms", "must be >= 0"});
  }
  return out;
}

void require_valid(const ManifestEntry& entry, const EmotionVocabulary& vocab) {
  const auto violations = validate_entry(entry, vocab);
  if (!violations.empty())
    throw ValidationError(entry.id(), violations.front().field, violations.front().message);
}

}  // namespace dialoforge

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dialoforge {

enum class Gender { male, female };
enum class Pitch { low, normal, high };
enum class Speed { slow, normal, fast };
enum class Role { human, assistant };
enum class Subset { emotion, audio, music };
enum class EventClass { temporary, continuous };
enum class MixMethod { splice_prefix, loop_background, music_full_background, music_intro_segment };

std::string_view to_string(Gender v);
std::string_view to_string(Pitch v);
std::string_view to_string(Speed v);
std::string_view to_string(Role v);
std::string_view to_string(Subset v);
std::string_view to_string(EventClass v);
std::string_view to_string(MixMethod v);

// Parsers return nullopt on an unknown name.
std::optional<Gender> parse_gender(std::string_view s);
std::optional<Pitch> parse_pitch(std::string_view s);
std::optional<Speed> parse_speed(std::string_view s);
std::optional<Role> parse_role(std::string_view s);
std::optional<Subset> parse_subset(std::string_view s);
std::optional<EventClass> parse_event_class(std::string_view s);
std::optional<MixMethod> parse_mix_method(std::string_view s);

/// Closed, configurable set of emotion labels. Names are unique and lowercase.
class EmotionVocabulary {
 public:
  /// neutral, happy, sad, angry, surprised, fearful, disgusted
  EmotionVocabulary();
  /// Throws ConfigError when `labels` is empty, has duplicates or non-lowercase names.
  explicit EmotionVocabulary(std::vector<std::string> labels);

  bool contains(std::string_view label) const;
  const std::vector<std::string>& labels() const { return labels_; }
  /// Comma-separated listing for prompts.
  std::string joined() const;

 private:
  std::vector<std::string> labels_;
};

struct StyleSpec {
  Gender gender = Gender::female;
  Pitch pitch = Pitch::normal;
  Speed speed = Speed::normal;
  std::string emotion = "neutral";

  bool operator==(const StyleSpec&) const = default;
};

struct TurnScript {
  Role role = Role::human;
  StyleSpec style;
  std::string content;

  bool operator==(const TurnScript&) const = default;
};

struct SceneSeed {
  std::optional<std::string> topic;                     // emotion subset
  std::optional<std::string> caption;                   // audio subset
  std::optional<std::vector<std::string>> aspect_list;  // music subset
  std::optional<EventClass> event_class;                // audio subset, after classification
  std::optional<std::string> source_id;                 // asset key for audio/music clips

  bool operator==(const SceneSeed&) const = default;
};

struct DialogueScript {
  std::string id;
  Subset subset = Subset::emotion;
  SceneSeed seed;
  std::vector<TurnScript> turns;

  bool operator==(const DialogueScript&) const = default;
};

inline constexpr int kCanonicalSampleRate = 16000;

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kCanonicalSampleRate;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
  bool empty() const { return samples.empty(); }
  bool operator==(const Waveform&) const = default;
};

struct Utterance {
  int turn_index = 0;
  std::string audio_path;
  double duration_s = 0.0;
  std::string transcript;
  StyleSpec style;

  bool operator==(const Utterance&) const = default;
};

struct MachineVerdict {
  bool pass = false;
  std::string reason;  // empty on pass; e.g. "wer_exceeded", "timbre_inconsistent"
  std::string detail;

  static MachineVerdict passed() { return {true, {}, {}}; }
  static MachineVerdict failed(std::string reason, std::string detail = {}) {
    return {false, std::move(reason), std::move(detail)};
  }
  bool operator==(const MachineVerdict&) const = default;
};

enum class ReviewStatus { pending, approved, rejected };
std::string_view to_string(ReviewStatus v);

struct HumanVerdict {
  ReviewStatus status = ReviewStatus::pending;
  std::string reason;
  std::string reviewer;

  bool operator==(const HumanVerdict&) const = default;
};

struct VerificationRecord {
  std::vector<double> per_utterance_wer;
  double speaker_min_cosine = 1.0;
  int attempts_used = 1;
  int max_attempts = 10;
  MachineVerdict machine_verdict;
  HumanVerdict human_verdict;

  bool operator==(const VerificationRecord&) const = default;
};

/// How an audio event or music clip was merged into the dialogue track.
struct MixPlan {
  MixMethod method = MixMethod::loop_background;
  double target_snr_db = 10.0;
  double crossfade_ms = 10.0;
  double peak_rescale = 1.0;  // 1.0 when the peak guard did not trigger

  bool operator==(const MixPlan&) const = default;
};

struct ManifestEntry {
  DialogueScript script;
  std::vector<Utterance> utterances;
  std::string mixed_track_path;
  double mixed_duration_s = 0.0;
  VerificationRecord verification;
  std::optional<MixPlan> scene;

  const std::string& id() const { return script.id; }
  bool operator==(const ManifestEntry&) const = default;
};

struct Violation {
  std::string field;
  std::string message;

  bool operator==(const Violation&) const = default;
};

/// Checks every DialogueScript invariant and reports all violations found.
std::vector<Violation> validate_script(const DialogueScript& script,
                                       const EmotionVocabulary& vocab = {});

/// Full ManifestEntry check (script plus utterance/record invariants).
std::vector<Violation> validate_entry(const ManifestEntry& entry, const EmotionVocabulary& vocab = {});

/// Throws ValidationError on the first violation reported by validate_entry.
void require_valid(const ManifestEntry& entry, const EmotionVocabulary& vocab = {});

}  // namespace dialoforge

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dialoforge/errors.hpp"
#include "dialoforge/schema.hpp"
#include "dialoforge/voice_render.hpp"

namespace dialoforge {

class AsrClient {
 public:
  virtual ~AsrClient() = default;
  virtual std::string transcribe(const Waveform& w) = 0;
  virtual bool thread_safe() const { return false; }
};

/// Maps a waveform to a unit vector of fixed dimension.
class SpeakerEmbedClient {
 public:
  virtual ~SpeakerEmbedClient() = default;
  virtual std::vector<double> embed(const Waveform& w) = 0;
  virtual bool thread_safe() const { return false; }
};

class GateError : public Error {
 public:
  using Error::Error;
};

enum class WerMode {
  per_utterance,      // every utterance must be within the threshold
  dialogue_average,   // the mean over utterances must be within the threshold
};

struct GateConfig {
  double wer_threshold = 0.05;
  double cosine_threshold = 0.75;
  int max_attempts = 10;
  WerMode wer_mode = WerMode::per_utterance;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

/// Word error rate: Levenshtein distance over normalized word tokens divided by
/// the reference word count. Throws ContractError when the reference has no words.
double wer(std::string_view reference, std::string_view hypothesis);

/// Raw word-level edit distance (substitutions + deletions + insertions).
std::size_t word_edit_distance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);

/// speaker id -> utterances spoken by that speaker (each group nonempty).
using SpeakerGroups = std::map<int, std::vector<const Waveform*>>;

/// Minimum pairwise cosine of embeddings per speaker; 1.0 for single-utterance groups.
std::map<int, double> check_speaker_consistency(const SpeakerGroups& groups, SpeakerEmbedClient& client);

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

/// A rendered dialogue: one 16 kHz waveform per script turn.
struct SpokenDialogue {
  DialogueScript script;
  std::vector<Waveform> utterances;
  std::vector<int> speaker_ids;  // per turn
  std::vector<std::string> transcripts;  // ASR output per turn, filled by verification
  VerificationRecord verification;
};

/// Machine verification. WER is checked before timbre; the first failing
/// utterance/speaker is named in the verdict detail. human_verdict is pending.
/// When `transcripts` is given it receives the ASR output of every turn.
VerificationRecord verify_dialogue(const SpokenDialogue& dialogue, AsrClient& asr, SpeakerEmbedClient& embedder,
                                   const GateConfig& cfg, std::vector<std::string>* transcripts = nullptr);

/// Thrown when every attempt failed machine verification.
class RejectionError : public Error {
 public:
  RejectionError(const std::string& message, VerificationRecord record, std::optional<SpokenDialogue> last)
      : Error(message), record_(std::move(record)), last_(std::move(last)) {}
  const VerificationRecord& record() const { return record_; }
  /// Last fully rendered attempt, if any attempt rendered completely.
  const std::optional<SpokenDialogue>& last_dialogue() const { return last_; }

 private:
  VerificationRecord record_;
  std::optional<SpokenDialogue> last_;
};

struct SynthesisPlan {
  std::uint64_t base_seed = 0;
  int human_speaker = 0;
  int assistant_speaker = 1;
};

/// Seed used for attempt `attempt` (0-based) of a dialogue.
std::uint64_t attempt_seed(std::uint64_t base_seed, int attempt);

/// Renders the whole dialogue, verifies it and re-renders with a fresh seed
/// until it passes or cfg.max_attempts is exhausted (then RejectionError).
SpokenDialogue synthesize_with_retry(const DialogueScript& script, TtsClient& tts, AsrClient& asr,
                                     SpeakerEmbedClient& embedder, const GateConfig& cfg, const SynthesisPlan& plan);

}  // namespace dialoforge

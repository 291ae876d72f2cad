#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "dialoforge/errors.hpp"
#include "dialoforge/schema.hpp"

namespace dialoforge {

/// Chat-completion backend. Implementations state whether concurrent calls are safe.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(const std::string& prompt, std::uint64_t seed) = 0;
  virtual bool thread_safe() const { return false; }
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

/// Raised when model output does not follow the dialogue grammar.
class ScriptParseError : public Error {
 public:
  ScriptParseError(const std::string& message, std::string fragment)
      : Error(message + (fragment.empty() ? "" : " near: " + fragment)), fragment_(std::move(fragment)) {}
  const std::string& fragment() const { return fragment_; }

 private:
  std::string fragment_;
};

class GenerationError : public Error {
 public:
  GenerationError(const std::string& message, std::string last_parse_error, int attempts)
      : Error(message + ": " + last_parse_error), last_parse_error_(std::move(last_parse_error)), attempts_(attempts) {}
  const std::string& last_parse_error() const { return last_parse_error_; }
  int attempts() const { return attempts_; }

 private:
  std::string last_parse_error_;
  int attempts_;
};

class IngestionError : public Error {
 public:
  IngestionError(std::size_t row, const std::string& message)
      : Error("row " + std::to_string(row) + ": " + message), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

/// Prompt body with `{topic}` / `{caption}` / `{aspect_list}`, `{n_history}`
/// and `{emotion_set}` placeholders.
struct PromptTemplate {
  Subset subset = Subset::emotion;
  std::string body;

  /// Bundled template for a subset.
  static PromptTemplate builtin(Subset subset);
};

/// Throws TemplateError unless every placeholder the subset needs occurs exactly once
/// and no placeholder belonging to another subset occurs.
void check_template(const PromptTemplate& tmpl);

std::string render_prompt(const PromptTemplate& tmpl, const SceneSeed& seed, int n_history,
                          const EmotionVocabulary& vocab = {});

/// A well-formed script has this many turns for `n_history` history rounds:
/// n_history (human, assistant) rounds, then the current human turn and the
/// assistant response.
constexpr int turns_for_history(int n_history) { return 2 * n_history + 2; }

/// Fenced block the model must answer with, one turn per line:
///
///   ```dialogue
///   role=human | gender=female | pitch=normal | speed=fast | emotion=happy | text=...
///   ```
///
/// `text=` is the last field and runs to end of line.
std::string emit_script_output(const std::vector<TurnScript>& turns);

/// Parses the grammar above. The result has id/subset/seed from the arguments
/// and passes validate_script. Throws ScriptParseError carrying the offending fragment.
DialogueScript parse_script_output(std::string_view raw, Subset subset, int n_history, std::string id,
                                   SceneSeed seed, const EmotionVocabulary& vocab = {});

struct GeneratedScript {
  DialogueScript script;
  int attempts = 0;
};

/// Calls the client until an answer parses, at most `max_parse_retries` times.
/// Call i (0-based) uses seed derive_seed(base_seed, {i}).
GeneratedScript generate_script(ChatClient& client, const PromptTemplate& tmpl, const SceneSeed& seed_data,
                                int n_history, int max_parse_retries, std::string id, std::uint64_t base_seed,
                                const EmotionVocabulary& vocab = {});

struct CaptionRecord {
  std::string source_id;
  std::string caption;               // audio subset; joined tags for music
  std::vector<std::string> aspects;  // music subset

  bool operator==(const CaptionRecord&) const = default;
};

/// Phrases whose presence marks a caption as containing human speech.
const std::vector<std::string>& default_speech_keywords();
bool mentions_speech(std::string_view caption, const std::vector<std::string>& keywords);

/// Comma-separated file with a header row (AudioCaps/MusicCaps export shape).
/// Rows mentioning speech are dropped. Throws IngestionError with the 1-based
/// file line of the offending record (the header is line 1).
std::vector<CaptionRecord> ingest_caption_corpus(const std::filesystem::path& path, Subset subset,
                                                 const std::vector<std::string>& speech_keywords =
                                                     default_speech_keywords());
std::vector<CaptionRecord> parse_caption_csv(std::string_view csv, Subset subset,
                                             const std::vector<std::string>& speech_keywords =
                                                 default_speech_keywords());

/// Bundled seed assets.
const std::vector<std::string>& emotion_topics();
std::vector<CaptionRecord> builtin_captions(Subset subset);

/// Deterministic stand-in for an LLM: a pure function of (prompt, seed).
/// Answers script prompts in the dialogue grammar, event-duration prompts
/// with "temporary"/"continuous" and evaluation prompts with "Score: k".
class MockChatClient final : public ChatClient {
 public:
  struct Options {
    /// Probability that a script answer is deliberately malformed.
    double malformed_rate = 0.0;
  };

  MockChatClient() = default;
  explicit MockChatClient(Options opts) : opts_(opts) {}

  std::string complete(const std::string& prompt, std::uint64_t seed) override;
  bool thread_safe() const override { return true; }

 private:
  Options opts_;
};

// Markers the bundled prompts carry so the mock can recognise them.
inline constexpr std::string_view kHistoryRoundsMarker = "History rounds: ";
inline constexpr std::string_view kEmotionSetMarker = "Allowed emotions: ";
inline constexpr std::string_view kEventDurationMarker = "temporary or continuous";
inline constexpr std::string_view kEvalMarker = "Rate the final response";

}  // namespace dialoforge

#pragma once

// End-to-end corpus crafting: script -> render + gate -> scene mix -> manifest.
//
// Output directory layout:
//   corpus.manifest.jsonl         one entry per dialogue that got audio
//   failures.jsonl                dialogues that produced no entry, with the error
//   audio/<id>/turn_XX.wav        16 kHz PCM16 utterances of the final attempt
//   audio/<id>/mixed.wav          assembled (and scene-mixed) dialogue track
//   checkpoints/<id>.json         per-dialogue stage record used for resuming
//   checkpoints/run.json          configuration fingerprint of the run

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dialoforge/http_clients.hpp"
#include "dialoforge/quality_gate.hpp"
#include "dialoforge/scene_mixer.hpp"
#include "dialoforge/schema.hpp"
#include "dialoforge/script_forge.hpp"

namespace dialoforge {

enum class Stage { scripted, rendered, gated, mixed, finalized };
std::string_view to_string(Stage s);
std::optional<Stage> parse_stage(std::string_view s);

inline constexpr std::string_view kManifestFileName = "corpus.manifest.jsonl";
inline constexpr std::string_view kFailuresFileName = "failures.jsonl";

struct MockSettings {
  double asr_corruption = 0.0;
  /// Dialogue indices (0-based) whose mock ASR garbles every word, so they
  /// fail every attempt.
  std::set<std::size_t> always_fail_asr;
  double malformed_script_rate = 0.0;
  int tts_native_rate = kCanonicalSampleRate;
};

struct PipelineConfig {
  Subset subset = Subset::emotion;
  std::size_t corpus_size = 5;
  /// History rounds are drawn uniformly from [n_history_min, n_history_max].
  int n_history_min = 3;
  int n_history_max = 3;
  GateConfig gate;
  SceneOptions scene;
  double gap_min_s = 0.2;
  double gap_max_s = 0.6;
  /// Synthetic share used by blend demos over this corpus.
  double blend_alpha = 0.2;
  std::uint64_t seed = 0;
  int max_parse_retries = 5;
  ClientEndpoints endpoints;  // all empty = mock mode
  MockSettings mock;
  EmotionVocabulary vocab;
  std::filesystem::path output_dir = "corpus";
  /// 0 = hardware concurrency.
  unsigned workers = 0;
  /// Stops every dialogue after this stage without writing the manifest
  /// (simulates an interrupted run).
  std::optional<Stage> stop_after;

  /// Throws ConfigError.
  void validate() const;
  /// Expected turns per dialogue under the history-round distribution.
  double expected_turns() const;
  std::string id_for(std::size_t index) const;
  /// Stable digest of every field that affects the produced corpus.
  std::string fingerprint() const;
};

/// Clients used for one dialogue. References must outlive the run.
struct DialogueClients {
  ChatClient* chat = nullptr;
  TtsClient* tts = nullptr;
  AsrClient* asr = nullptr;
  SpeakerEmbedClient* embed = nullptr;
};

/// Builds the clients for dialogue `index`. The default factory (see
/// make_client_factory) uses live clients for configured endpoints and the
/// deterministic mocks otherwise.
using ClientFactory = std::function<DialogueClients(std::size_t index)>;

class ClientSet;
/// Owns the clients behind a ClientFactory.
std::shared_ptr<ClientSet> make_client_set(const PipelineConfig& cfg);
ClientFactory make_client_factory(std::shared_ptr<ClientSet> set);
/// True when every client in the set may be called from several threads.
bool clients_thread_safe(const ClientSet& set);

struct FailureRecord {
  std::string id;
  std::size_t index = 0;
  std::string stage;  // stage that was being attempted
  std::string error;

  bool operator==(const FailureRecord&) const = default;
};

struct CorpusStats {
  std::size_t dialogues = 0;
  std::size_t turns = 0;
  double avg_turns = 0.0;
  double total_duration_s = 0.0;
  double total_hours = 0.0;
  std::map<std::string, std::size_t> emotions;  // per turn
  std::map<std::string, std::size_t> subsets;
  std::size_t machine_pass = 0;
  std::size_t machine_fail = 0;
  std::size_t approved = 0;
  std::size_t rejected = 0;
  std::size_t pending = 0;  // machine-passed, awaiting review
};

CorpusStats corpus_stats(const std::vector<ManifestEntry>& entries);
std::string stats_to_json(const CorpusStats& stats);

struct PipelineResult {
  std::vector<ManifestEntry> entries;
  std::vector<FailureRecord> failures;
  CorpusStats stats;
  std::filesystem::path manifest_path;
  bool interrupted = false;
  std::size_t resumed = 0;  // dialogues that started from a checkpoint
};

/// Runs (or resumes) the pipeline in cfg.output_dir. A dialogue's failure is
/// recorded and never aborts the run. Throws StartupError when a live endpoint
/// is unreachable and ConfigError when the output directory holds a run made
/// with a different configuration.
PipelineResult run_pipeline(const PipelineConfig& cfg);
PipelineResult run_pipeline(const PipelineConfig& cfg, const ClientFactory& clients, bool clients_thread_safe);

}  // namespace dialoforge

#pragma once

// Human review queue kept inside the manifest entries.

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dialoforge/schema.hpp"

namespace dialoforge {

struct ReviewSummary {
  std::string id;
  Subset subset = Subset::emotion;
  std::size_t turn_count = 0;
  int attempts_used = 1;
  double max_wer = 0.0;
  double speaker_min_cosine = 1.0;
  double mixed_duration_s = 0.0;

  bool operator==(const ReviewSummary&) const = default;
};

ReviewSummary summarize(const ManifestEntry& entry);

/// Machine-passed entries still awaiting a human verdict, in manifest (creation) order.
std::vector<ReviewSummary> list_pending_reviews(const std::vector<ManifestEntry>& entries);

/// Compare-and-set on human_verdict: only pending, machine-passed entries can be
/// decided. Throws StateError with code "not_found", "already_decided" or
/// "not_reviewable"; ContractError for a pending verdict or a rejection
/// without a reason.
VerificationRecord record_review_verdict(std::vector<ManifestEntry>& entries, const std::string& entry_id,
                                         ReviewStatus verdict, const std::string& reason,
                                         const std::string& reviewer);

/// Entries with machine pass and human approval.
std::vector<ManifestEntry> export_finalized(const std::vector<ManifestEntry>& entries);

/// A manifest file plus a mutex. Every verdict is persisted with an atomic
/// rewrite before it becomes visible to readers.
class ReviewStore {
 public:
  /// Throws StartupError when the manifest cannot be read.
  explicit ReviewStore(std::filesystem::path manifest_path, EmotionVocabulary vocab = {});

  std::vector<ManifestEntry> snapshot() const;
  std::optional<ManifestEntry> find(const std::string& id) const;
  std::vector<ReviewSummary> pending() const;
  VerificationRecord record(const std::string& id, ReviewStatus verdict, const std::string& reason,
                            const std::string& reviewer);

  const std::filesystem::path& manifest_path() const { return path_; }
  /// Directory holding the manifest; audio paths in entries are relative to it.
  std::filesystem::path root() const { return path_.parent_path(); }

 private:
  std::filesystem::path path_;
  EmotionVocabulary vocab_;
  mutable std::mutex mu_;
  std::vector<ManifestEntry> entries_;
};

}  // namespace dialoforge

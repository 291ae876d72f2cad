#include "dialoforge/review_store.hpp"

#include <algorithm>

#include "dialoforge/errors.hpp"
#include "dialoforge/manifest.hpp"
#include "dialoforge/text.hpp"

namespace dialoforge {

ReviewSummary summarize(const ManifestEntry& e) {
  ReviewSummary s;
  s.id = e.id();
  s.subset = e.script.subset;
  s.turn_count = e.script.turns.size();
  s.attempts_used = e.verification.attempts_used;
  const auto& w = e.verification.per_utterance_wer;
  s.max_wer = w.empty() ? 0.0 : *std::max_element(w.begin(), w.end());
  s.speaker_min_cosine = e.verification.speaker_min_cosine;
  s.mixed_duration_s = e.mixed_duration_s;
  return s;
}

std::vector<ReviewSummary> list_pending_reviews(const std::vector<ManifestEntry>& entries) {
  std::vector<ReviewSummary> out;
  for (const auto& e : entries) {
    if (e.verification.machine_verdict.pass && e.verification.human_verdict.status == ReviewStatus::pending) {
      out.push_back(summarize(e));
    }
  }
  return out;
}

VerificationRecord record_review_verdict(std::vector<ManifestEntry>& entries, const std::string& entry_id,
                                         ReviewStatus verdict, const std::string& reason,
                                         const std::string& reviewer) {
  if (verdict == ReviewStatus::pending) throw ContractError("verdict must be approved or rejected");
  if (verdict == ReviewStatus::rejected && text::trim(reason).empty()) {
    throw ContractError("a rejection needs a reason");
  }
  auto it = std::find_if(entries.begin(), entries.end(), [&](const ManifestEntry& e) { return e.id() == entry_id; });
  if (it == entries.end()) throw StateError("not_found", "no entry '" + entry_id + "'");
  auto& rec = it->verification;
  if (rec.human_verdict.status != ReviewStatus::pending) {
    throw StateError("already_decided", "entry '" + entry_id + "' is already " +
                                            std::string(to_string(rec.human_verdict.status)));
  }
  if (!rec.machine_verdict.pass) {
    throw StateError("not_reviewable", "entry '" + entry_id + "' failed machine verification");
  }
  rec.human_verdict = {verdict, reason, reviewer};
  return rec;
}

std::vector<ManifestEntry> export_finalized(const std::vector<ManifestEntry>& entries) {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    if (e.verification.machine_verdict.pass && e.verification.human_verdict.status == ReviewStatus::approved) {
      out.push_back(e);
    }
  }
  return out;
}

ReviewStore::ReviewStore(std::filesystem::path manifest_path, EmotionVocabulary vocab)
    : path_(std::move(manifest_path)), vocab_(std::move(vocab)) {
  if (!std::filesystem::exists(path_)) throw StartupError("manifest '" + path_.string() + "' does not exist");
  try {
    entries_ = read_manifest_file(path_, vocab_);
  } catch (const Error& e) {
    throw StartupError("cannot load manifest '" + path_.string() + "': " + e.what());
  }
}

std::vector<ManifestEntry> ReviewStore::snapshot() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::optional<ManifestEntry> ReviewStore::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  for (const auto& e : entries_) {
    if (e.id() == id) return e;
  }
  return std::nullopt;
}

std::vector<ReviewSummary> ReviewStore::pending() const {
  std::lock_guard lock(mu_);
  return list_pending_reviews(entries_);
}

VerificationRecord ReviewStore::record(const std::string& id, ReviewStatus verdict, const std::string& reason,
                                       const std::string& reviewer) {
  std::lock_guard lock(mu_);
  auto next = entries_;
  VerificationRecord rec = record_review_verdict(next, id, verdict, reason, reviewer);
  write_manifest_file(path_, next, vocab_);
  entries_ = std::move(next);
  return rec;
}

}  // namespace dialoforge

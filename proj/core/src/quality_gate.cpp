#include "dialoforge/quality_gate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dialoforge/rng.hpp"
#include "dialoforge/text.hpp"

namespace dialoforge {

void GateConfig::validate() const {
  if (!(wer_threshold >= 0.0 && wer_threshold <= 1.0)) throw ConfigError("wer_threshold must be in [0, 1]");
  if (!(cosine_threshold >= -1.0 && cosine_threshold <= 1.0)) throw ConfigError("cosine_threshold must be in [-1, 1]");
  if (max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
}

std::size_t word_edit_distance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  std::vector<std::size_t> prev(hyp.size() + 1), cur(hyp.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[hyp.size()];
}

double wer(std::string_view reference, std::string_view hypothesis) {
  const auto ref = text::normalize_words(reference);
  if (ref.empty()) throw ContractError("wer: reference has no word tokens");
  const auto hyp = text::normalize_words(hypothesis);
  return static_cast<double>(word_edit_distance(ref, hyp)) / static_cast<double>(ref.size());
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) throw GateError("embedding dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw GateError("zero embedding");
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

std::map<int, double> check_speaker_consistency(const SpeakerGroups& groups, SpeakerEmbedClient& client) {
  std::map<int, double> out;
  for (const auto& [speaker, utts] : groups) {
    if (utts.empty()) throw ContractError("check_speaker_consistency: empty group for speaker " + std::to_string(speaker));
    std::vector<std::vector<double>> embs;
    embs.reserve(utts.size());
    for (const Waveform* w : utts) {
      try {
        embs.push_back(client.embed(*w));
      } catch (const GateError&) {
        throw;
      } catch (const std::exception& e) {
        throw GateError(std::string("speaker embedding failed: ") + e.what());
      }
    }
    double min_cos = 1.0;
    for (std::size_t i = 0; i < embs.size(); ++i)
      for (std::size_t j = i + 1; j < embs.size(); ++j) min_cos = std::min(min_cos, cosine_similarity(embs[i], embs[j]));
    out[speaker] = min_cos;
  }
  return out;
}

VerificationRecord verify_dialogue(const SpokenDialogue& dialogue, AsrClient& asr, SpeakerEmbedClient& embedder,
                                   const GateConfig& cfg, std::vector<std::string>* transcripts) {
  cfg.validate();
  const auto& turns = dialogue.script.turns;
  if (dialogue.utterances.size() != turns.size() || dialogue.speaker_ids.size() != turns.size())
    throw ContractError("verify_dialogue: every turn must be rendered");

  VerificationRecord rec;
  rec.max_attempts = cfg.max_attempts;
  rec.attempts_used = 1;
  rec.per_utterance_wer.reserve(turns.size());
  if (transcripts) transcripts->clear();
  for (std::size_t i = 0; i < turns.size(); ++i) {
    std::string hyp;
    try {
      hyp = asr.transcribe(dialogue.utterances[i]);
    } catch (const std::exception& e) {
      throw GateError(std::string("asr failed on utterance ") + std::to_string(i) + ": " + e.what());
    }
    rec.per_utterance_wer.push_back(wer(turns[i].content, hyp));
    if (transcripts) transcripts->push_back(std::move(hyp));
  }

  SpeakerGroups groups;
  for (std::size_t i = 0; i < turns.size(); ++i) groups[dialogue.speaker_ids[i]].push_back(&dialogue.utterances[i]);
  const auto per_speaker = check_speaker_consistency(groups, embedder);
  rec.speaker_min_cosine = 1.0;
  for (const auto& [speaker, c] : per_speaker) rec.speaker_min_cosine = std::min(rec.speaker_min_cosine, c);

  rec.machine_verdict = MachineVerdict::passed();
  if (cfg.wer_mode == WerMode::per_utterance) {
    for (std::size_t i = 0; i < rec.per_utterance_wer.size(); ++i) {
      if (rec.per_utterance_wer[i] > cfg.wer_threshold) {
        rec.machine_verdict = MachineVerdict::failed("wer_exceeded", "utterance " + std::to_string(i));
        return rec;
      }
    }
  } else {
    const double mean = std::accumulate(rec.per_utterance_wer.begin(), rec.per_utterance_wer.end(), 0.0) /
                        static_cast<double>(rec.per_utterance_wer.size());
    if (mean > cfg.wer_threshold) {
      rec.machine_verdict = MachineVerdict::failed("wer_exceeded", "dialogue average");
      return rec;
    }
  }
  for (const auto& [speaker, c] : per_speaker) {
    if (c < cfg.cosine_threshold) {
      rec.machine_verdict = MachineVerdict::failed("timbre_inconsistent", "speaker " + std::to_string(speaker));
      return rec;
    }
  }
  return rec;
}

std::uint64_t attempt_seed(std::uint64_t base_seed, int attempt) {
  return derive_seed(base_seed, {0xA77E, static_cast<std::uint64_t>(attempt)});
}

SpokenDialogue synthesize_with_retry(const DialogueScript& script, TtsClient& tts, AsrClient& asr,
                                     SpeakerEmbedClient& embedder, const GateConfig& cfg, const SynthesisPlan& plan) {
  cfg.validate();
  if (const auto v = validate_script(script); !v.empty())
    throw ContractError("synthesize_with_retry: invalid script (" + v.front().field + ": " + v.front().message + ")");

  VerificationRecord last_record;
  last_record.max_attempts = cfg.max_attempts;
  std::optional<SpokenDialogue> last_dialogue;
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    const std::uint64_t seed = attempt_seed(plan.base_seed, attempt);
    SpokenDialogue d;
    d.script = script;
    bool rendered = true;
    for (std::size_t k = 0; k < script.turns.size(); ++k) {
      const auto& turn = script.turns[k];
      const int speaker = turn.role == Role::human ? plan.human_speaker : plan.assistant_speaker;
      try {
        d.utterances.push_back(resample_16k(synthesize_turn(tts, turn, speaker, derive_seed(seed, {k}))));
      } catch (const SynthesisError& e) {
        last_record = VerificationRecord{};
        last_record.max_attempts = cfg.max_attempts;
        last_record.machine_verdict = MachineVerdict::failed("synthesis_error", e.what());
        rendered = false;
        break;
      }
      d.speaker_ids.push_back(speaker);
    }
    if (!rendered) {
      last_record.attempts_used = attempt + 1;
      continue;
    }
    d.verification = verify_dialogue(d, asr, embedder, cfg, &d.transcripts);
    d.verification.attempts_used = attempt + 1;
    if (d.verification.machine_verdict.pass) return d;
    last_record = d.verification;
    last_dialogue = std::move(d);
  }
  throw RejectionError("dialogue '" + script.id + "' failed verification after " + std::to_string(cfg.max_attempts) +
                           " attempts (" + last_record.machine_verdict.reason + ")",
                       last_record, std::move(last_dialogue));
}

}  // namespace dialoforge

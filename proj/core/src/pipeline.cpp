#include "dialoforge/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

#include "dialoforge/errors.hpp"
#include "dialoforge/manifest.hpp"
#include "dialoforge/mock_speech.hpp"
#include "dialoforge/rng.hpp"
#include "dialoforge/wav_io.hpp"
#include "json_codec.hpp"

namespace dialoforge {

namespace fs = std::filesystem;
using codec::json;

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::scripted: return "scripted";
    case Stage::rendered: return "rendered";
    case Stage::gated: return "gated";
    case Stage::mixed: return "mixed";
    case Stage::finalized: return "finalized";
  }
  return "?";
}

std::optional<Stage> parse_stage(std::string_view s) {
  for (Stage v : {Stage::scripted, Stage::rendered, Stage::gated, Stage::mixed, Stage::finalized}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

void PipelineConfig::validate() const {
  if (corpus_size == 0) throw ConfigError("corpus size must be >= 1");
  if (corpus_size > 9999) throw ConfigError("corpus size must be <= 9999");
  if (n_history_min < 1 || n_history_max < n_history_min) {
    throw ConfigError("history rounds need 1 <= min <= max");
  }
  gate.validate();
  if (!(scene.snr_min_db <= scene.snr_max_db)) throw ConfigError("SNR range is empty");
  if (!(gap_min_s >= 0.0 && gap_max_s >= gap_min_s)) throw ConfigError("inter-turn gap range is invalid");
  if (!(blend_alpha >= 0.0 && blend_alpha <= 1.0)) throw ConfigError("blend alpha must lie in [0, 1]");
  if (max_parse_retries < 1) throw ConfigError("max_parse_retries must be >= 1");
  if (!(mock.asr_corruption >= 0.0 && mock.asr_corruption <= 1.0)) throw ConfigError("ASR corruption must lie in [0, 1]");
  if (!(mock.malformed_script_rate >= 0.0 && mock.malformed_script_rate <= 1.0)) {
    throw ConfigError("malformed script rate must lie in [0, 1]");
  }
  if (mock.tts_native_rate < 8000) throw ConfigError("mock TTS rate must be >= 8000 Hz");
  endpoints.validate();
}

double PipelineConfig::expected_turns() const {
  return static_cast<double>(turns_for_history(n_history_min) + turns_for_history(n_history_max)) / 2.0;
}

std::string PipelineConfig::id_for(std::size_t index) const {
  const char* prefix = subset == Subset::emotion ? "emo" : subset == Subset::audio ? "aud" : "mus";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%04zu", prefix, index + 1);
  return buf;
}

std::string PipelineConfig::fingerprint() const {
  json j;
  j["subset"] = to_string(subset);
  j["corpus_size"] = corpus_size;
  j["n_history"] = {n_history_min, n_history_max};
  j["gate"] = {{"wer_threshold", gate.wer_threshold},
               {"cosine_threshold", gate.cosine_threshold},
               {"max_attempts", gate.max_attempts},
               {"wer_mode", gate.wer_mode == WerMode::per_utterance ? "per_utterance" : "dialogue_average"}};
  j["scene"] = {scene.snr_min_db,   scene.snr_max_db,       scene.crossfade_ms,     scene.intro_min_s,
                scene.intro_max_s, scene.splice_gap_min_s, scene.splice_gap_max_s};
  j["gaps"] = {gap_min_s, gap_max_s};
  j["seed"] = seed;
  j["max_parse_retries"] = max_parse_retries;
  j["emotions"] = vocab.labels();
  j["live"] = {endpoints.llm ? endpoints.llm->url : "", endpoints.tts ? endpoints.tts->url : "",
               endpoints.asr ? endpoints.asr->url : "", endpoints.embed ? endpoints.embed->url : ""};
  j["mock"] = {{"asr_corruption", mock.asr_corruption},
               {"always_fail_asr", mock.always_fail_asr},
               {"malformed_script_rate", mock.malformed_script_rate},
               {"tts_native_rate", mock.tts_native_rate}};
  return j.dump();
}

// ---------------------------------------------------------------------------
// Clients

class ClientSet {
 public:
  std::shared_ptr<MockSpeechRegistry> registry;
  std::unique_ptr<ChatClient> chat;
  std::unique_ptr<TtsClient> tts;
  std::unique_ptr<AsrClient> asr;
  std::map<std::size_t, std::unique_ptr<AsrClient>> failing_asr;
  std::unique_ptr<SpeakerEmbedClient> embed;
};

std::shared_ptr<ClientSet> make_client_set(const PipelineConfig& cfg) {
  cfg.endpoints.validate();
  auto set = std::make_shared<ClientSet>();
  const auto& ep = cfg.endpoints;
  if (ep.llm) {
    probe_endpoint(*ep.llm, "LLM");
    set->chat = std::make_unique<HttpChatClient>(*ep.llm);
  } else {
    set->chat = std::make_unique<MockChatClient>(MockChatClient::Options{cfg.mock.malformed_script_rate});
  }
  if (ep.tts) {
    probe_endpoint(*ep.tts, "TTS");
    probe_endpoint(*ep.asr, "ASR");
    set->tts = std::make_unique<HttpTtsClient>(*ep.tts);
    set->asr = std::make_unique<HttpAsrClient>(*ep.asr);
  } else {
    set->registry = std::make_shared<MockSpeechRegistry>();
    MockTtsClient::Options o;
    o.native_rate = cfg.mock.tts_native_rate;
    set->tts = std::make_unique<MockTtsClient>(set->registry, o);
    set->asr = std::make_unique<MockAsrClient>(set->registry, cfg.mock.asr_corruption, cfg.seed);
    for (std::size_t i : cfg.mock.always_fail_asr) {
      set->failing_asr[i] = std::make_unique<MockAsrClient>(set->registry, 1.0, cfg.seed);
    }
  }
  if (ep.embed) {
    probe_endpoint(*ep.embed, "speaker embedding");
    set->embed = std::make_unique<HttpSpeakerEmbedClient>(*ep.embed);
  } else {
    set->embed = std::make_unique<SpectralSpeakerEmbedder>();
  }
  return set;
}

ClientFactory make_client_factory(std::shared_ptr<ClientSet> set) {
  return [set](std::size_t index) {
    DialogueClients c{set->chat.get(), set->tts.get(), set->asr.get(), set->embed.get()};
    if (auto it = set->failing_asr.find(index); it != set->failing_asr.end()) c.asr = it->second.get();
    return c;
  };
}

bool clients_thread_safe(const ClientSet& s) {
  bool ok = s.chat->thread_safe() && s.tts->thread_safe() && s.asr->thread_safe() && s.embed->thread_safe();
  for (const auto& [i, a] : s.failing_asr) ok = ok && a->thread_safe();
  return ok;
}

// ---------------------------------------------------------------------------
// Stats

CorpusStats corpus_stats(const std::vector<ManifestEntry>& entries) {
  CorpusStats s;
  s.dialogues = entries.size();
  for (const auto& e : entries) {
    s.turns += e.script.turns.size();
    for (const auto& t : e.script.turns) ++s.emotions[t.style.emotion];
    ++s.subsets[std::string(to_string(e.script.subset))];
    s.total_duration_s += e.mixed_duration_s;
    const auto& v = e.verification;
    if (!v.machine_verdict.pass) {
      ++s.machine_fail;
      continue;
    }
    ++s.machine_pass;
    switch (v.human_verdict.status) {
      case ReviewStatus::approved: ++s.approved; break;
      case ReviewStatus::rejected: ++s.rejected; break;
      case ReviewStatus::pending: ++s.pending; break;
    }
  }
  if (s.dialogues > 0) s.avg_turns = static_cast<double>(s.turns) / static_cast<double>(s.dialogues);
  s.total_hours = s.total_duration_s / 3600.0;
  return s;
}

std::string stats_to_json(const CorpusStats& s) {
  json j;
  j["dialogues"] = s.dialogues;
  j["turns"] = s.turns;
  j["avg_turns"] = s.avg_turns;
  j["total_duration_s"] = s.total_duration_s;
  j["total_hours"] = s.total_hours;
  j["emotions"] = s.emotions;
  j["subsets"] = s.subsets;
  j["machine_pass"] = s.machine_pass;
  j["machine_fail"] = s.machine_fail;
  j["approved"] = s.approved;
  j["rejected"] = s.rejected;
  j["pending"] = s.pending;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Per-dialogue job

namespace {

struct Checkpoint {
  std::optional<Stage> stage;
  int n_history = 0;
  DialogueScript script;
  VerificationRecord record;
  std::vector<std::string> transcripts;
  std::vector<double> durations;
  double mixed_duration_s = 0.0;
  std::optional<MixPlan> scene;
};

json checkpoint_to_json(const std::string& id, std::size_t index, const Checkpoint& c) {
  json j;
  j["id"] = id;
  j["index"] = index;
  j["stage"] = to_string(*c.stage);
  j["n_history"] = c.n_history;
  j["script"] = codec::script_to_json(c.script);
  if (*c.stage >= Stage::rendered) {
    j["verification"] = codec::record_to_json(c.record);
    j["transcripts"] = c.transcripts;
    j["durations"] = c.durations;
  }
  if (*c.stage >= Stage::mixed) {
    j["mixed_duration_s"] = c.mixed_duration_s;
    if (c.scene) {
      j["scene"] = {{"method", to_string(c.scene->method)},
                    {"target_snr_db", c.scene->target_snr_db},
                    {"crossfade_ms", c.scene->crossfade_ms},
                    {"peak_rescale", c.scene->peak_rescale}};
    } else {
      j["scene"] = nullptr;
    }
  }
  return j;
}

Checkpoint checkpoint_from_json(const json& j) {
  Checkpoint c;
  const auto stage = parse_stage(j.at("stage").get<std::string>());
  if (!stage) throw std::invalid_argument("unknown stage");
  c.stage = stage;
  c.n_history = j.at("n_history").get<int>();
  c.script = codec::script_from_json(j.at("script"));
  if (*stage >= Stage::rendered) {
    c.record = codec::record_from_json(j.at("verification"));
    c.transcripts = j.at("transcripts").get<std::vector<std::string>>();
    c.durations = j.at("durations").get<std::vector<double>>();
  }
  if (*stage >= Stage::mixed) {
    c.mixed_duration_s = j.at("mixed_duration_s").get<double>();
    const auto& s = j.at("scene");
    if (!s.is_null()) {
      MixPlan p;
      const auto m = parse_mix_method(s.at("method").get<std::string>());
      if (!m) throw std::invalid_argument("unknown mix method");
      p.method = *m;
      p.target_snr_db = s.at("target_snr_db").get<double>();
      p.crossfade_ms = s.at("crossfade_ms").get<double>();
      p.peak_rescale = s.at("peak_rescale").get<double>();
      c.scene = p;
    }
  }
  return c;
}

struct JobOutcome {
  std::optional<ManifestEntry> entry;
  std::optional<FailureRecord> failure;
  bool resumed = false;
  bool stopped = false;
};

std::string turn_file(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "turn_%02zu.wav", k);
  return buf;
}

class Job {
 public:
  Job(const PipelineConfig& cfg, std::size_t index, DialogueClients clients)
      : cfg_(cfg), index_(index), id_(cfg.id_for(index)), clients_(clients),
        seed_(derive_seed(cfg.seed, {static_cast<std::uint64_t>(index)})),
        checkpoint_path_(cfg.output_dir / "checkpoints" / (id_ + ".json")) {}

  JobOutcome run() {
    JobOutcome out;
    Stage attempting = Stage::scripted;
    try {
      Checkpoint cp = load(out);
      while (!cp.stage || *cp.stage != Stage::finalized) {
        attempting = cp.stage ? static_cast<Stage>(static_cast<int>(*cp.stage) + 1) : Stage::scripted;
        switch (attempting) {
          case Stage::scripted: script(cp); break;
          case Stage::rendered:
            if (!render(cp, out)) return out;
            break;
          case Stage::gated: break;
          case Stage::mixed: mix(cp); break;
          case Stage::finalized: out.entry = build_entry(cp); break;
        }
        cp.stage = attempting;
        write_file_atomic(checkpoint_path_, checkpoint_to_json(id_, index_, cp).dump(2) + "\n");
        if (cfg_.stop_after && *cp.stage >= *cfg_.stop_after && *cp.stage != Stage::finalized) {
          out.stopped = true;
          return out;
        }
      }
      if (!out.entry) out.entry = build_entry(cp);
    } catch (const std::exception& e) {
      out.entry.reset();
      out.failure = FailureRecord{id_, index_, std::string(to_string(attempting)), e.what()};
    }
    return out;
  }

 private:
  fs::path audio_dir() const { return cfg_.output_dir / "audio" / id_; }
  std::string rel_audio(const std::string& file) const { return "audio/" + id_ + "/" + file; }

  Checkpoint load(JobOutcome& out) {
    if (!fs::exists(checkpoint_path_)) return {};
    try {
      Checkpoint c = checkpoint_from_json(json::parse(read_text_file(checkpoint_path_)));
      out.resumed = true;
      return c;
    } catch (const std::exception&) {
      // A torn or foreign checkpoint is discarded; the dialogue restarts.
      return {};
    }
  }

  SceneSeed scene_seed() {
    CounterRng rng(derive_seed(seed_, {0x70}));
    SceneSeed s;
    if (cfg_.subset == Subset::emotion) {
      const auto& topics = emotion_topics();
      s.topic = topics[rng.below(topics.size())];
      return s;
    }
    const auto captions = builtin_captions(cfg_.subset);
    if (captions.empty()) throw ContractError("no usable captions for this subset");
    const auto& rec = captions[rng.below(captions.size())];
    s.source_id = rec.source_id;
    if (cfg_.subset == Subset::audio) {
      s.caption = rec.caption;
      s.event_class = classify_event_duration(rec.caption, *clients_.chat, derive_seed(seed_, {0x71})).event_class;
    } else {
      s.aspect_list = rec.aspects;
    }
    return s;
  }

  void script(Checkpoint& cp) {
    CounterRng rng(derive_seed(seed_, {1}));
    const auto span = static_cast<std::uint64_t>(cfg_.n_history_max - cfg_.n_history_min + 1);
    cp.n_history = cfg_.n_history_min + static_cast<int>(rng.below(span));
    const SceneSeed seed = scene_seed();
    auto gen = generate_script(*clients_.chat, PromptTemplate::builtin(cfg_.subset), seed, cp.n_history,
                               cfg_.max_parse_retries, id_, derive_seed(seed_, {2}), cfg_.vocab);
    cp.script = std::move(gen.script);
  }

  bool render(Checkpoint& cp, JobOutcome& out) {
    SpokenDialogue spoken;
    try {
      spoken = synthesize_with_retry(cp.script, *clients_.tts, *clients_.asr, *clients_.embed, cfg_.gate,
                                     SynthesisPlan{derive_seed(seed_, {3}), 0, 1});
    } catch (const RejectionError& r) {
      if (!r.last_dialogue()) {
        out.failure = FailureRecord{id_, index_, "rendered", r.what()};
        return false;
      }
      spoken = *r.last_dialogue();
      spoken.verification = r.record();
    }
    fs::create_directories(audio_dir());
    cp.durations.clear();
    for (std::size_t k = 0; k < spoken.utterances.size(); ++k) {
      const Waveform q = quantize_pcm16(spoken.utterances[k]);
      write_file_atomic(audio_dir() / turn_file(k), encode_wav(q));
      cp.durations.push_back(q.duration_s());
    }
    cp.record = spoken.verification;
    cp.transcripts = spoken.transcripts;
    return true;
  }

  void mix(Checkpoint& cp) {
    std::vector<Waveform> utts;
    for (std::size_t k = 0; k < cp.script.turns.size(); ++k) utts.push_back(read_wav(audio_dir() / turn_file(k)));
    const auto gaps = sample_gaps(utts.size() - 1, cfg_.gap_min_s, cfg_.gap_max_s, derive_seed(seed_, {4}));
    AssembledTrack track = assemble_dialogue_track(utts, gaps);
    Waveform mixed = std::move(track.track);
    cp.scene.reset();
    const auto& s = cp.script.seed;
    const std::uint64_t plan_seed = derive_seed(seed_, {5});
    if (cp.script.subset == Subset::audio) {
      const EventClass cls = s.event_class.value_or(EventClass::temporary);
      auto r = integrate_audio_event(mixed, track.layout, synth_event_clip(s.source_id.value_or(id_), cls), cls,
                                     plan_seed, cfg_.scene);
      mixed = std::move(r.track);
      cp.scene = r.plan;
    } else if (cp.script.subset == Subset::music) {
      auto r = integrate_music(mixed, track.layout, synth_music_clip(s.source_id.value_or(id_)), plan_seed, cfg_.scene);
      mixed = std::move(r.track);
      cp.scene = r.plan;
    }
    mixed = quantize_pcm16(mixed);
    write_file_atomic(audio_dir() / "mixed.wav", encode_wav(mixed));
    cp.mixed_duration_s = mixed.duration_s();
  }

  ManifestEntry build_entry(const Checkpoint& cp) const {
    ManifestEntry e;
    e.script = cp.script;
    for (std::size_t k = 0; k < cp.script.turns.size(); ++k) {
      Utterance u;
      u.turn_index = static_cast<int>(k);
      u.audio_path = rel_audio(turn_file(k));
      u.duration_s = cp.durations.at(k);
      u.transcript = cp.transcripts.at(k);
      u.style = cp.script.turns[k].style;
      e.utterances.push_back(std::move(u));
    }
    e.mixed_track_path = rel_audio("mixed.wav");
    e.mixed_duration_s = cp.mixed_duration_s;
    e.verification = cp.record;
    e.scene = cp.scene;
    require_valid(e, cfg_.vocab);
    return e;
  }

  const PipelineConfig& cfg_;
  std::size_t index_;
  std::string id_;
  DialogueClients clients_;
  std::uint64_t seed_;
  fs::path checkpoint_path_;
};

void write_failures(const fs::path& path, const std::vector<FailureRecord>& failures) {
  std::string out;
  for (const auto& f : failures) {
    json j;
    j["id"] = f.id;
    j["index"] = f.index;
    j["stage"] = f.stage;
    j["error"] = f.error;
    out += j.dump() + "\n";
  }
  write_file_atomic(path, out);
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  auto set = make_client_set(cfg);
  return run_pipeline(cfg, make_client_factory(set), clients_thread_safe(*set));
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const ClientFactory& clients, bool thread_safe) {
  cfg.validate();
  fs::create_directories(cfg.output_dir / "checkpoints");
  fs::create_directories(cfg.output_dir / "audio");
  const fs::path run_file = cfg.output_dir / "checkpoints" / "run.json";
  const std::string fp = cfg.fingerprint() + "\n";
  if (fs::exists(run_file)) {
    if (read_text_file(run_file) != fp) {
      throw ConfigError("'" + cfg.output_dir.string() + "' holds a run made with a different configuration");
    }
  } else {
    write_file_atomic(run_file, fp);
  }

  std::vector<JobOutcome> outcomes(cfg.corpus_size);
  unsigned workers = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
  if (!thread_safe) workers = 1;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, cfg.corpus_size));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cfg.corpus_size; i = next++) {
      try {
        outcomes[i] = Job(cfg, i, clients(i)).run();
      } catch (const std::exception& e) {
        outcomes[i].failure = FailureRecord{cfg.id_for(i), i, "scripted", e.what()};
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Single writer: results are collected and emitted in index order.
  PipelineResult res;
  res.manifest_path = cfg.output_dir / kManifestFileName;
  for (auto& o : outcomes) {
    res.resumed += o.resumed;
    res.interrupted = res.interrupted || o.stopped;
    if (o.entry) res.entries.push_back(std::move(*o.entry));
    if (o.failure) res.failures.push_back(std::move(*o.failure));
  }
  if (!res.interrupted && fs::exists(res.manifest_path)) {
    // Human verdicts recorded against an earlier run of the same corpus survive a rerun.
    try {
      std::map<std::string, HumanVerdict> reviewed;
      for (const auto& e : read_manifest_file(res.manifest_path, cfg.vocab)) {
        if (e.verification.human_verdict.status != ReviewStatus::pending) reviewed[e.id()] = e.verification.human_verdict;
      }
      for (auto& e : res.entries) {
        auto it = reviewed.find(e.id());
        if (it != reviewed.end() && e.verification.machine_verdict.pass) e.verification.human_verdict = it->second;
      }
    } catch (const Error&) {
      // An unreadable previous manifest is simply replaced.
    }
  }
  res.stats = corpus_stats(res.entries);
  if (!res.interrupted) {
    write_manifest_file(res.manifest_path, res.entries, cfg.vocab);
    write_failures(cfg.output_dir / kFailuresFileName, res.failures);
  }
  return res;
}

}  // namespace dialoforge

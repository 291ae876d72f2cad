#include "dialoforge/manifest.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dialoforge/errors.hpp"
#include "json_codec.hpp"

namespace dialoforge {

namespace codec {

namespace {

const json& field(const json& j, const char* key) {
  if (!j.is_object()) throw std::invalid_argument("expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw std::invalid_argument(std::string("missing field '") + key + "'");
  return *it;
}

std::string str(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_string()) throw std::invalid_argument(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

double num(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number()) throw std::invalid_argument(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

int integer(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number_integer()) throw std::invalid_argument(std::string("field '") + key + "' must be an integer");
  return v.get<int>();
}

template <typename E, typename F>
E enum_field(const json& j, const char* key, F parse) {
  const auto s = str(j, key);
  auto v = parse(s);
  if (!v) throw std::invalid_argument(std::string("field '") + key + "' has unknown value '" + s + "'");
  return *v;
}

}  // namespace

json style_to_json(const StyleSpec& s) {
  json j;
  j["gender"] = to_string(s.gender);
  j["pitch"] = to_string(s.pitch);
  j["speed"] = to_string(s.speed);
  j["emotion"] = s.emotion;
  return j;
}

StyleSpec style_from_json(const json& j) {
  StyleSpec s;
  s.gender = enum_field<Gender>(j, "gender", parse_gender);
  s.pitch = enum_field<Pitch>(j, "pitch", parse_pitch);
  s.speed = enum_field<Speed>(j, "speed", parse_speed);
  s.emotion = str(j, "emotion");
  return s;
}

json script_to_json(const DialogueScript& s) {
  json j;
  j["id"] = s.id;
  j["subset"] = to_string(s.subset);
  json seed = json::object();
  if (s.seed.topic) seed["topic"] = *s.seed.topic;
  if (s.seed.caption) seed["caption"] = *s.seed.caption;
  if (s.seed.aspect_list) seed["aspect_list"] = *s.seed.aspect_list;
  if (s.seed.event_class) seed["event_class"] = to_string(*s.seed.event_class);
  if (s.seed.source_id) seed["source_id"] = *s.seed.source_id;
  j["seed"] = std::move(seed);
  json turns = json::array();
  for (const auto& t : s.turns) {
    json jt;
    jt["role"] = to_string(t.role);
    jt["style"] = style_to_json(t.style);
    jt["text"] = t.content;
    turns.push_back(std::move(jt));
  }
  j["turns"] = std::move(turns);
  return j;
}

DialogueScript script_from_json(const json& j) {
  DialogueScript s;
  s.id = str(j, "id");
  s.subset = enum_field<Subset>(j, "subset", parse_subset);
  const auto& seed = field(j, "seed");
  if (!seed.is_object()) throw std::invalid_argument("field 'seed' must be an object");
  if (seed.contains("topic")) s.seed.topic = str(seed, "topic");
  if (seed.contains("caption")) s.seed.caption = str(seed, "caption");
  if (seed.contains("aspect_list")) {
    const auto& a = seed["aspect_list"];
    if (!a.is_array()) throw std::invalid_argument("field 'aspect_list' must be an array");
    std::vector<std::string> tags;
    for (const auto& t : a) {
      if (!t.is_string()) throw std::invalid_argument("aspect tags must be strings");
      tags.push_back(t.get<std::string>());
    }
    s.seed.aspect_list = std::move(tags);
  }
  if (seed.contains("event_class"))
    s.seed.event_class = enum_field<EventClass>(seed, "event_class", parse_event_class);
  if (seed.contains("source_id")) s.seed.source_id = str(seed, "source_id");
  const auto& turns = field(j, "turns");
  if (!turns.is_array()) throw std::invalid_argument("field 'turns' must be an array");
  for (const auto& jt : turns) {
    TurnScript t;
    t.role = enum_field<Role>(jt, "role", parse_role);
    t.style = style_from_json(field(jt, "style"));
    t.content = str(jt, "text");
    s.turns.push_back(std::move(t));
  }
  return s;
}

json record_to_json(const VerificationRecord& v) {
  json j;
  j["per_utterance_wer"] = v.per_utterance_wer;
  j["speaker_min_cosine"] = v.speaker_min_cosine;
  j["attempts_used"] = v.attempts_used;
  j["max_attempts"] = v.max_attempts;
  json mv;
  mv["status"] = v.machine_verdict.pass ? "pass" : "fail";
  if (!v.machine_verdict.pass) {
    mv["reason"] = v.machine_verdict.reason;
    if (!v.machine_verdict.detail.empty()) mv["detail"] = v.machine_verdict.detail;
  }
  j["machine_verdict"] = std::move(mv);
  json hv;
  hv["status"] = to_string(v.human_verdict.status);
  if (!v.human_verdict.reason.empty()) hv["reason"] = v.human_verdict.reason;
  if (!v.human_verdict.reviewer.empty()) hv["reviewer"] = v.human_verdict.reviewer;
  j["human_verdict"] = std::move(hv);
  return j;
}

VerificationRecord record_from_json(const json& j) {
  VerificationRecord v;
  const auto& wers = field(j, "per_utterance_wer");
  if (!wers.is_array()) throw std::invalid_argument("field 'per_utterance_wer' must be an array");
  for (const auto& w : wers) {
    if (!w.is_number()) throw std::invalid_argument("per_utterance_wer entries must be numbers");
    v.per_utterance_wer.push_back(w.get<double>());
  }
  v.speaker_min_cosine = num(j, "speaker_min_cosine");
  v.attempts_used = integer(j, "attempts_used");
  v.max_attempts = integer(j, "max_attempts");
  const auto& mv = field(j, "machine_verdict");
  const auto status = str(mv, "status");
  if (status == "pass") {
    v.machine_verdict = MachineVerdict::passed();
  } else if (status == "fail") {
    v.machine_verdict = MachineVerdict::failed(str(mv, "reason"), mv.contains("detail") ? str(mv, "detail") : "");
  } else {
    throw std::invalid_argument("machine_verdict.status must be pass or fail");
  }
  const auto& hv = field(j, "human_verdict");
  const auto hs = str(hv, "status");
  if (hs == "pending") v.human_verdict.status = ReviewStatus::pending;
  else if (hs == "approved") v.human_verdict.status = ReviewStatus::approved;
  else if (hs == "rejected") v.human_verdict.status = ReviewStatus::rejected;
  else throw std::invalid_argument("human_verdict.status has unknown value '" + hs + "'");
  if (hv.contains("reason")) v.human_verdict.reason = str(hv, "reason");
  if (hv.contains("reviewer")) v.human_verdict.reviewer = str(hv, "reviewer");
  return v;
}

json entry_to_json(const ManifestEntry& e) {
  json j = script_to_json(e.script);
  json utts = json::array();
  for (const auto& u : e.utterances) {
    json ju;
    ju["turn_index"] = u.turn_index;
    ju["audio_path"] = u.audio_path;
    ju["duration_s"] = u.duration_s;
    ju["transcript"] = u.transcript;
    ju["style"] = style_to_json(u.style);
    utts.push_back(std::move(ju));
  }
  j["utterances"] = std::move(utts);
  j["mixed_track_path"] = e.mixed_track_path;
  j["mixed_duration_s"] = e.mixed_duration_s;
  j["verification"] = record_to_json(e.verification);
  if (e.scene) {
    json s;
    s["method"] = to_string(e.scene->method);
    s["target_snr_db"] = e.scene->target_snr_db;
    s["crossfade_ms"] = e.scene->crossfade_ms;
    s["peak_rescale"] = e.scene->peak_rescale;
    j["scene"] = std::move(s);
  }
  return j;
}

ManifestEntry entry_from_json(const json& j) {
  ManifestEntry e;
  e.script = script_from_json(j);
  const auto& utts = field(j, "utterances");
  if (!utts.is_array()) throw std::invalid_argument("field 'utterances' must be an array");
  for (const auto& ju : utts) {
    Utterance u;
    u.turn_index = integer(ju, "turn_index");
    u.audio_path = str(ju, "audio_path");
    u.duration_s = num(ju, "duration_s");
    u.transcript = str(ju, "transcript");
    u.style = style_from_json(field(ju, "style"));
    e.utterances.push_back(std::move(u));
  }
  e.mixed_track_path = str(j, "mixed_track_path");
  e.mixed_duration_s = num(j, "mixed_duration_s");
  e.verification = record_from_json(field(j, "verification"));
  if (j.contains("scene")) {
    const auto& s = j["scene"];
    MixPlan plan;
    plan.method = enum_field<MixMethod>(s, "method", parse_mix_method);
    plan.target_snr_db = num(s, "target_snr_db");
    plan.crossfade_ms = num(s, "crossfade_ms");
    plan.peak_rescale = num(s, "peak_rescale");
    e.scene = plan;
  }
  return e;
}

}  // namespace codec

std::string serialize_entry(const ManifestEntry& entry) { return codec::entry_to_json(entry).dump(); }

std::string serialize_manifest(const std::vector<ManifestEntry>& entries, const EmotionVocabulary& vocab) {
  std::string out;
  for (const auto& e : entries) {
    require_valid(e, vocab);
    out += serialize_entry(e);
    out += '\n';
  }
  return out;
}

std::vector<ManifestEntry> parse_manifest(std::string_view stream, const EmotionVocabulary& vocab) {
  std::vector<ManifestEntry> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < stream.size()) {
    const auto nl = stream.find('\n', pos);
    const auto line = stream.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? stream.size() : nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    ManifestEntry entry;
    try {
      entry = codec::entry_from_json(codec::json::parse(line));
    } catch (const codec::json::exception& e) {
      throw ParseError(line_no, std::string("malformed record: ") + e.what());
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_no, e.what());
    }
    require_valid(entry, vocab);
    out.push_back(std::move(entry));
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::vector<ManifestEntry> read_manifest_file(const std::filesystem::path& path, const EmotionVocabulary& vocab) {
  return parse_manifest(read_text_file(path), vocab);
}

void write_manifest_file(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries,
                         const EmotionVocabulary& vocab) {
  write_file_atomic(path, serialize_manifest(entries, vocab));
}

}  // namespace dialoforge

#include "dialoforge/http_clients.hpp"

#include <cstdlib>
#include <regex>

#include <httplib.h>
#include <json.hpp>

#include "dialoforge/errors.hpp"
#include "dialoforge/wav_io.hpp"

namespace dialoforge {

using json = nlohmann::json;

namespace {

struct SplitUrl {
  std::string base;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw ConfigError("endpoint URL must be http(s)://host[:port][/path]: " + url);
  return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

std::optional<Endpoint> env_endpoint(const char* url_var, const char* key_var) {
  const char* url = std::getenv(url_var);
  if (!url || !*url) return std::nullopt;
  const char* key = std::getenv(key_var);
  return Endpoint{url, key ? key : ""};
}

std::string post(const Endpoint& ep, const std::string& body, const char* content_type) {
  const SplitUrl u = split_url(ep.url);
  httplib::Client cli(u.base);
  cli.set_connection_timeout(10);
  cli.set_read_timeout(120);
  httplib::Headers headers;
  if (!ep.key.empty()) headers.emplace("Authorization", "Bearer " + ep.key);
  auto res = cli.Post(u.path, headers, body, content_type);
  if (!res) throw ClientError("request to " + ep.url + " failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    throw ClientError("request to " + ep.url + " returned HTTP " + std::to_string(res->status));
  }
  return res->body;
}

json post_json(const Endpoint& ep, const std::string& body, const char* content_type) {
  const std::string reply = post(ep, body, content_type);
  try {
    return json::parse(reply);
  } catch (const json::parse_error&) {
    throw ClientError("endpoint " + ep.url + " returned non-JSON body");
  }
}

}  // namespace

ClientEndpoints ClientEndpoints::from_env() {
  ClientEndpoints c;
  c.llm = env_endpoint("DIALOFORGE_LLM_URL", "DIALOFORGE_LLM_KEY");
  c.tts = env_endpoint("DIALOFORGE_TTS_URL", "DIALOFORGE_TTS_KEY");
  c.asr = env_endpoint("DIALOFORGE_ASR_URL", "DIALOFORGE_ASR_KEY");
  c.embed = env_endpoint("DIALOFORGE_EMBED_URL", "DIALOFORGE_EMBED_KEY");
  return c;
}

void ClientEndpoints::validate() const {
  if (tts.has_value() != asr.has_value()) {
    throw ConfigError("DIALOFORGE_TTS_URL and DIALOFORGE_ASR_URL must be set together");
  }
  for (const auto* ep : {&llm, &tts, &asr, &embed}) {
    if (*ep) split_url((*ep)->url);
  }
}

void probe_endpoint(const Endpoint& ep, const char* what) {
  SplitUrl u;
  try {
    u = split_url(ep.url);
  } catch (const ConfigError& e) {
    throw StartupError(e.what());
  }
  httplib::Client cli(u.base);
  cli.set_connection_timeout(5);
  cli.set_read_timeout(5);
  auto res = cli.Get(u.path);
  if (!res) {
    throw StartupError(std::string(what) + " endpoint " + ep.url + " is unreachable: " + httplib::to_string(res.error()));
  }
}

std::string HttpChatClient::complete(const std::string& prompt, std::uint64_t seed) {
  const json reply = post_json(ep_, json{{"prompt", prompt}, {"seed", seed}}.dump(), "application/json");
  if (reply.contains("text") && reply["text"].is_string()) return reply["text"].get<std::string>();
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw ClientError("chat reply has neither 'text' nor 'choices[0].message.content'");
  }
}

Waveform HttpTtsClient::synthesize(const std::string& content, const StyleSpec& style, int speaker_id,
                                   std::uint64_t seed) {
  const json body{{"text", content},
                  {"gender", to_string(style.gender)},
                  {"pitch", to_string(style.pitch)},
                  {"speed", to_string(style.speed)},
                  {"emotion", style.emotion},
                  {"speaker_id", speaker_id},
                  {"seed", seed}};
  std::string bytes;
  try {
    bytes = post(ep_, body.dump(), "application/json");
  } catch (const ClientError& e) {
    throw SynthesisError(e.what());
  }
  try {
    return decode_wav(bytes);
  } catch (const Error& e) {
    throw SynthesisError(std::string("TTS returned invalid audio: ") + e.what());
  }
}

std::string HttpAsrClient::transcribe(const Waveform& w) {
  const json reply = post_json(ep_, encode_wav(w), "audio/wav");
  if (!reply.contains("text") || !reply["text"].is_string()) throw ClientError("ASR reply has no 'text'");
  return reply["text"].get<std::string>();
}

std::vector<double> HttpSpeakerEmbedClient::embed(const Waveform& w) {
  const json reply = post_json(ep_, encode_wav(w), "audio/wav");
  try {
    return reply.at("embedding").get<std::vector<double>>();
  } catch (const json::exception&) {
    throw ClientError("embedding reply has no numeric 'embedding' array");
  }
}

}  // namespace dialoforge

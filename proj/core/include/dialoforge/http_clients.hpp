#pragma once

// Live model clients over HTTP, selected by environment variables.
//
//   DIALOFORGE_LLM_URL / _KEY    POST {"prompt", "seed"}                    -> {"text"}
//   DIALOFORGE_TTS_URL / _KEY    POST {"text", "gender", "pitch", "speed",
//                                      "emotion", "speaker_id", "seed"}     -> WAV bytes
//   DIALOFORGE_ASR_URL / _KEY    POST WAV bytes (audio/wav)                -> {"text"}
//   DIALOFORGE_EMBED_URL / _KEY  POST WAV bytes (audio/wav)                -> {"embedding": [...]}
//
// Keys go out as "Authorization: Bearer <key>". A chat reply may also use the
// {"choices": [{"message": {"content": ...}}]} shape.

#include <optional>
#include <string>

#include "dialoforge/quality_gate.hpp"
#include "dialoforge/script_forge.hpp"
#include "dialoforge/voice_render.hpp"

namespace dialoforge {

struct Endpoint {
  std::string url;
  std::string key;
};

struct ClientEndpoints {
  std::optional<Endpoint> llm, tts, asr, embed;

  bool all_mock() const { return !llm && !tts && !asr && !embed; }
  /// Reads the DIALOFORGE_*_URL/KEY variables; unset or empty URL means mock.
  static ClientEndpoints from_env();
  /// TTS and ASR must be both live or both mock (the mock ASR can only read
  /// mock TTS audio). Throws ConfigError otherwise.
  void validate() const;
};

/// Throws StartupError when nothing answers at the endpoint's host.
void probe_endpoint(const Endpoint& ep, const char* what);

class HttpChatClient final : public ChatClient {
 public:
  explicit HttpChatClient(Endpoint ep) : ep_(std::move(ep)) {}
  std::string complete(const std::string& prompt, std::uint64_t seed) override;
  bool thread_safe() const override { return true; }

 private:
  Endpoint ep_;
};

class HttpTtsClient final : public TtsClient {
 public:
  explicit HttpTtsClient(Endpoint ep) : ep_(std::move(ep)) {}
  Waveform synthesize(const std::string& content, const StyleSpec& style, int speaker_id,
                      std::uint64_t seed) override;
  bool thread_safe() const override { return true; }

 private:
  Endpoint ep_;
};

class HttpAsrClient final : public AsrClient {
 public:
  explicit HttpAsrClient(Endpoint ep) : ep_(std::move(ep)) {}
  std::string transcribe(const Waveform& w) override;
  bool thread_safe() const override { return true; }

 private:
  Endpoint ep_;
};

class HttpSpeakerEmbedClient final : public SpeakerEmbedClient {
 public:
  explicit HttpSpeakerEmbedClient(Endpoint ep) : ep_(std::move(ep)) {}
  std::vector<double> embed(const Waveform& w) override;
  bool thread_safe() const override { return true; }

 private:
  Endpoint ep_;
};

}  // namespace dialoforge

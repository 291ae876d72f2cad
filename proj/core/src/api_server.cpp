#include "dialoforge/api_server.hpp"

#include <thread>

#include <httplib.h>

#include "dialoforge/errors.hpp"
#include "dialoforge/manifest.hpp"
#include "dialoforge/pipeline.hpp"
#include "json_codec.hpp"

namespace dialoforge {

using codec::json;
namespace fs = std::filesystem;

struct ApiServer::Impl {
  std::shared_ptr<ReviewStore> store;
  ApiOptions opts;
  httplib::Server server;
  std::thread thread;
  int bound_port = -1;

  static void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    res.status = status;
    res.set_content(json{{"code", code}, {"message", message}}.dump(), "application/json");
  }

  static void send_json(httplib::Response& res, const json& j) {
    res.status = 200;
    res.set_content(j.dump(), "application/json");
  }

  static json summary_json(const ReviewSummary& s) {
    return {{"id", s.id},
            {"subset", to_string(s.subset)},
            {"turn_count", s.turn_count},
            {"attempts_used", s.attempts_used},
            {"max_wer", s.max_wer},
            {"speaker_min_cosine", s.speaker_min_cosine},
            {"mixed_duration_s", s.mixed_duration_s}};
  }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });

    server.Get("/api/review/pending", [this](const httplib::Request&, httplib::Response& res) {
      json arr = json::array();
      for (const auto& s : store->pending()) arr.push_back(summary_json(s));
      send_json(res, arr);
    });

    server.Get(R"(/api/dialogue/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      auto e = store->find(id);
      if (!e) return send_error(res, 404, "not_found", "no entry '" + id + "'");
      send_json(res, codec::entry_to_json(*e));
    });

    server.Get(R"(/api/audio/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      auto e = store->find(id);
      if (!e) return send_error(res, 404, "not_found", "no entry '" + id + "'");
      const auto& v = e->verification;
      if (v.human_verdict.status == ReviewStatus::rejected && opts.finalized_only) {
        return send_error(res, 403, "forbidden", "entry '" + id + "' was rejected in review");
      }
      if (opts.finalized_only && !(v.machine_verdict.pass && v.human_verdict.status == ReviewStatus::approved)) {
        return send_error(res, 403, "forbidden", "entry '" + id + "' is not finalized");
      }
      std::string rel = e->mixed_track_path;
      if (req.has_param("turn")) {
        std::size_t k = 0;
        try {
          k = static_cast<std::size_t>(std::stoul(req.get_param_value("turn")));
        } catch (const std::exception&) {
          return send_error(res, 400, "bad_request", "turn must be a non-negative integer");
        }
        if (k >= e->utterances.size()) return send_error(res, 404, "not_found", "no such turn");
        rel = e->utterances[k].audio_path;
      }
      const fs::path path = store->root() / rel;
      if (!fs::exists(path)) return send_error(res, 404, "audio_missing", "audio file '" + rel + "' is missing");
      res.status = 200;
      res.set_content(read_text_file(path), "audio/wav");
    });

    server.Post(R"(/api/review/([^/]+)/verdict)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::parse_error&) {
        return send_error(res, 400, "bad_request", "body must be JSON");
      }
      if (!body.is_object() || !body.contains("verdict") || !body["verdict"].is_string()) {
        return send_error(res, 400, "bad_request", "'verdict' must be \"approved\" or \"rejected\"");
      }
      const std::string verdict_s = body["verdict"].get<std::string>();
      ReviewStatus verdict;
      if (verdict_s == "approved") {
        verdict = ReviewStatus::approved;
      } else if (verdict_s == "rejected") {
        verdict = ReviewStatus::rejected;
      } else {
        return send_error(res, 400, "bad_request", "'verdict' must be \"approved\" or \"rejected\"");
      }
      if (!body.contains("reviewer") || !body["reviewer"].is_string() ||
          body["reviewer"].get<std::string>().empty()) {
        return send_error(res, 400, "bad_request", "'reviewer' is required");
      }
      std::string reason;
      if (body.contains("reason") && !body["reason"].is_null()) {
        if (!body["reason"].is_string()) return send_error(res, 400, "bad_request", "'reason' must be a string");
        reason = body["reason"].get<std::string>();
      }
      try {
        const auto rec = store->record(id, verdict, reason, body["reviewer"].get<std::string>());
        json out;
        out["id"] = id;
        out["verification"] = codec::record_to_json(rec);
        send_json(res, out);
      } catch (const StateError& e) {
        const int status = e.code() == "not_found" ? 404 : 409;
        send_error(res, status, e.code(), e.what());
      } catch (const ContractError& e) {
        send_error(res, 400, "bad_request", e.what());
      }
    });

    server.Get("/api/stats", [this](const httplib::Request&, httplib::Response& res) {
      res.status = 200;
      res.set_content(stats_to_json(corpus_stats(store->snapshot())), "application/json");
    });

    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string msg = "unexpected error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        msg = e.what();
      } catch (...) {
      }
      send_error(res, 500, "internal", msg);
    });

    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.status == 404 && res.body.empty()) send_error(res, 404, "not_found", "no such route");
    });
  }
};

ApiServer::ApiServer(std::shared_ptr<ReviewStore> store, ApiOptions options) : impl_(std::make_unique<Impl>()) {
  if (!store) throw ContractError("ApiServer needs a review store");
  impl_->store = std::move(store);
  impl_->opts = std::move(options);
  // httplib defaults to SO_REUSEPORT, which lets a second server share a taken port
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  impl_->routes();
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind() {
  if (impl_->bound_port >= 0) return impl_->bound_port;
  if (impl_->opts.port == 0) {
    impl_->bound_port = impl_->server.bind_to_any_port(impl_->opts.host);
  } else if (impl_->server.bind_to_port(impl_->opts.host, impl_->opts.port)) {
    impl_->bound_port = impl_->opts.port;
  }
  if (impl_->bound_port < 0) {
    throw StartupError("cannot bind " + impl_->opts.host + ":" + std::to_string(impl_->opts.port) +
                       " (port in use?)");
  }
  return impl_->bound_port;
}

void ApiServer::serve() {
  bind();
  impl_->server.listen_after_bind();
}

void ApiServer::start() {
  bind();
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void ApiServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int ApiServer::port() const { return impl_->bound_port; }

}  // namespace dialoforge

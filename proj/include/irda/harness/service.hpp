#pragma once

// Session service behind the HTTP API. Every mutation is written to the
// session's event log before it is acknowledged; on start-up all sessions
// are rebuilt from their logs.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "json.hpp"

#include "irda/core/error.hpp"
#include "irda/dialogue.hpp"
#include "irda/env.hpp"
#include "irda/harness/session_store.hpp"
#include "irda/llm/client.hpp"
#include "irda/reward.hpp"

namespace irda::harness {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Errors

enum class ApiCode { not_found, bad_state, bad_request, upstream_llm, internal };

inline std::string to_string(ApiCode c) {
  switch (c) {
    case ApiCode::not_found: return "not_found";
    case ApiCode::bad_state: return "bad_state";
    case ApiCode::bad_request: return "bad_request";
    case ApiCode::upstream_llm: return "upstream_llm";
    case ApiCode::internal: return "internal";
  }
  return "internal";
}

inline int http_status(ApiCode c) {
  switch (c) {
    case ApiCode::not_found: return 404;
    case ApiCode::bad_state: return 409;
    case ApiCode::bad_request: return 400;
    case ApiCode::upstream_llm: return 502;
    case ApiCode::internal: return 500;
  }
  return 500;
}

struct ApiError {
  ApiCode code = ApiCode::internal;
  std::string message;
  bool retryable = false;
};

inline ApiCode api_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::NotFound: return ApiCode::not_found;
    case ErrorKind::UnexpectedState:
    case ErrorKind::StageIncomplete: return ApiCode::bad_state;
    case ErrorKind::Transport:
    case ErrorKind::BadCredential:
    case ErrorKind::NoLogprobsAvailable:
    case ErrorKind::UnknownFingerprint:
    case ErrorKind::MalformedAnswer:
    case ErrorKind::HypothesisUnparsable: return ApiCode::upstream_llm;
    case ErrorKind::ConfigInvalid:
    case ErrorKind::UnknownPolicy:
    case ErrorKind::ParseError:
    case ErrorKind::OutOfRange:
    case ErrorKind::ContextInvalid:
    case ErrorKind::UnparsableLabel:
    case ErrorKind::TooFewTrajectories:
    case ErrorKind::TooFewPoints:
    case ErrorKind::BadRequest: return ApiCode::bad_request;
    default: return ApiCode::internal;
  }
}

inline ApiError to_api_error(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) return {api_code(err->kind()), err->what(), err->retryable()};
  if (dynamic_cast<const json::exception*>(&e)) return {ApiCode::bad_request, e.what(), false};
  return {ApiCode::internal, e.what(), false};
}

inline json error_body(const ApiError& e) {
  return json{{"error", {{"code", to_string(e.code)}, {"message", e.message}, {"retryable", e.retryable}}}};
}

// ---------------------------------------------------------------------------
// Service

/// UTC, millisecond resolution.
inline std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

namespace detail {

/// Serves completions logged earlier by fingerprint, otherwise asks the live
/// client and reports the exchange.
class LoggedClient : public llm::LlmClient {
 public:
  using Sink = std::function<void(const std::string&, const llm::Completion&)>;

  LoggedClient(llm::LlmClient* live, std::map<std::string, llm::Completion> known, Sink sink)
      : live_(live), known_(std::move(known)), sink_(std::move(sink)) {}

  llm::Completion complete(const llm::LlmRequest& request) override {
    const auto fp = llm::fingerprint(request);
    if (auto it = known_.find(fp); it != known_.end()) return it->second;
    if (!live_) fail(ErrorKind::UnknownFingerprint, "no logged completion for " + fp);
    auto c = live_->complete(request);
    if (sink_) sink_(fp, c);
    known_[fp] = c;
    return c;
  }

 private:
  llm::LlmClient* live_;
  std::map<std::string, llm::Completion> known_;
  Sink sink_;
};

}  // namespace detail

struct ServiceConfig {
  std::filesystem::path store_root;
  dialogue::SessionConfig session_defaults;
  std::function<std::string()> clock = utc_now;
};

class Service {
 public:
  Service(ServiceConfig config, const env::TrajectoryPool& pool, llm::LlmClient& llm)
      : config_(std::move(config)), pool_(pool), llm_(llm), store_(config_.store_root) {
    for (const auto& id : store_.list()) recover(id);
  }

  std::size_t session_count() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
  }

  json create_session(const json& body) {
    dialogue::SessionConfig cfg = config_.session_defaults;
    if (body.is_object() && body.contains("config")) {
      json merged = cfg;
      merged.update(body.at("config"));
      cfg = merged.get<dialogue::SessionConfig>();
    }
    std::string id;
    {
      std::lock_guard lock(mu_);
      id = next_id_locked();
      sessions_[id] = std::make_unique<Entry>();
    }
    Entry& e = entry(id);
    std::lock_guard lock(e.mu);
    try {
      const auto ts = config_.clock();
      auto [session, turn] = dialogue::start_session(pool_, cfg, id, ts);
      store_.append(id, "created", {{"session_id", id}, {"config", cfg}}, ts);
      e.session = std::move(session);
      return json{{"session_id", id}, {"turn", turn}};
    } catch (...) {
      std::lock_guard g(mu_);
      sessions_.erase(id);
      throw;
    }
  }

  json get_session(const std::string& id) {
    Entry& e = entry(id);
    std::lock_guard lock(e.mu);
    return dialogue::session_view(*e.session);
  }

  /// Idempotent in `seq`: a repeated sequence number returns the stored reply.
  json post_message(const std::string& id, std::int64_t seq, const std::string& text) {
    Entry& e = entry(id);
    std::lock_guard lock(e.mu);
    if (auto it = e.replies.find(seq); it != e.replies.end()) return it->second;
    if (e.session->phase == dialogue::Phase::Done) fail(ErrorKind::UnexpectedState, "session is finished");

    const auto ts = config_.clock();
    store_.append(id, "user_message", {{"seq", seq}, {"text", text}}, ts);
    detail::LoggedClient client(&llm_, {}, [&](const std::string& fp, const llm::Completion& c) {
      store_.append(id, "llm_exchange", {{"fingerprint", fp}, {"completion", c}}, config_.clock());
    });
    try {
      auto [next, turn] = dialogue::submit(*e.session, text, ts, client);
      json reply{{"turn", turn}};
      store_.append(id, "turn", {{"seq", seq}, {"reply", reply}}, ts);
      e.session = std::move(next);
      e.replies[seq] = reply;
      return reply;
    } catch (const std::exception& ex) {
      store_.append(id, "user_message_failed", {{"seq", seq}, {"error", ex.what()}}, ts);
      throw;
    }
  }

  json frames(const std::string& id, const std::string& tid) {
    Entry& e = entry(id);
    std::lock_guard lock(e.mu);
    return json(env::render_frames(pool_.at(tid)));
  }

  json context(const std::string& id) {
    Entry& e = entry(id);
    std::lock_guard lock(e.mu);
    return reward::export_context(dialogue::finalize(*e.session));
  }

 private:
  struct Entry {
    std::mutex mu;
    std::optional<dialogue::DialogueSession> session;
    std::map<std::int64_t, json> replies;
  };

  Entry& entry(const std::string& id) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end() || !it->second) fail(ErrorKind::NotFound, "no session " + id);
    return *it->second;
  }

  std::string next_id_locked() {
    for (;;) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "s%06zu", ++counter_);
      if (!sessions_.count(buf) && !store_.exists(buf)) return buf;
    }
  }

  /// Rebuilds one session by replaying its log. User messages without a
  /// logged outcome (the process died mid-turn) are dropped; the client
  /// retries them with the same seq.
  void recover(const std::string& id) {
    const auto events = store_.read(id);
    if (events.empty() || events.front().kind != "created") return;
    std::map<std::string, llm::Completion> exchanges;
    for (const auto& ev : events)
      if (ev.kind == "llm_exchange")
        exchanges[ev.payload.at("fingerprint").get<std::string>()] = ev.payload.at("completion").get<llm::Completion>();

    auto entry = std::make_unique<Entry>();
    auto cfg = events.front().payload.at("config").get<dialogue::SessionConfig>();
    entry->session = dialogue::start_session(pool_, cfg, id, events.front().timestamp).first;
    detail::LoggedClient client(nullptr, std::move(exchanges), {});
    std::map<std::int64_t, const SessionEvent*> pending;
    for (const auto& ev : events) {
      if (ev.kind == "user_message") {
        pending[ev.payload.at("seq").get<std::int64_t>()] = &ev;
      } else if (ev.kind == "turn") {
        const auto seq = ev.payload.at("seq").get<std::int64_t>();
        const SessionEvent* msg = pending.at(seq);
        entry->session =
            dialogue::submit(*entry->session, msg->payload.at("text").get<std::string>(), msg->timestamp, client).first;
        entry->replies[seq] = ev.payload.at("reply");
        pending.erase(seq);
      } else if (ev.kind == "user_message_failed") {
        pending.erase(ev.payload.at("seq").get<std::int64_t>());
      }
    }
    std::lock_guard lock(mu_);
    sessions_[id] = std::move(entry);
    const auto n = std::strtoull(id.c_str() + 1, nullptr, 10);
    counter_ = std::max<std::size_t>(counter_, n);
  }

  ServiceConfig config_;
  const env::TrajectoryPool& pool_;
  llm::LlmClient& llm_;
  SessionStore store_;
  mutable std::mutex mu_;
  std::map<std::string, std::unique_ptr<Entry>> sessions_;
  std::size_t counter_ = 0;
};

}  // namespace irda::harness

#pragma once

// OpenAI-compatible chat-completions backend with log-probability reporting.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "irda/llm/client.hpp"

namespace irda::llm {

struct HttpConfig {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string api_key;
  std::string model;
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds timeout{120};
  double requests_per_second = 0.0;  // 0 disables rate limiting

  /// IRDA_LLM_BASE_URL, IRDA_LLM_API_KEY, IRDA_LLM_MODEL.
  static HttpConfig from_env() {
    auto get = [](const char* name) {
      const char* v = std::getenv(name);
      return v ? std::string(v) : std::string{};
    };
    HttpConfig c;
    c.base_url = get("IRDA_LLM_BASE_URL");
    c.api_key = get("IRDA_LLM_API_KEY");
    c.model = get("IRDA_LLM_MODEL");
    if (c.base_url.empty()) c.base_url = "https://api.openai.com/v1";
    return c;
  }
};

namespace detail {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing slash
};

inline SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) fail(ErrorKind::BadRequest, "base URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  SplitUrl s;
  s.origin = url.substr(0, path_start);
  s.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!s.path.empty() && s.path.back() == '/') s.path.pop_back();
  return s;
}

}  // namespace detail

/// Converts a chat-completions response body into a Completion.
/// Log-probabilities become probabilities by exponentiation.
inline Completion parse_chat_response(const nlohmann::json& body) {
  const auto& choice = body.at("choices").at(0);
  Completion c;
  const auto& content = choice.at("message").at("content");
  c.text = content.is_string() ? content.get<std::string>() : std::string{};
  const auto lp = choice.find("logprobs");
  if (lp == choice.end() || lp->is_null() || !lp->contains("content") || (*lp)["content"].is_null())
    fail(ErrorKind::NoLogprobsAvailable, "response carries no log-probabilities");
  std::size_t offset = 0;
  for (const auto& tok : (*lp)["content"]) {
    TokenAlternatives pos;
    pos.offset = offset;
    pos.token = tok.at("token").get<std::string>();
    if (tok.contains("top_logprobs")) {
      for (const auto& alt : tok["top_logprobs"])
        pos.probs[alt.at("token").get<std::string>()] = std::exp(alt.at("logprob").get<double>());
    }
    if (!pos.probs.count(pos.token)) pos.probs[pos.token] = std::exp(tok.at("logprob").get<double>());
    offset += pos.token.size();
    c.positions.push_back(std::move(pos));
  }
  return c;
}

class HttpClient : public LlmClient {
 public:
  explicit HttpClient(HttpConfig config)
      : config_(std::move(config)), limiter_(config_.requests_per_second, 1.0) {
    if (config_.api_key.empty()) fail(ErrorKind::BadCredential, "no API key configured");
    url_ = detail::split_url(config_.base_url);
  }

  Completion complete(const LlmRequest& request) override {
    validate(request);
    nlohmann::json body{{"model", config_.model},
                        {"messages", nlohmann::json::array({
                                         {{"role", "system"}, {"content", request.system_text}},
                                         {{"role", "user"}, {"content", request.user_text}},
                                     })},
                        {"temperature", request.temperature},
                        {"max_tokens", request.max_tokens},
                        {"logprobs", true},
                        {"top_logprobs", request.top_logprobs}};
    const std::string payload = body.dump();
    auto backoff = config_.initial_backoff;
    std::string last_error;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
      limiter_.acquire();
      httplib::Client cli(url_.origin);
      cli.set_connection_timeout(config_.timeout);
      cli.set_read_timeout(config_.timeout);
      cli.set_bearer_token_auth(config_.api_key);
      auto res = cli.Post(url_.path + "/chat/completions", payload, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
      } else if (res->status == 401 || res->status == 403) {
        fail(ErrorKind::BadCredential, "provider rejected the credential (HTTP " +
                                           std::to_string(res->status) + ")");
      } else if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
      } else if (res->status != 200) {
        fail(ErrorKind::BadRequest, "HTTP " + std::to_string(res->status) + ": " + res->body);
      } else {
        try {
          return parse_chat_response(nlohmann::json::parse(res->body));
        } catch (const nlohmann::json::exception& e) {
          fail(ErrorKind::Transport, std::string("malformed provider response: ") + e.what());
        }
      }
      if (attempt < config_.max_attempts) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
    }
    fail(ErrorKind::Transport, last_error + " after " + std::to_string(config_.max_attempts) + " attempts");
  }

 private:
  HttpConfig config_;
  detail::SplitUrl url_;
  RateLimiter limiter_;
};

}  // namespace irda::llm

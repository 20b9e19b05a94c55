#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "irda/core/error.hpp"

namespace irda::llm {

inline constexpr const char* kCassetteSchema = "irda-cassette/1";

struct LlmRequest {
  std::string system_text;
  std::string user_text;
  double temperature = 0.0;
  int max_tokens = 1024;
  int top_logprobs = 10;

  friend bool operator==(const LlmRequest&, const LlmRequest&) = default;
};

inline void validate(const LlmRequest& r) {
  if (!(r.temperature >= 0.0)) fail(ErrorKind::BadRequest, "temperature must be >= 0");
  if (r.top_logprobs < 2) fail(ErrorKind::BadRequest, "top_logprobs must be >= 2");
  if (r.max_tokens < 1) fail(ErrorKind::BadRequest, "max_tokens must be >= 1");
}

/// Alternatives reported at one generated token. `offset` is the byte
/// offset of the token in Completion::text.
struct TokenAlternatives {
  std::size_t offset = 0;
  std::string token;
  std::map<std::string, double> probs;

  friend bool operator==(const TokenAlternatives&, const TokenAlternatives&) = default;
};

struct Completion {
  std::string text;
  std::vector<TokenAlternatives> positions;

  friend bool operator==(const Completion&, const Completion&) = default;
};

inline void validate(const Completion& c) {
  for (const auto& pos : c.positions) {
    double sum = 0.0;
    for (const auto& [_, p] : pos.probs) {
      if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::OutOfRange, "token probability outside [0, 1]");
      sum += p;
    }
    if (sum > 1.0 + 1e-6) fail(ErrorKind::OutOfRange, "token probabilities sum above 1");
  }
}

/// FNV-1a over length-prefixed fields, hex encoded. Any byte of the prompt
/// or any decoding parameter changes it.
inline std::string fingerprint(const LlmRequest& r) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto feed = [&h](const std::string& s) {
    const std::string len = std::to_string(s.size()) + ":";
    for (char c : len + s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001B3ULL;
    }
  };
  feed(r.system_text);
  feed(r.user_text);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", r.temperature);
  feed(buf);
  feed(std::to_string(r.max_tokens));
  feed(std::to_string(r.top_logprobs));
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Builds a completion whose final line is "ANSWER: <word>", with `probs`
/// reported at the answer word.
inline Completion answer_completion(const std::string& reasoning, const std::string& word,
                                    std::map<std::string, double> probs) {
  Completion c;
  c.text = reasoning.empty() ? "" : reasoning + "\n";
  c.text += "ANSWER: ";
  const std::size_t offset = c.text.size();
  c.text += word;
  c.positions.push_back({offset, word, std::move(probs)});
  return c;
}

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual Completion complete(const LlmRequest& request) = 0;
};

/// Deterministic scripted backend: exact fingerprints first, then the
/// optional responder. Thread-safe if the responder is.
class StubClient : public LlmClient {
 public:
  using Responder = std::function<Completion(const LlmRequest&)>;

  StubClient() = default;
  explicit StubClient(Responder responder) : responder_(std::move(responder)) {}

  void script(const LlmRequest& request, Completion completion) {
    std::lock_guard lock(mu_);
    scripted_[fingerprint(request)] = std::move(completion);
  }
  void script(const std::string& fp, Completion completion) {
    std::lock_guard lock(mu_);
    scripted_[fp] = std::move(completion);
  }

  Completion complete(const LlmRequest& request) override {
    validate(request);
    ++calls_;
    {
      std::lock_guard lock(mu_);
      if (auto it = scripted_.find(fingerprint(request)); it != scripted_.end()) return it->second;
    }
    if (responder_) return responder_(request);
    fail(ErrorKind::UnknownFingerprint, "stub has no script for " + fingerprint(request));
  }

  std::size_t calls() const { return calls_.load(); }

 private:
  std::mutex mu_;
  std::map<std::string, Completion> scripted_;
  Responder responder_;
  std::atomic<std::size_t> calls_{0};
};

// ---------------------------------------------------------------------------
// Cassettes

using nlohmann::json;

inline void to_json(json& j, const LlmRequest& r) {
  j = json{{"system_text", r.system_text}, {"user_text", r.user_text},
           {"temperature", r.temperature}, {"max_tokens", r.max_tokens},
           {"top_logprobs", r.top_logprobs}};
}
inline void from_json(const json& j, LlmRequest& r) {
  r.system_text = j.at("system_text").get<std::string>();
  r.user_text = j.at("user_text").get<std::string>();
  r.temperature = j.value("temperature", 0.0);
  r.max_tokens = j.value("max_tokens", 1024);
  r.top_logprobs = j.value("top_logprobs", 10);
}
inline void to_json(json& j, const TokenAlternatives& t) {
  j = json{{"offset", t.offset}, {"token", t.token}, {"probs", t.probs}};
}
inline void from_json(const json& j, TokenAlternatives& t) {
  t.offset = j.at("offset").get<std::size_t>();
  t.token = j.at("token").get<std::string>();
  t.probs = j.at("probs").get<std::map<std::string, double>>();
}
inline void to_json(json& j, const Completion& c) {
  j = json{{"text", c.text}, {"positions", c.positions}};
}
inline void from_json(const json& j, Completion& c) {
  c.text = j.at("text").get<std::string>();
  c.positions = j.at("positions").get<std::vector<TokenAlternatives>>();
}

inline json cassette_record(const LlmRequest& request, const Completion& completion) {
  return json{{"schema", kCassetteSchema},
              {"fingerprint", fingerprint(request)},
              {"request", request},
              {"completion", completion}};
}

inline std::map<std::string, Completion> read_cassette(std::istream& in) {
  std::map<std::string, Completion> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      if (j.value("schema", std::string{}) != kCassetteSchema)
        throw ParseError(lineno, std::string("expected schema ") + kCassetteSchema);
      out[j.at("fingerprint").get<std::string>()] = j.at("completion").get<Completion>();
    } catch (const json::exception& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return out;
}

/// Serves recorded completions; unknown requests are an error.
class ReplayClient : public LlmClient {
 public:
  explicit ReplayClient(std::map<std::string, Completion> records) : records_(std::move(records)) {}

  static ReplayClient from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot read cassette " + path);
    return ReplayClient(read_cassette(in));
  }

  Completion complete(const LlmRequest& request) override {
    validate(request);
    const auto fp = fingerprint(request);
    auto it = records_.find(fp);
    if (it == records_.end()) fail(ErrorKind::UnknownFingerprint, "no recording for " + fp);
    return it->second;
  }

  std::size_t size() const { return records_.size(); }

 private:
  std::map<std::string, Completion> records_;
};

/// Forwards to `inner` and appends every exchange to a cassette stream.
class RecordingClient : public LlmClient {
 public:
  RecordingClient(LlmClient& inner, std::ostream& out) : inner_(inner), out_(out) {}

  Completion complete(const LlmRequest& request) override {
    Completion c = inner_.complete(request);
    std::lock_guard lock(mu_);
    out_ << cassette_record(request, c).dump() << '\n';
    out_.flush();
    return c;
  }

 private:
  LlmClient& inner_;
  std::ostream& out_;
  std::mutex mu_;
};

/// Token bucket shared by all callers of one client.
class RateLimiter {
 public:
  explicit RateLimiter(double per_second, double burst = 1.0)
      : rate_(per_second), capacity_(std::max(1.0, burst)), tokens_(capacity_),
        last_(std::chrono::steady_clock::now()) {}

  void acquire() {
    if (rate_ <= 0.0) return;
    std::unique_lock lock(mu_);
    for (;;) {
      const auto now = std::chrono::steady_clock::now();
      tokens_ = std::min(capacity_, tokens_ + rate_ * std::chrono::duration<double>(now - last_).count());
      last_ = now;
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      const auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
      lock.unlock();
      std::this_thread::sleep_for(wait);
      lock.lock();
    }
  }

 private:
  std::mutex mu_;
  double rate_;
  double capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
};

}  // namespace irda::llm

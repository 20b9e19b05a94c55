#pragma once

// Append-only JSON-lines event logs, one file per session.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"

#include "irda/core/error.hpp"

namespace irda::harness {

inline constexpr const char* kSessionSchema = "irda-session/1";

struct SessionEvent {
  std::size_t seq = 0;
  std::string timestamp;
  std::string kind;  // created, user_message, llm_exchange, turn, user_message_failed
  nlohmann::json payload;
};

class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
  }

  const std::filesystem::path& root() const { return root_; }

  std::filesystem::path path_of(const std::string& id) const { return root_ / (id + ".jsonl"); }

  /// Session ids with a log on disk, sorted.
  std::vector<std::string> list() const {
    std::vector<std::string> ids;
    for (const auto& e : std::filesystem::directory_iterator(root_))
      if (e.is_regular_file() && e.path().extension() == ".jsonl") ids.push_back(e.path().stem().string());
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  bool exists(const std::string& id) const { return std::filesystem::exists(path_of(id)); }

  /// Appends and flushes one event; returns it with its sequence number.
  SessionEvent append(const std::string& id, const std::string& kind, nlohmann::json payload,
                      const std::string& timestamp) {
    std::lock_guard lock(mu_);
    auto& next = next_seq_[id];
    if (next == 0 && exists(id)) {
      drop_torn_tail(id);
      next = read(id).size();
    }
    SessionEvent e{next++, timestamp, kind, std::move(payload)};
    std::ofstream out(path_of(id), std::ios::app | std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot append to " + path_of(id).string());
    out << to_line(e) << '\n';
    out.flush();
    if (!out) fail(ErrorKind::Io, "write failed for " + path_of(id).string());
    return e;
  }

  /// All complete events of a log. A torn final line (crash mid-write) is
  /// ignored; corruption elsewhere is an error.
  std::vector<SessionEvent> read(const std::string& id) const {
    std::ifstream in(path_of(id), std::ios::binary);
    if (!in) fail(ErrorKind::NotFound, "no session " + id);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    std::vector<SessionEvent> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(lines[i]);
      } catch (const nlohmann::json::exception& e) {
        if (i + 1 == lines.size()) break;
        throw ParseError(i + 1, e.what());
      }
      if (j.value("schema", std::string{}) != kSessionSchema)
        throw ParseError(i + 1, std::string("expected schema ") + kSessionSchema);
      out.push_back({j.at("seq").get<std::size_t>(), j.at("timestamp").get<std::string>(),
                     j.at("kind").get<std::string>(), j.at("payload")});
    }
    return out;
  }

 private:
  /// Cuts an unterminated last line left by a crash mid-write.
  void drop_torn_tail(const std::string& id) const {
    const auto path = path_of(id);
    std::string data;
    {
      std::ifstream in(path, std::ios::binary);
      data.assign(std::istreambuf_iterator<char>(in), {});
    }
    if (data.empty() || data.back() == '\n') return;
    const auto keep = data.rfind('\n');
    std::filesystem::resize_file(path, keep == std::string::npos ? 0 : keep + 1);
  }

  static std::string to_line(const SessionEvent& e) {
    return nlohmann::json{{"schema", kSessionSchema},
                          {"seq", e.seq},
                          {"timestamp", e.timestamp},
                          {"kind", e.kind},
                          {"payload", e.payload}}
        .dump();
  }

  std::filesystem::path root_;
  std::mutex mu_;
  std::map<std::string, std::size_t> next_seq_;
};

}  // namespace irda::harness

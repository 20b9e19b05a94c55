#pragma once

// The elicitation dialogue: value specification, trajectory assessment,
// hypothesis and reflection with an optional clarification loop, then
// uncertainty reduction. Sessions are values; submit() returns a new one.

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "irda/core/error.hpp"
#include "irda/core/random.hpp"
#include "irda/encoding.hpp"
#include "irda/env.hpp"
#include "irda/llm/client.hpp"
#include "irda/reward.hpp"
#include "irda/sampling/diversity.hpp"
#include "irda/sampling/uncertainty.hpp"

namespace irda::dialogue {

// ---------------------------------------------------------------------------
// Answer words

struct ValueWords {
  std::string pos_word;
  std::string neg_word;
  std::string adverb;  // empty when the words came from an explicit pair
};

struct LexiconEntry {
  const char* adjective;
  const char* adverb;
  const char* antonym;
};

inline constexpr std::array<LexiconEntry, 14> kLexicon{{
    {"respectful", "respectfully", "disrespectful"},
    {"honest", "honestly", "dishonest"},
    {"fair", "fairly", "unfair"},
    {"helpful", "helpfully", "unhelpful"},
    {"kind", "kindly", "unkind"},
    {"cooperative", "cooperatively", "uncooperative"},
    {"polite", "politely", "impolite"},
    {"responsible", "responsibly", "irresponsible"},
    {"friendly", "in a friendly way", "unfriendly"},
    {"safe", "safely", "unsafe"},
    {"ethical", "ethically", "unethical"},
    {"considerate", "considerately", "inconsiderate"},
    {"generous", "generously", "selfish"},
    {"courteous", "courteously", "discourteous"},
}};

namespace detail {

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

/// Lower-cased words; apostrophes (including U+2019) are kept inside words.
inline std::vector<std::string> words(const std::string& text) {
  std::string norm;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text.compare(i, 3, "\xE2\x80\x99") == 0) {
      norm += '\'';
      i += 2;
    } else {
      norm += static_cast<char>(std::tolower(static_cast<unsigned char>(text[i])));
    }
  }
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    while (!cur.empty() && cur.back() == '\'') cur.pop_back();
    while (!cur.empty() && cur.front() == '\'') cur.erase(cur.begin());
    if (!cur.empty()) out.push_back(cur);
    cur.clear();
  };
  for (char c : norm) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '\'' || c == '-')
      cur += c;
    else
      flush();
  }
  flush();
  return out;
}

inline std::string trim(const std::string& s) { return reward::detail::trim(s); }

}  // namespace detail

/// Finds the answer words for a stated value. Accepts lexicon adjectives or
/// adverbs ("act respectfully") or an explicit "good/bad" pair.
inline std::optional<ValueWords> derive_value_words(const std::string& value_text) {
  static const std::regex pair_re(R"(([A-Za-z][A-Za-z-]*)\s*/\s*([A-Za-z][A-Za-z-]*))");
  std::smatch m;
  if (std::regex_search(value_text, m, pair_re)) {
    ValueWords w{detail::lower(m[1]), detail::lower(m[2]), ""};
    if (w.pos_word != w.neg_word) return w;
  }
  for (const auto& word : detail::words(value_text)) {
    for (const auto& e : kLexicon) {
      if (word == e.adjective || word == e.adverb) return ValueWords{e.adjective, e.antonym, e.adverb};
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Label parsing

struct ParsedLabel {
  int label = 0;
  std::string explanation;
};

namespace detail {

inline bool is_negator(const std::string& w) {
  static const std::set<std::string> neg{"not", "never", "no", "hardly", "isn't", "wasn't", "aren't",
                                         "weren't", "doesn't", "didn't", "don't", "nor", "neither"};
  return neg.count(w) > 0 || (w.size() > 3 && w.compare(w.size() - 3, 3, "n't") == 0);
}

/// Position of the first occurrence of `target` and whether one of the
/// three preceding words negates it.
inline std::optional<bool> find_word(const std::vector<std::string>& ws, const std::string& target) {
  // A leading "no," is an interjection, not a negation of what follows.
  const std::size_t first = !ws.empty() && (ws[0] == "no" || ws[0] == "nope") ? 1 : 0;
  for (std::size_t i = first; i < ws.size(); ++i) {
    if (ws[i] != target) continue;
    bool negated = false;
    for (std::size_t j = std::max(first, i >= 3 ? i - 3 : 0); j < i; ++j)
      if (is_negator(ws[j])) negated = true;
    return negated;
  }
  return std::nullopt;
}

}  // namespace detail

/// Reads a binary label from a free-text answer. An unnegated neg_word wins,
/// then pos_word (negated forms flip), then a leading yes/no.
inline ParsedLabel parse_user_label(const std::string& text, const std::string& pos_word,
                                    const std::string& neg_word) {
  const auto ws = detail::words(text);
  const std::string pos = detail::lower(pos_word), neg = detail::lower(neg_word);
  std::optional<int> label;
  if (auto n = detail::find_word(ws, neg))
    label = *n ? 1 : 0;
  else if (auto p = detail::find_word(ws, pos))
    label = *p ? 0 : 1;
  else if (!ws.empty() && (ws[0] == "yes" || ws[0] == "yeah" || ws[0] == "yep"))
    label = 1;
  else if (!ws.empty() && (ws[0] == "no" || ws[0] == "nope"))
    label = 0;
  if (!label) fail(ErrorKind::UnparsableLabel, "could not find '" + pos + "' or '" + neg + "' in the answer");

  static const std::regex lead(R"(^\s*(yes|yeah|yep|no|nope)\b[\s,.!:;-]*)", std::regex::icase);
  return {*label, detail::trim(std::regex_replace(text, lead, "", std::regex_constants::format_first_only))};
}

/// yes -> true, no -> false, anything else -> nullopt.
inline std::optional<bool> parse_yes_no(const std::string& text) {
  const auto ws = detail::words(text);
  if (ws.empty()) return std::nullopt;
  static const std::set<std::string> yes{"yes", "y", "yeah", "yep", "sure", "ok", "okay"};
  static const std::set<std::string> no{"no", "n", "nope", "nah"};
  if (yes.count(ws[0])) return true;
  if (no.count(ws[0])) return false;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Hypothesis generation

inline constexpr const char* kHypothesisSystem =
    "You help a user reflect on how they judge an agent's behaviour. You read the user's labelled "
    "examples and explanations and describe the features their decisions appear to depend on.";
inline constexpr const char* kAlternativesLead = "You could also consider:";

struct Hypothesis {
  std::string hypothesis;
  std::vector<std::string> alternative_features;

  friend bool operator==(const Hypothesis&, const Hypothesis&) = default;
};

inline llm::LlmRequest hypothesis_request(const reward::RewardModelContext& base,
                                          const std::vector<reward::FeedbackRecord>& records) {
  reward::RewardModelContext ctx = base;
  ctx.feedback = records;
  ctx.reflection.reset();
  ctx.task_description =
      "The user labelled each example above as " + ctx.pos_word + " or " + ctx.neg_word +
      " and explained why. Make a hypothesis about which features of the agent's behaviour the "
      "user bases these decisions on. Then offer alternative features the user could consider.";
  llm::LlmRequest req;
  req.system_text = kHypothesisSystem;
  req.user_text = reward::prompt_preamble(ctx);
  req.user_text += "## Response format\nWrite one short paragraph with your hypothesis. Then write the line \"";
  req.user_text += kAlternativesLead;
  req.user_text += "\" followed by a numbered list of 2 to 4 alternative features, one per line.\n";
  return req;
}

/// Splits a reply into the hypothesis paragraph and its numbered list.
inline std::optional<Hypothesis> parse_hypothesis(const std::string& text) {
  static const std::regex item_re(R"(^\s*\d+[.)]\s+(.*\S)\s*$)");
  std::vector<std::string> lines;
  std::size_t i = 0;
  while (i <= text.size()) {
    const std::size_t j = std::min(text.find('\n', i), text.size());
    lines.push_back(text.substr(i, j - i));
    i = j + 1;
  }
  Hypothesis h;
  std::vector<std::string> head;
  bool in_list = false;
  for (const auto& line : lines) {
    std::smatch m;
    if (std::regex_match(line, m, item_re)) {
      in_list = true;
      h.alternative_features.push_back(m[1]);
    } else if (!in_list) {
      head.push_back(line);
    } else if (!detail::trim(line).empty()) {
      break;  // trailing prose after the list is ignored
    }
  }
  while (!head.empty() && detail::trim(head.back()).empty()) head.pop_back();
  if (!head.empty() && detail::trim(head.back()).ends_with(":")) head.pop_back();
  std::string joined;
  for (const auto& l : head) joined += (joined.empty() ? "" : "\n") + l;
  h.hypothesis = detail::trim(joined);
  if (h.hypothesis.empty() || h.alternative_features.size() < 2 || h.alternative_features.size() > 4)
    return std::nullopt;
  return h;
}

inline Hypothesis generate_hypothesis(const reward::RewardModelContext& base,
                                      const std::vector<reward::FeedbackRecord>& records,
                                      llm::LlmClient& client) {
  if (records.empty()) fail(ErrorKind::StageIncomplete, "no feedback to form a hypothesis from");
  llm::LlmRequest req = hypothesis_request(base, records);
  for (int attempt = 0; attempt < 2; ++attempt) {
    if (attempt == 1)
      req.user_text += "\nYour previous reply could not be read. Follow the response format exactly.\n";
    if (auto h = parse_hypothesis(client.complete(req).text)) return *h;
  }
  fail(ErrorKind::HypothesisUnparsable, "reply had no numbered list of 2 to 4 features after one retry");
}

// ---------------------------------------------------------------------------
// Session

enum class Phase { AwaitValue, Stage1, AwaitReflection, ClarifyDecision, Clarify, Stage3, Done };

inline std::string to_string(Phase p) {
  switch (p) {
    case Phase::AwaitValue: return "AwaitValue";
    case Phase::Stage1: return "Stage1";
    case Phase::AwaitReflection: return "AwaitReflection";
    case Phase::ClarifyDecision: return "ClarifyDecision";
    case Phase::Clarify: return "Clarify";
    case Phase::Stage3: return "Stage3";
    case Phase::Done: return "Done";
  }
  return "?";
}

enum class Expects { free_text, yes_no, none };

inline std::string to_string(Expects e) {
  switch (e) {
    case Expects::free_text: return "free_text";
    case Expects::yes_no: return "yes_no";
    case Expects::none: return "none";
  }
  return "?";
}

struct SystemTurn {
  std::vector<std::string> messages;
  std::optional<std::string> attachment;
  Expects expects = Expects::free_text;

  friend bool operator==(const SystemTurn&, const SystemTurn&) = default;
};

struct Message {
  std::string actor;  // "system" or "user"
  std::string text;
  std::string timestamp;

  friend bool operator==(const Message&, const Message&) = default;
};

struct SessionConfig {
  std::size_t k = 4;
  double epsilon = sampling::kDefaultEpsilon;
  int max_clarify_passes = 1;
  /// 0 means unbounded.
  std::size_t max_uncertainty_rounds = 1;
  std::size_t uncertainty_subset = sampling::kDefaultUncertaintySubset;
  std::uint64_t seed = 0;

  friend bool operator==(const SessionConfig&, const SessionConfig&) = default;
};

inline constexpr int kMaxReprompts = 2;

struct DialogueSession {
  std::string session_id;
  SessionConfig config;
  const env::TrajectoryPool* pool = nullptr;

  Phase phase = Phase::AwaitValue;
  std::size_t index = 0;   // item within Stage1 / Clarify
  int clarify_pass = 0;    // passes completed or in progress
  std::size_t round = 0;   // uncertainty rounds answered
  int reprompts = 0;

  std::string value_text;
  std::vector<std::string> stage1_ids;
  std::vector<std::string> uncertainty_ids;  // remaining candidates
  std::optional<std::string> current;       // attachment awaiting an answer
  std::optional<Hypothesis> pending_hypothesis;
  std::vector<reward::ReflectionRecord> reflections;
  reward::RewardModelContext context;
  std::vector<Message> transcript;
  SystemTurn last_turn;

  bool expects_input() const { return phase != Phase::Done; }
};

namespace detail {

inline std::string item_text(const DialogueSession& s, const std::string& id) {
  return encoding::encode_ascii(s.pool->at(id)).text;
}

inline std::string stage_question(const DialogueSession& s) {
  const auto& c = s.context;
  if (auto w = derive_value_words(s.value_text); w && !w->adverb.empty() && w->pos_word == c.pos_word)
    return "Does the agent act " + w->adverb + "? Please explain your reasoning using 1-3 sentences.";
  return "Is the agent's behaviour " + c.pos_word + " or " + c.neg_word +
         "? Please explain your reasoning using 1-3 sentences.";
}

inline SystemTurn emit(DialogueSession& s, SystemTurn turn, const std::string& ts) {
  for (const auto& m : turn.messages) s.transcript.push_back({"system", m, ts});
  s.last_turn = turn;
  return turn;
}

inline SystemTurn show_item(DialogueSession& s, const std::string& id, const std::string& lead,
                            const std::string& ts) {
  s.current = id;
  return emit(s, {{lead, stage_question(s)}, id, Expects::free_text}, ts);
}

inline std::vector<reward::FeedbackRecord> latest_pass(const DialogueSession& s) {
  const auto stage = s.clarify_pass == 0 ? reward::Stage::stage1 : reward::Stage::clarification;
  std::vector<reward::FeedbackRecord> out;
  for (const auto& r : s.context.feedback)
    if (r.stage == stage) out.push_back(r);
  if (stage == reward::Stage::clarification && out.size() > s.stage1_ids.size())
    out.erase(out.begin(), out.end() - static_cast<std::ptrdiff_t>(s.stage1_ids.size()));
  return out;
}

inline SystemTurn show_hypothesis(DialogueSession& s, llm::LlmClient& llm, const std::string& ts) {
  const Hypothesis h = generate_hypothesis(s.context, latest_pass(s), llm);
  s.pending_hypothesis = h;
  s.phase = Phase::AwaitReflection;
  s.current.reset();
  std::string alts = std::string(kAlternativesLead);
  for (std::size_t i = 0; i < h.alternative_features.size(); ++i)
    alts += "\n" + std::to_string(i + 1) + ". " + h.alternative_features[i];
  return emit(s,
              {{h.hypothesis, alts,
                "Is this hypothesis correct? Please explain why or why not the other features "
                "should be considered."},
               std::nullopt,
               Expects::free_text},
              ts);
}

inline std::vector<sampling::Candidate> candidates(const DialogueSession& s) {
  std::vector<sampling::Candidate> out;
  for (const auto& id : s.uncertainty_ids) out.push_back({id, item_text(s, id)});
  return out;
}

inline SystemTurn finish(DialogueSession& s, const std::string& ts, const std::string& lead = {}) {
  s.phase = Phase::Done;
  s.current.reset();
  SystemTurn t{{"Thank you. Your feedback has been compiled into a reward model."}, std::nullopt, Expects::none};
  if (!lead.empty()) t.messages.insert(t.messages.begin(), lead);
  return emit(s, std::move(t), ts);
}

/// Decides whether another uncertainty round is needed and asks it.
inline SystemTurn enter_stage3(DialogueSession& s, llm::LlmClient& llm, const std::string& ts,
                               const std::string& notice = {}) {
  s.phase = Phase::Stage3;
  const auto cap = s.config.max_uncertainty_rounds;
  if (s.uncertainty_ids.empty() || (cap != 0 && s.round >= cap) || s.config.epsilon == 0.0)
    return finish(s, ts, notice);
  const auto cands = candidates(s);
  const auto pick = sampling::select_most_uncertain(s.context, cands, llm);
  if (pick.confidence.value >= s.config.epsilon) return finish(s, ts, notice);
  const std::string lead = "Here is a trajectory the reward model is unsure about.";
  return show_item(s, pick.id, notice.empty() ? lead : notice + " " + lead, ts);
}

inline void append_record(DialogueSession& s, const std::string& id, const ParsedLabel& p,
                          reward::Stage stage) {
  s.context.feedback.push_back({id, item_text(s, id), p.label, p.explanation, stage});
}

inline SystemTurn reprompt(DialogueSession& s, const std::string& msg, const std::string& ts) {
  if (s.reprompts >= kMaxReprompts) fail(ErrorKind::UnparsableLabel, msg);
  ++s.reprompts;
  const SystemTurn last = s.last_turn;
  return emit(s, {{msg}, last.attachment, last.expects}, ts);
}

}  // namespace detail

inline constexpr const char* kGreeting =
    "Hello. This system learns what a value means to you by showing you examples of an agent's "
    "behaviour and asking for your feedback. Start by describing the behaviour you want, for "
    "example: I would like the agent to act respectfully.";

/// Precomputes the trajectories to show and returns the greeting turn.
inline std::pair<DialogueSession, SystemTurn> start_session(const env::TrajectoryPool& pool,
                                                            const SessionConfig& config,
                                                            std::string session_id,
                                                            const std::string& timestamp) {
  if (config.k < 1) fail(ErrorKind::ConfigInvalid, "k must be >= 1");
  if (!(config.epsilon >= 0.0 && config.epsilon <= 1.0)) fail(ErrorKind::ConfigInvalid, "epsilon must lie in [0, 1]");
  if (config.max_clarify_passes < 0) fail(ErrorKind::ConfigInvalid, "max_clarify_passes must be >= 0");
  if (pool.size() < config.k + config.uncertainty_subset)
    fail(ErrorKind::TooFewTrajectories, "pool has " + std::to_string(pool.size()) + " trajectories, need " +
                                            std::to_string(config.k + config.uncertainty_subset));
  DialogueSession s;
  s.session_id = std::move(session_id);
  s.config = config;
  s.pool = &pool;
  s.stage1_ids = sampling::diversity_sample(pool, config.k, derive_seed(config.seed, "diversity")).ids;

  const std::set<std::string> picked(s.stage1_ids.begin(), s.stage1_ids.end());
  std::vector<std::string> rest;
  for (const auto& t : pool.trajectories)
    if (!picked.count(t.id)) rest.push_back(t.id);
  Rng rng(derive_seed(config.seed, "uncertainty-subset"));
  for (std::size_t i = 0; i < config.uncertainty_subset; ++i)
    std::swap(rest[i], rest[i + uniform_index(rng, rest.size() - i)]);
  s.uncertainty_ids.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(config.uncertainty_subset));
  std::sort(s.uncertainty_ids.begin(), s.uncertainty_ids.end());

  s.context = reward::orchard_context("", "pos", "neg");
  s.phase = Phase::AwaitValue;
  SystemTurn t = detail::emit(s, {{kGreeting}, std::nullopt, Expects::free_text}, timestamp);
  return {std::move(s), std::move(t)};
}

/// Advances the session by one user message. The input session is never
/// modified; on error nothing is committed.
inline std::pair<DialogueSession, SystemTurn> submit(const DialogueSession& in, const std::string& user_text,
                                                     const std::string& timestamp, llm::LlmClient& llm) {
  if (in.phase == Phase::Done) fail(ErrorKind::UnexpectedState, "session is finished");
  if (!in.pool) fail(ErrorKind::UnexpectedState, "session has no trajectory pool");
  DialogueSession s = in;
  s.transcript.push_back({"user", user_text, timestamp});
  const auto& ts = timestamp;
  SystemTurn turn;

  auto label_or_reprompt = [&](std::optional<ParsedLabel>& out) -> bool {
    try {
      out = parse_user_label(user_text, s.context.pos_word, s.context.neg_word);
      return true;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::UnparsableLabel) throw;
      turn = detail::reprompt(s, "Please say whether the agent's behaviour was " + s.context.pos_word + " or " +
                                     s.context.neg_word + ", and explain why.",
                              ts);
      return false;
    }
  };

  switch (s.phase) {
    case Phase::AwaitValue: {
      const auto words = derive_value_words(user_text);
      if (!words) {
        turn = detail::reprompt(s,
                                "I could not tell which word describes the behaviour. Please give a positive "
                                "and a negative word separated by a slash, for example: respectful/disrespectful.",
                                ts);
        break;
      }
      s.reprompts = 0;
      s.value_text = user_text;
      s.context = reward::orchard_context(words->pos_word, words->pos_word, words->neg_word);
      s.phase = Phase::Stage1;
      s.index = 0;
      turn = detail::show_item(s, s.stage1_ids[0], "Trajectory 1 of " + std::to_string(s.config.k) + ".", ts);
      break;
    }
    case Phase::Stage1:
    case Phase::Clarify: {
      std::optional<ParsedLabel> p;
      if (!label_or_reprompt(p)) break;
      s.reprompts = 0;
      const auto stage = s.phase == Phase::Stage1 ? reward::Stage::stage1 : reward::Stage::clarification;
      detail::append_record(s, s.stage1_ids[s.index], *p, stage);
      if (++s.index < s.stage1_ids.size()) {
        turn = detail::show_item(s, s.stage1_ids[s.index],
                                 "Trajectory " + std::to_string(s.index + 1) + " of " + std::to_string(s.config.k) + ".",
                                 ts);
      } else {
        turn = detail::show_hypothesis(s, llm, ts);
      }
      break;
    }
    case Phase::AwaitReflection: {
      const Hypothesis& h = *s.pending_hypothesis;
      s.reflections.push_back({h.hypothesis, h.alternative_features, detail::trim(user_text)});
      s.context.reflection = s.reflections.back();
      s.pending_hypothesis.reset();
      s.phase = Phase::ClarifyDecision;
      turn = detail::emit(s,
                          {{"Would you like to re-explain the " + std::to_string(s.config.k) +
                            " trajectories you saw with your new perspective? (yes/no)"},
                           std::nullopt,
                           Expects::yes_no},
                          ts);
      break;
    }
    case Phase::ClarifyDecision: {
      const auto yn = parse_yes_no(user_text);
      if (!yn) {
        turn = detail::reprompt(s, "Please answer yes or no.", ts);
        break;
      }
      s.reprompts = 0;
      if (*yn && s.clarify_pass < s.config.max_clarify_passes) {
        ++s.clarify_pass;
        s.phase = Phase::Clarify;
        s.index = 0;
        turn = detail::show_item(s, s.stage1_ids[0],
                                 "Let's look at the trajectories again. Trajectory 1 of " + std::to_string(s.config.k) + ".",
                                 ts);
      } else {
        std::string notice;
        if (*yn) notice = "The clarification loop has already been used the maximum number of times, so we will move on.";
        turn = detail::enter_stage3(s, llm, ts, notice);
      }
      break;
    }
    case Phase::Stage3: {
      std::optional<ParsedLabel> p;
      if (!label_or_reprompt(p)) break;
      s.reprompts = 0;
      const std::string id = *s.current;
      detail::append_record(s, id, *p, reward::Stage::uncertainty);
      s.uncertainty_ids.erase(std::find(s.uncertainty_ids.begin(), s.uncertainty_ids.end(), id));
      ++s.round;
      turn = detail::enter_stage3(s, llm, ts);
      break;
    }
    case Phase::Done:
      break;
  }
  return {std::move(s), std::move(turn)};
}

inline reward::RewardModelContext finalize(const DialogueSession& s) {
  if (s.phase != Phase::Done) fail(ErrorKind::StageIncomplete, "session is in phase " + to_string(s.phase));
  reward::RewardModelContext ctx = s.context;
  ctx.kind = reward::ContextKind::full;
  reward::validate(ctx);
  return ctx;
}

inline reward::RewardModelContext build_baseline_context(const DialogueSession& s) {
  std::size_t n = 0;
  for (const auto& r : s.context.feedback) n += r.stage == reward::Stage::stage1;
  if (n < s.stage1_ids.size() || s.stage1_ids.empty())
    fail(ErrorKind::StageIncomplete, "stage 1 is not complete");
  return reward::build_baseline_context(s.context);
}

// ---------------------------------------------------------------------------
// JSON view

using nlohmann::json;

inline void to_json(json& j, const SystemTurn& t) {
  j = json{{"messages", t.messages},
           {"attachment", t.attachment ? json(*t.attachment) : json(nullptr)},
           {"expects", to_string(t.expects)}};
}

inline void to_json(json& j, const Message& m) {
  j = json{{"actor", m.actor}, {"text", m.text}, {"timestamp", m.timestamp}};
}

inline void to_json(json& j, const SessionConfig& c) {
  j = json{{"k", c.k},
           {"epsilon", c.epsilon},
           {"max_clarify_passes", c.max_clarify_passes},
           {"max_uncertainty_rounds", c.max_uncertainty_rounds},
           {"uncertainty_subset", c.uncertainty_subset},
           {"seed", c.seed}};
}

inline void from_json(const json& j, SessionConfig& c) {
  SessionConfig d;
  c.k = j.value("k", d.k);
  c.epsilon = j.value("epsilon", d.epsilon);
  c.max_clarify_passes = j.value("max_clarify_passes", d.max_clarify_passes);
  c.max_uncertainty_rounds = j.value("max_uncertainty_rounds", d.max_uncertainty_rounds);
  c.uncertainty_subset = j.value("uncertainty_subset", d.uncertainty_subset);
  c.seed = j.value("seed", d.seed);
}

inline std::string stage_label(const DialogueSession& s) {
  switch (s.phase) {
    case Phase::Stage1: return "Stage 1 " + std::to_string(s.index + 1) + "/" + std::to_string(s.config.k);
    case Phase::Clarify: return "Clarify " + std::to_string(s.index + 1) + "/" + std::to_string(s.config.k);
    case Phase::Stage3: return "Uncertainty " + std::to_string(s.round + 1);
    case Phase::AwaitReflection:
    case Phase::ClarifyDecision: return "Reflection";
    default: return to_string(s.phase);
  }
}

inline json session_view(const DialogueSession& s) {
  return json{{"session_id", s.session_id},
              {"config", s.config},
              {"state", to_string(s.phase)},
              {"stage", stage_label(s)},
              {"index", s.index},
              {"clarify_pass", s.clarify_pass},
              {"round", s.round},
              {"value_text", s.value_text},
              {"pos_word", s.context.pos_word},
              {"neg_word", s.context.neg_word},
              {"stage1_ids", s.stage1_ids},
              {"uncertainty_ids", s.uncertainty_ids},
              {"records", s.context.feedback},
              {"reflections", s.reflections},
              {"transcript", s.transcript},
              {"turn", s.last_turn}};
}

}  // namespace irda::dialogue

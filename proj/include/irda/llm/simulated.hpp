#pragma once

// A deterministic stand-in for the language model that actually reads the
// prompts it gets. It parses the labelled ASCII examples, scores a small
// library of behaviour rules against them (plus a keyword prior over what
// the user wrote) and answers with the posterior as token probabilities.
// Used by the offline pipeline tests and by `--llm stub`.

#include <array>
#include <cmath>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "irda/dialogue.hpp"
#include "irda/encoding.hpp"
#include "irda/llm/client.hpp"
#include "irda/reward.hpp"

namespace irda::llm::sim {

using States = std::vector<encoding::PartialState>;

namespace detail {

inline bool in_home(env::Position p) { return env::quadrant_of(p, 3) == 0; }

/// Cells the main agent emptied of `kind` on entry, one entry per step.
inline std::vector<env::Position> main_pickups(const States& s, bool apples) {
  std::vector<env::Position> out;
  for (std::size_t t = 1; t < s.size(); ++t) {
    const auto p = s[t].main_agent;
    if (p == s[t - 1].main_agent) continue;
    const auto& before = apples ? s[t - 1].apples : s[t - 1].garbage;
    if (env::count_at(before, p) > 0) out.push_back(p);
  }
  return out;
}

}  // namespace detail

struct Rule {
  std::string_view name;
  std::string_view hypothesis_phrase;    // "... is whether the agent <phrase>."
  std::string_view alternative_phrase;   // list item
  std::array<std::string_view, 6> keywords;
  bool (*holds)(const States&);
};

inline bool stays_in_own_quadrant(const States& s) {
  for (const auto& st : s)
    if (!detail::in_home(st.main_agent)) return false;
  return true;
}
inline bool picks_garbage(const States& s) { return !detail::main_pickups(s, false).empty(); }
inline bool no_collect_in_others(const States& s) {
  for (const auto& p : detail::main_pickups(s, true))
    if (!detail::in_home(p)) return false;
  return true;
}
inline bool collects_apples(const States& s) { return !detail::main_pickups(s, true).empty(); }

inline const std::array<Rule, 4>& rules() {
  static const std::array<Rule, 4> r{{
      {"stays_in_own_quadrant", "stays in its own orchard", "Whether the agent stays in its own orchard",
       {"own orchard", "own quadrant", "stayed", "left its", "other orchard", "wander"},
       stays_in_own_quadrant},
      {"picks_garbage", "helps pick up garbage", "Whether the agent helps pick up garbage",
       {"garbage", "trash", "clean", "", "", ""},
       picks_garbage},
      {"no_collect_in_others", "avoids taking apples from other agents' orchards",
       "Whether the agent steals apples from other agents",
       {"steal", "stole", "took apples", "their apples", "others' apples", ""},
       no_collect_in_others},
      {"collects_apples", "picks apples", "Whether the agent picks any apples",
       {"picked apples", "harvest", "collects apples", "picks apples", "", ""},
       collects_apples},
  }};
  return r;
}

struct Example {
  States states;
  int label = 0;
  std::string explanation;
};

struct ParsedPrompt {
  std::string pos_word, neg_word;
  std::vector<Example> examples;
  std::string user_text;  // explanations and reflection, lower-cased
  std::optional<std::string> target;
};

namespace detail {

inline std::string between(const std::string& text, std::size_t from, std::string_view end_marker) {
  const auto end = text.find(end_marker, from);
  return text.substr(from, end == std::string::npos ? std::string::npos : end - from);
}

inline std::string line_after(const std::string& text, std::size_t from, std::string_view tag) {
  const auto at = text.find(tag, from);
  if (at == std::string::npos) return {};
  const auto start = at + tag.size();
  return text.substr(start, text.find('\n', start) - start);
}

}  // namespace detail

inline ParsedPrompt parse_prompt(const std::string& text) {
  ParsedPrompt p;
  static const std::regex answer_re("\"ANSWER: (\\S+)\" or \"ANSWER: (\\S+)\"");
  static const std::regex hyp_re("labelled each example above as (\\S+) or (\\S+) and");
  std::smatch m;
  if (std::regex_search(text, m, answer_re) || std::regex_search(text, m, hyp_re)) {
    p.pos_word = m[1];
    p.neg_word = m[2];
  }
  const std::string heading = reward::kExampleHeading;
  for (std::size_t at = text.find(heading); at != std::string::npos; at = text.find(heading, at + 1)) {
    const auto body = text.find('\n', at) + 1;
    const auto label_at = text.find("User label: ", body);
    if (label_at == std::string::npos) break;
    Example e;
    e.states = encoding::parse_ascii(text.substr(body, label_at - body));
    e.label = detail::line_after(text, label_at, "User label: ") == p.pos_word ? 1 : 0;
    e.explanation = detail::line_after(text, label_at, "User explanation: ");
    p.user_text += dialogue::detail::lower(e.explanation) + "\n";
    p.examples.push_back(std::move(e));
  }
  if (const auto r = text.find("User reflection: "); r != std::string::npos)
    p.user_text += dialogue::detail::lower(detail::line_after(text, r, "User reflection: ")) + "\n";
  const std::string item = std::string(reward::kItemHeading) + "\n";
  if (const auto t = text.find(item); t != std::string::npos)
    p.target = detail::between(text, t + item.size(), "\n## Reasoning");
  return p;
}

inline constexpr double kLabelNoise = 0.1;
inline constexpr double kKeywordBoost = 4.0;

/// Normalized weight of each rule given the labelled examples and what the
/// user wrote.
inline std::array<double, 4> posterior(const ParsedPrompt& p) {
  std::array<double, 4> w{};
  double total = 0.0;
  for (std::size_t r = 0; r < rules().size(); ++r) {
    const Rule& rule = rules()[r];
    double weight = 1.0;
    for (auto kw : rule.keywords)
      if (!kw.empty() && p.user_text.find(kw) != std::string::npos) {
        weight = kKeywordBoost;
        break;
      }
    for (const auto& e : p.examples)
      weight *= (rule.holds(e.states) ? 1 : 0) == e.label ? 1.0 - kLabelNoise : kLabelNoise;
    w[r] = weight;
    total += weight;
  }
  for (auto& x : w) x /= total;
  return w;
}

/// Probability mass of the rules that call `target` positive.
inline double positive_probability(const ParsedPrompt& p, const States& target) {
  const auto w = posterior(p);
  double pos = 0.0;
  for (std::size_t r = 0; r < rules().size(); ++r)
    if (rules()[r].holds(target)) pos += w[r];
  return pos;
}

inline Completion answer_with(double p_pos, const std::string& pos, const std::string& neg,
                              const std::string& reasoning) {
  const double pp = 0.98 * p_pos + 0.01;
  const double np = 0.98 * (1.0 - p_pos) + 0.01;
  return answer_completion(reasoning, pp >= np ? pos : neg, {{pos, pp}, {neg, np}});
}

/// Scenario prompts: prefer the action that harms fewer characters.
inline Completion answer_scenario(const std::string& target, const std::string& pos, const std::string& neg) {
  static const std::regex n_re(R"((?:run over a group of|run over|killing the) (\d+))");
  std::vector<int> counts;
  for (auto it = std::sregex_iterator(target.begin(), target.end(), n_re); it != std::sregex_iterator(); ++it)
    counts.push_back(std::stoi((*it)[1]));
  double p_stay = 0.5;
  if (counts.size() == 2 && counts[0] != counts[1]) p_stay = counts[0] < counts[1] ? 0.9 : 0.1;
  return answer_with(p_stay, pos, neg, "The user seems to prefer the outcome that harms fewer characters.");
}

inline Completion respond(const LlmRequest& req) {
  const ParsedPrompt p = parse_prompt(req.user_text);
  if (req.system_text == dialogue::kHypothesisSystem) {
    const auto w = posterior(p);
    std::size_t top = 0;
    for (std::size_t r = 1; r < w.size(); ++r)
      if (w[r] > w[top]) top = r;
    std::string text = "Based on your explanations, it seems as though a key factor in determining whether the "
                       "agent's behaviour is " +
                       p.pos_word + " or not is whether the agent " + std::string(rules()[top].hypothesis_phrase) +
                       ".\n" + dialogue::kAlternativesLead + "\n";
    int n = 0;
    for (std::size_t r = 0; r < rules().size() && n < 2; ++r)
      if (r != top) text += std::to_string(++n) + ". " + std::string(rules()[r].alternative_phrase) + "\n";
    return Completion{text, {}};
  }
  if (!p.target || p.pos_word.empty())
    fail(ErrorKind::BadRequest, "simulated model only answers reward and hypothesis prompts");
  if (p.target->find("self-driving car") != std::string::npos) return answer_scenario(*p.target, p.pos_word, p.neg_word);
  const double prob = positive_probability(p, encoding::parse_ascii(*p.target));
  return answer_with(prob, p.pos_word, p.neg_word,
                     "Comparing the trajectory with the labelled examples and the user's explanations.");
}

/// A StubClient whose fallback responder is the simulated model.
inline StubClient make_client() { return StubClient(respond); }

}  // namespace irda::llm::sim

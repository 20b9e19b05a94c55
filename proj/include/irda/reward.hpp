#pragma once

// In-context language-based reward model. Elicited feedback is compiled into
// a prompt with six fixed parts; the model's final "ANSWER: <word>" line and
// the token probabilities at that word give a binary reward and a confidence.

#include <algorithm>
#include <cctype>
#include <future>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "irda/core/error.hpp"
#include "irda/encoding.hpp"
#include "irda/env.hpp"
#include "irda/llm/client.hpp"
#include "irda/sampling/confidence.hpp"

namespace irda::reward {

inline constexpr const char* kContextSchema = "irda-context/1";

enum class Stage { stage1, clarification, uncertainty };

inline std::string to_string(Stage s) {
  switch (s) {
    case Stage::stage1: return "stage1";
    case Stage::clarification: return "clarification";
    case Stage::uncertainty: return "uncertainty";
  }
  return "?";
}

inline Stage parse_stage(const std::string& s) {
  if (s == "stage1") return Stage::stage1;
  if (s == "clarification") return Stage::clarification;
  if (s == "uncertainty") return Stage::uncertainty;
  fail(ErrorKind::ParseError, "unknown stage '" + s + "'");
}

struct FeedbackRecord {
  std::string trajectory_id;
  std::string ascii_text;
  int user_label = 0;
  std::string user_explanation;
  Stage stage = Stage::stage1;

  friend bool operator==(const FeedbackRecord&, const FeedbackRecord&) = default;
};

struct ReflectionRecord {
  std::string hypothesis;
  std::vector<std::string> alternative_features;
  std::string user_reflection;

  friend bool operator==(const ReflectionRecord&, const ReflectionRecord&) = default;
};

enum class ContextKind { full, baseline };

struct RewardModelContext {
  ContextKind kind = ContextKind::full;
  std::string value_name;
  std::string pos_word;
  std::string neg_word;
  std::string env_description;
  std::vector<FeedbackRecord> feedback;
  std::optional<ReflectionRecord> reflection;
  std::string task_description;
  std::string format_instructions;

  friend bool operator==(const RewardModelContext&, const RewardModelContext&) = default;
};

inline void validate(const RewardModelContext& ctx) {
  auto bad = [](const std::string& m) { fail(ErrorKind::ContextInvalid, m); };
  if (ctx.pos_word.empty() || ctx.neg_word.empty()) bad("answer words must be set");
  if (ctx.pos_word == ctx.neg_word) bad("answer words must differ");
  if (ctx.env_description.empty()) bad("missing environment description");
  if (ctx.task_description.empty() || ctx.format_instructions.empty()) bad("missing task or format text");
  for (const auto& r : ctx.feedback) {
    if (r.user_label != 0 && r.user_label != 1) bad("labels must be 0 or 1");
    if (r.ascii_text.empty()) bad("feedback record " + r.trajectory_id + " has no item text");
  }
  if (ctx.reflection && ctx.reflection->alternative_features.empty())
    bad("reflection needs at least one alternative feature");
  if (ctx.kind == ContextKind::baseline) {
    if (ctx.reflection) bad("baseline context cannot carry a reflection");
    for (const auto& r : ctx.feedback)
      if (r.stage != Stage::stage1) bad("baseline context may hold stage1 records only");
  }
}

// ---------------------------------------------------------------------------
// Context templates

inline std::string orchard_environment_description(const encoding::Legend& g = {}) {
  std::string s;
  s += "The environment is a 6x6 grid world split into four 3x3 quadrants (orchards). "
       "Each orchard is owned by one agent, and the main agent owns the upper-left orchard. "
       "Agents are rewarded for picking apples. An agent picks up every item on a cell it "
       "enters. Each trajectory is shown step by step as text, with the important actions of "
       "each step written above the grid.\n";
  s += "Legend:\n";
  s += std::string("  ") + g.main + " = the main agent whose behaviour is being judged\n";
  s += std::string("  ") + g.background + " = a background agent\n";
  s += std::string("  ") + g.apple + " = an apple\n";
  s += std::string("  ") + g.garbage + " = garbage\n";
  s += std::string("  ") + g.empty + " = an empty cell\n";
  s += "  | and - = orchard boundaries\n";
  s += "Positions are written as [x, y]: x is the column and y is the row, both counted from 0 "
       "at the upper-left corner.";
  return s;
}

inline std::string moral_machine_environment_description() {
  return "Each item describes a dilemma for a self-driving car whose brakes have failed. The car "
         "can either stay on course or swerve, and each choice harms a different group of "
         "characters.";
}

inline std::string default_task_description(const std::string& value, const std::string& item_noun) {
  return "Your goal is to predict whether the main agent's behaviour in the " + item_noun +
         " below is " + value + ", according to the user's own definition of " + value +
         " as expressed in the feedback above.";
}

inline std::string default_format_instructions(const std::string& pos, const std::string& neg) {
  return "End your response with a final line of the form \"ANSWER: " + pos + "\" or \"ANSWER: " +
         neg + "\". The final line must contain exactly one of these two words and nothing else.";
}

/// Context for the apple-farming world, before any feedback is added.
inline RewardModelContext orchard_context(const std::string& value, const std::string& pos,
                                          const std::string& neg) {
  RewardModelContext c;
  c.value_name = value;
  c.pos_word = pos;
  c.neg_word = neg;
  c.env_description = orchard_environment_description();
  c.task_description = default_task_description(pos, "trajectory");
  c.format_instructions = default_format_instructions(pos, neg);
  return c;
}

/// Context for Moral Machine items; the answer words are the car's actions.
inline RewardModelContext moral_machine_context() {
  RewardModelContext c;
  c.value_name = "the user's preferred decision";
  c.pos_word = "stay";
  c.neg_word = "swerve";
  c.env_description = moral_machine_environment_description();
  c.task_description =
      "Your goal is to predict which action the user would want the car to take in the scenario "
      "below, according to the user's own values as expressed in the feedback above.";
  c.format_instructions = default_format_instructions("stay", "swerve");
  return c;
}

// ---------------------------------------------------------------------------
// Prompt assembly

inline constexpr const char* kSystemText =
    "You are a reward model. You judge whether an agent's behaviour matches the values of one "
    "specific user, based only on the feedback that user has given.";
inline constexpr const char* kExampleHeading = "### Example ";
inline constexpr const char* kItemHeading = "### Item to evaluate";
inline constexpr const char* kHypothesisHeading = "### Feature hypothesis";
inline constexpr const char* kReasoningText =
    "Think step by step before answering. First describe what happens in the item, then compare "
    "it with the user's labelled examples and explanations, and only then decide.";

inline std::string label_word(const RewardModelContext& ctx, int label) {
  return label == 1 ? ctx.pos_word : ctx.neg_word;
}

/// Parts 1-3 of the prompt: environment, elicited feedback, task.
inline std::string prompt_preamble(const RewardModelContext& ctx) {
  std::string s;
  s += "## Environment\n" + ctx.env_description + "\n\n";
  s += "## Feedback from the user\n";
  if (ctx.feedback.empty()) s += "(no feedback yet)\n\n";
  for (std::size_t i = 0; i < ctx.feedback.size(); ++i) {
    const auto& r = ctx.feedback[i];
    s += kExampleHeading + std::to_string(i + 1) + "\n";
    s += r.ascii_text;
    if (r.ascii_text.back() != '\n') s += '\n';
    s += "User label: " + label_word(ctx, r.user_label) + "\n";
    s += "User explanation: " + r.user_explanation + "\n\n";
  }
  if (ctx.reflection) {
    s += std::string(kHypothesisHeading) + "\n" + ctx.reflection->hypothesis + "\n";
    s += "Alternative features suggested:\n";
    for (std::size_t i = 0; i < ctx.reflection->alternative_features.size(); ++i)
      s += std::to_string(i + 1) + ". " + ctx.reflection->alternative_features[i] + "\n";
    s += "User reflection: " + ctx.reflection->user_reflection + "\n\n";
  }
  s += "## Task\n" + ctx.task_description + "\n\n";
  return s;
}

inline llm::LlmRequest assemble_prompt(const RewardModelContext& ctx, const std::string& target_text) {
  validate(ctx);
  llm::LlmRequest req;
  req.system_text = kSystemText;
  req.user_text = prompt_preamble(ctx);
  req.user_text += std::string(kItemHeading) + "\n" + target_text;
  if (target_text.empty() || target_text.back() != '\n') req.user_text += '\n';
  req.user_text += "\n## Reasoning\n" + std::string(kReasoningText) + "\n\n";
  req.user_text += "## Response format\n" + ctx.format_instructions + "\n";
  return req;
}

// ---------------------------------------------------------------------------
// Classification

struct Classification {
  int label = 0;
  sampling::Confidence confidence;
  /// pos_prob == neg_prob; the label then defaults to 1.
  bool tie = false;
  std::string rationale;
  llm::Completion raw;
};

namespace detail {

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

struct AnswerLine {
  std::size_t line_start = 0;
  std::size_t word_offset = 0;
  std::string word;  // lower-cased
};

/// Finds the last non-empty line; it must read "ANSWER: <word>".
inline std::optional<AnswerLine> find_answer(const std::string& text) {
  std::size_t end = text.size();
  while (end > 0 && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  if (end == 0) return std::nullopt;
  const std::size_t start = text.rfind('\n', end - 1) == std::string::npos ? 0 : text.rfind('\n', end - 1) + 1;
  std::string_view line(text.data() + start, end - start);
  std::size_t i = 0;
  while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
  constexpr std::string_view tag = "ANSWER:";
  if (line.substr(i, tag.size()) != tag) return std::nullopt;
  i += tag.size();
  while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
  std::size_t j = line.size();
  while (j > i && std::ispunct(static_cast<unsigned char>(line[j - 1]))) --j;
  std::string word(line.substr(i, j - i));
  if (word.empty() || word.find_first_of(" \t") != std::string::npos) return std::nullopt;
  return AnswerLine{start, start + i, lower(word)};
}

/// Sums the reported probability of tokens that begin `word` but not `other`.
inline double side_probability(const std::map<std::string, double>& alts, const std::string& word,
                               const std::string& other) {
  double p = 0.0;
  for (const auto& [token, prob] : alts) {
    const std::string t = lower(trim(token));
    if (t.empty()) continue;
    const bool starts_word = word.compare(0, t.size(), t) == 0;
    const bool starts_other = other.compare(0, t.size(), t) == 0;
    if (starts_word && !starts_other) p += prob;
  }
  return std::min(p, 1.0);
}

}  // namespace detail

inline constexpr const char* kReformatInstruction =
    "\n\nYour previous reply did not end with a valid answer line. Reply again and make sure the "
    "final line is exactly \"ANSWER: <word>\" using one of the two allowed words.";

inline Classification classify_text(const RewardModelContext& ctx, const std::string& item_text,
                                    llm::LlmClient& client) {
  const std::string pos = detail::lower(ctx.pos_word);
  const std::string neg = detail::lower(ctx.neg_word);
  llm::LlmRequest req = assemble_prompt(ctx, item_text);

  llm::Completion c;
  std::optional<detail::AnswerLine> answer;
  for (int attempt = 0; attempt < 2; ++attempt) {
    if (attempt == 1) req.user_text += kReformatInstruction;
    c = client.complete(req);
    answer = detail::find_answer(c.text);
    if (answer && (answer->word == pos || answer->word == neg)) break;
    answer.reset();
  }
  if (!answer) fail(ErrorKind::MalformedAnswer, "no valid ANSWER line after one retry");
  if (c.positions.empty()) fail(ErrorKind::NoLogprobsAvailable, "completion has no token alternatives");

  const llm::TokenAlternatives* at = nullptr;
  for (const auto& p : c.positions) {
    if (p.offset <= answer->word_offset && answer->word_offset < p.offset + std::max<std::size_t>(p.token.size(), 1)) {
      at = &p;
      break;
    }
  }
  if (!at) fail(ErrorKind::NoLogprobsAvailable, "no token alternatives at the answer word");

  Classification out;
  const double pp = detail::side_probability(at->probs, pos, neg);
  const double np = detail::side_probability(at->probs, neg, pos);
  out.confidence = sampling::confidence_from_probs(pp, np);
  out.label = pp >= np ? 1 : 0;
  out.tie = pp == np;
  out.rationale = detail::trim(std::string_view(c.text).substr(0, answer->line_start));
  out.raw = std::move(c);
  return out;
}

inline Classification classify(const RewardModelContext& ctx, const env::Trajectory& traj,
                               llm::LlmClient& client) {
  return classify_text(ctx, encoding::encode_ascii(traj).text, client);
}

/// Context holding only first-pass stage-1 feedback, no reflection.
inline RewardModelContext build_baseline_context(const RewardModelContext& full) {
  RewardModelContext b = full;
  b.kind = ContextKind::baseline;
  b.reflection.reset();
  b.feedback.clear();
  for (const auto& r : full.feedback)
    if (r.stage == Stage::stage1) b.feedback.push_back(r);
  if (b.feedback.empty()) fail(ErrorKind::StageIncomplete, "no stage-1 feedback recorded");
  return b;
}

struct LabelItem {
  std::string id;
  std::string text;
};

struct LabelSetResult {
  std::map<std::string, Classification> labels;
  std::map<std::string, std::string> failures;  // id -> error message
};

/// Classifies every item; failures are collected instead of thrown.
/// With max_parallel > 1 items are classified concurrently in batches.
inline LabelSetResult label_set(const RewardModelContext& ctx, std::span<const LabelItem> items,
                                llm::LlmClient& client, std::size_t max_parallel = 1) {
  LabelSetResult out;
  std::vector<LabelItem> sorted(items.begin(), items.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  auto run = [&](const LabelItem& item) -> std::pair<std::optional<Classification>, std::string> {
    try {
      return {classify_text(ctx, item.text, client), {}};
    } catch (const std::exception& e) {
      return {std::nullopt, e.what()};
    }
  };
  const std::size_t width = std::max<std::size_t>(1, max_parallel);
  for (std::size_t i = 0; i < sorted.size(); i += width) {
    std::vector<std::future<std::pair<std::optional<Classification>, std::string>>> batch;
    const std::size_t end = std::min(sorted.size(), i + width);
    for (std::size_t j = i; j < end; ++j)
      batch.push_back(std::async(width == 1 ? std::launch::deferred : std::launch::async, run,
                                 std::cref(sorted[j])));
    for (std::size_t j = i; j < end; ++j) {
      auto [c, err] = batch[j - i].get();
      if (c)
        out.labels.emplace(sorted[j].id, std::move(*c));
      else
        out.failures.emplace(sorted[j].id, err);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Context export

using nlohmann::json;

inline void to_json(json& j, const FeedbackRecord& r) {
  j = json{{"trajectory_id", r.trajectory_id}, {"ascii_text", r.ascii_text},
           {"user_label", r.user_label},       {"user_explanation", r.user_explanation},
           {"stage", to_string(r.stage)}};
}
inline void from_json(const json& j, FeedbackRecord& r) {
  r.trajectory_id = j.at("trajectory_id").get<std::string>();
  r.ascii_text = j.at("ascii_text").get<std::string>();
  r.user_label = j.at("user_label").get<int>();
  r.user_explanation = j.at("user_explanation").get<std::string>();
  r.stage = parse_stage(j.at("stage").get<std::string>());
}
inline void to_json(json& j, const ReflectionRecord& r) {
  j = json{{"hypothesis", r.hypothesis},
           {"alternative_features", r.alternative_features},
           {"user_reflection", r.user_reflection}};
}
inline void from_json(const json& j, ReflectionRecord& r) {
  r.hypothesis = j.at("hypothesis").get<std::string>();
  r.alternative_features = j.at("alternative_features").get<std::vector<std::string>>();
  r.user_reflection = j.at("user_reflection").get<std::string>();
}

/// The exported "irda-context/1" document: structured records plus the
/// assembled prompt preamble.
inline json export_context(const RewardModelContext& ctx) {
  validate(ctx);
  return json{{"schema", kContextSchema},
              {"kind", ctx.kind == ContextKind::full ? "full" : "baseline"},
              {"value_name", ctx.value_name},
              {"pos_word", ctx.pos_word},
              {"neg_word", ctx.neg_word},
              {"env_description", ctx.env_description},
              {"task_description", ctx.task_description},
              {"format_instructions", ctx.format_instructions},
              {"feedback", ctx.feedback},
              {"reflection", ctx.reflection ? json(*ctx.reflection) : json(nullptr)},
              {"system_text", kSystemText},
              {"preamble", prompt_preamble(ctx)}};
}

inline RewardModelContext import_context(const json& j) {
  if (j.value("schema", std::string{}) != kContextSchema)
    fail(ErrorKind::ParseError, std::string("expected schema ") + kContextSchema);
  RewardModelContext c;
  c.kind = j.at("kind").get<std::string>() == "baseline" ? ContextKind::baseline : ContextKind::full;
  c.value_name = j.at("value_name").get<std::string>();
  c.pos_word = j.at("pos_word").get<std::string>();
  c.neg_word = j.at("neg_word").get<std::string>();
  c.env_description = j.at("env_description").get<std::string>();
  c.task_description = j.at("task_description").get<std::string>();
  c.format_instructions = j.at("format_instructions").get<std::string>();
  c.feedback = j.at("feedback").get<std::vector<FeedbackRecord>>();
  if (!j.at("reflection").is_null()) c.reflection = j.at("reflection").get<ReflectionRecord>();
  validate(c);
  return c;
}

}  // namespace irda::reward

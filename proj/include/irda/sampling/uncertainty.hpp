#pragma once

// Uncertainty sampling: classify candidates with the current reward model,
// query the user on the least confident one, fold the answer back in.

#include <algorithm>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "irda/core/error.hpp"
#include "irda/llm/client.hpp"
#include "irda/reward.hpp"
#include "irda/sampling/confidence.hpp"

namespace irda::sampling {

inline constexpr double kDefaultEpsilon = 0.8;
inline constexpr std::size_t kDefaultUncertaintySubset = 20;

struct Candidate {
  std::string id;
  std::string text;  // what the reward model reads (ASCII or scenario prose)
};

struct UncertainPick {
  std::string id;
  Confidence confidence;
  /// Smallest confidence over the subset equals confidence.value.
  std::vector<std::pair<std::string, Confidence>> all;  // sorted by id
};

/// Classifies every candidate and returns the least confident one.
/// Ties go to the smallest id. Classification errors are rethrown with the
/// offending id prepended.
inline UncertainPick select_most_uncertain(const reward::RewardModelContext& ctx,
                                           std::span<const Candidate> subset, llm::LlmClient& llm) {
  if (subset.empty()) fail(ErrorKind::TooFewPoints, "uncertainty subset is empty");
  std::vector<const Candidate*> sorted;
  for (const auto& c : subset) sorted.push_back(&c);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id < b->id; });

  UncertainPick pick;
  double best = std::numeric_limits<double>::infinity();
  for (const Candidate* c : sorted) {
    Confidence conf;
    try {
      conf = reward::classify_text(ctx, c->text, llm).confidence;
    } catch (const Error& e) {
      throw Error(e.kind(), c->id + ": " + e.detail());
    }
    pick.all.emplace_back(c->id, conf);
    if (conf.value < best) {
      best = conf.value;
      pick.id = c->id;
      pick.confidence = conf;
    }
  }
  return pick;
}

struct UserAnswer {
  int label = 0;
  std::string explanation;
};

using AnswerSource = std::function<UserAnswer(const Candidate&)>;
/// Called with the current context and remaining candidates before any
/// external call, so a caller can persist loop state.
using Checkpoint = std::function<void(const reward::RewardModelContext&, std::span<const Candidate>)>;

struct LoopResult {
  reward::RewardModelContext context;
  std::vector<Candidate> remaining;
  std::size_t rounds = 0;
  /// Minimum confidence seen at the last classification pass.
  double final_min_confidence = 0.0;
  bool threshold_met = false;
};

/// Repeats select -> ask -> append until every candidate is classified with
/// confidence >= epsilon, max_rounds is hit, or candidates run out.
/// max_rounds = 0 means unbounded.
inline LoopResult uncertainty_loop(reward::RewardModelContext ctx, std::vector<Candidate> candidates,
                                   double epsilon, std::size_t max_rounds, llm::LlmClient& llm,
                                   const AnswerSource& ask, const Checkpoint& checkpoint = {}) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) fail(ErrorKind::OutOfRange, "epsilon must lie in [0, 1]");
  LoopResult r;
  for (;;) {
    if (candidates.empty()) break;
    if (epsilon == 0.0) {  // guard can never be true; skip the classification pass
      r.threshold_met = true;
      break;
    }
    if (checkpoint) checkpoint(ctx, candidates);
    const UncertainPick pick = select_most_uncertain(ctx, candidates, llm);
    r.final_min_confidence = pick.confidence.value;
    if (pick.confidence.value >= epsilon) {
      r.threshold_met = true;
      break;
    }
    if (max_rounds != 0 && r.rounds >= max_rounds) break;

    auto it = std::find_if(candidates.begin(), candidates.end(),
                           [&](const Candidate& c) { return c.id == pick.id; });
    const Candidate chosen = *it;
    candidates.erase(it);
    if (checkpoint) checkpoint(ctx, candidates);
    const UserAnswer a = ask(chosen);
    ctx.feedback.push_back({chosen.id, chosen.text, a.label, a.explanation, reward::Stage::uncertainty});
    ++r.rounds;
  }
  r.context = std::move(ctx);
  r.remaining = std::move(candidates);
  return r;
}

}  // namespace irda::sampling

#pragma once

// Synthetic users who judge trajectories by a known rule, used to check the
// whole elicitation pipeline offline and to produce evaluation reports.

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "irda/core/error.hpp"
#include "irda/core/random.hpp"
#include "irda/dialogue.hpp"
#include "irda/encoding.hpp"
#include "irda/env.hpp"
#include "irda/llm/simulated.hpp"
#include "irda/metrics.hpp"
#include "irda/reward.hpp"
#include "irda/supervised.hpp"

namespace irda::harness {

inline llm::sim::States states_of(const env::Trajectory& t) {
  llm::sim::States s;
  s.reserve(t.states.size());
  for (const auto& st : t.states) s.push_back(encoding::partial_of(st));
  return s;
}

inline const llm::sim::Rule& find_rule(const std::string& name) {
  for (const auto& r : llm::sim::rules())
    if (r.name == name) return r;
  fail(ErrorKind::NotFound, "unknown rule " + name);
}

inline int rule_label(const llm::sim::Rule& rule, const env::Trajectory& t) { return rule.holds(states_of(t)) ? 1 : 0; }

/// Explanation templates per rule: {positive, negative}.
inline std::pair<std::string, std::string> rule_explanations(const std::string& rule) {
  if (rule == "stays_in_own_quadrant")
    return {"it stayed in its own orchard the whole time",
            "it left its own orchard and wandered into another agent's orchard"};
  if (rule == "picks_garbage")
    return {"it helped clean up by picking up garbage", "it never picked up any garbage"};
  if (rule == "no_collect_in_others")
    return {"it only took apples from its own orchard and did not steal",
            "it stole apples from another agent's orchard"};
  if (rule == "collects_apples") return {"it picked apples and did its job", "it never picked apples"};
  fail(ErrorKind::NotFound, "unknown rule " + rule);
}

/// Answers the dialogue as a user who holds `rule`.
struct SyntheticUser {
  std::string rule;
  std::string value_text = "I would like the agent to act respectfully.";
  bool clarify = false;

  std::string answer(const dialogue::DialogueSession& s) const {
    using dialogue::Phase;
    switch (s.phase) {
      case Phase::AwaitValue: return value_text;
      case Phase::Stage1:
      case Phase::Clarify:
      case Phase::Stage3: {
        const int y = rule_label(find_rule(rule), s.pool->at(*s.current));
        const auto [pos, neg] = rule_explanations(rule);
        return y ? "Yes, it was " + s.context.pos_word + " because " + pos + "."
                 : "No, it was " + s.context.neg_word + " because " + neg + ".";
      }
      case Phase::AwaitReflection:
        return "What matters to me is whether the agent " +
               std::string(find_rule(rule).hypothesis_phrase) + ". " +
               (rule == "stays_in_own_quadrant" ? "It should stay in its own orchard." : "");
      case Phase::ClarifyDecision: return clarify && s.clarify_pass == 0 ? "yes" : "no";
      case Phase::Done: break;
    }
    fail(ErrorKind::UnexpectedState, "session is finished");
  }
};

using AnswerFn = std::function<std::string(const dialogue::DialogueSession&)>;

/// Drives a session to Done. `max_turns` guards against a non-terminating
/// answer source.
inline dialogue::DialogueSession run_session(const env::TrajectoryPool& pool, const dialogue::SessionConfig& cfg,
                                             llm::LlmClient& llm, const AnswerFn& answer,
                                             std::size_t max_turns = 1000, const std::string& id = "scripted") {
  auto s = dialogue::start_session(pool, cfg, id, "0").first;
  std::size_t turns = 0;
  while (s.phase != dialogue::Phase::Done) {
    if (++turns > max_turns) fail(ErrorKind::UnexpectedState, "session did not finish");
    s = dialogue::submit(s, answer(s), std::to_string(turns), llm).first;
  }
  return s;
}

/// Up to `per_class` positive and negative trajectories by `rule`, drawn in
/// seeded random order from the pool minus `exclude`; sorted by id.
inline std::vector<const env::Trajectory*> stratified_holdout(const env::TrajectoryPool& pool,
                                                              const llm::sim::Rule& rule,
                                                              const std::set<std::string>& exclude,
                                                              std::size_t per_class, std::uint64_t seed) {
  std::vector<const env::Trajectory*> order;
  for (const auto& t : pool.trajectories)
    if (!exclude.count(t.id)) order.push_back(&t);
  Rng rng(derive_seed(seed, "holdout"));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  std::vector<const env::Trajectory*> out;
  std::size_t counts[2] = {0, 0};
  for (const auto* t : order) {
    const int y = rule_label(rule, *t);
    if (counts[y] < per_class) {
      ++counts[y];
      out.push_back(t);
    }
  }
  if (counts[0] < per_class || counts[1] < per_class)
    fail(ErrorKind::InsufficientSamples, "pool lacks enough examples of each class for rule " + std::string(rule.name));
  std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->id < b->id; });
  return out;
}

struct ContextScore {
  double balanced_accuracy = 0.0;
  std::vector<int> predictions;
  std::size_t failures = 0;
};

/// Labels trajectories with a context; failed items count as wrong.
inline ContextScore score_context(const reward::RewardModelContext& ctx,
                                  const std::vector<const env::Trajectory*>& items, const std::vector<int>& truth,
                                  llm::LlmClient& llm) {
  std::vector<reward::LabelItem> li;
  for (const auto* t : items) li.push_back({t->id, encoding::encode_ascii(*t).text});
  const auto res = reward::label_set(ctx, li, llm);
  ContextScore s;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto it = res.labels.find(items[i]->id);
    if (it == res.labels.end()) {
      ++s.failures;
      s.predictions.push_back(1 - truth[i]);
    } else {
      s.predictions.push_back(it->second.label);
    }
  }
  s.balanced_accuracy = metrics::balanced_accuracy(truth, s.predictions);
  return s;
}

struct ParticipantResult {
  std::string pid;
  std::string rule;
  std::vector<int> truth;
  ContextScore full, baseline;
  double mlp_individual = 0.0;
  double mlp_collective = 0.0;
  std::size_t records = 0;
};

struct BenchmarkConfig {
  std::vector<std::string> rules{"stays_in_own_quadrant", "no_collect_in_others", "picks_garbage",
                                 "collects_apples"};
  std::size_t pool_size = 400;
  std::size_t holdout_per_class = 20;
  std::size_t mlp_train = 30;
  dialogue::SessionConfig session;
  std::uint64_t seed = 0;
  std::size_t n_resamples = 10000;
};

struct BenchmarkReport {
  std::vector<ParticipantResult> participants;
  std::vector<metrics::ReportRow> rows;
};

/// One synthetic participant per rule. The held-out set is shared so that
/// agreement between participants can be measured.
inline BenchmarkReport run_benchmark(const BenchmarkConfig& cfg, llm::LlmClient& llm) {
  env::EnvConfig ec;
  const auto pool = env::generate_pool(ec, cfg.pool_size, cfg.seed);
  BenchmarkReport rep;

  // Items every participant has seen in dialogue are excluded from testing.
  std::map<std::string, dialogue::DialogueSession> sessions;
  std::set<std::string> used;
  for (const auto& rule : cfg.rules) {
    SyntheticUser user{rule};
    auto s = run_session(pool, cfg.session, llm, [&](const auto& ss) { return user.answer(ss); });
    for (const auto& r : s.context.feedback) used.insert(r.trajectory_id);
    sessions.emplace(rule, std::move(s));
  }

  std::vector<const env::Trajectory*> shared;
  std::set<std::string> taken = used;
  for (const auto& rule : cfg.rules) {
    for (const auto* t : stratified_holdout(pool, find_rule(rule), taken, cfg.holdout_per_class / 2,
                                            derive_seed(cfg.seed, rule))) {
      shared.push_back(t);
      taken.insert(t->id);
    }
  }
  std::sort(shared.begin(), shared.end(), [](auto* a, auto* b) { return a->id < b->id; });

  // MLP training data: the first `mlp_train` unused trajectories in id order.
  std::vector<const env::Trajectory*> train_items;
  for (const auto& t : pool.trajectories)
    if (!taken.count(t.id) && train_items.size() < cfg.mlp_train) train_items.push_back(&t);

  std::map<std::string, supervised::LabeledSet> train, test;
  std::size_t idx = 0;
  for (const auto& rule : cfg.rules) {
    const auto& r = find_rule(rule);
    ParticipantResult p;
    p.pid = "p" + std::to_string(++idx);
    p.rule = rule;
    for (const auto* t : shared) p.truth.push_back(rule_label(r, *t));
    const auto& s = sessions.at(rule);
    p.records = s.context.feedback.size();
    p.full = score_context(dialogue::finalize(s), shared, p.truth, llm);
    p.baseline = score_context(dialogue::build_baseline_context(s), shared, p.truth, llm);
    for (const auto* t : train_items) {
      train[p.pid].inputs.push_back(encoding::encode_numeric(*t).flat);
      train[p.pid].labels.push_back(rule_label(r, *t));
    }
    for (std::size_t i = 0; i < shared.size(); ++i) {
      test[p.pid].inputs.push_back(encoding::encode_numeric(*shared[i]).flat);
      test[p.pid].labels.push_back(p.truth[i]);
    }
    rep.participants.push_back(std::move(p));
  }

  supervised::MlpConfig mc;
  mc.seed = derive_seed(cfg.seed, "mlp");
  const auto ind = supervised::learning_curve(train, test, supervised::CurveMode::individual, {cfg.mlp_train}, mc,
                                              supervised::Metric::balanced_accuracy, cfg.n_resamples);
  const auto col = supervised::learning_curve(train, test, supervised::CurveMode::collective, {cfg.mlp_train}, mc,
                                              supervised::Metric::balanced_accuracy, cfg.n_resamples);
  for (auto& p : rep.participants) {
    p.mlp_individual = ind.front().per_participant.at(p.pid);
    p.mlp_collective = col.front().per_participant.at(p.pid);
  }

  auto add = [&](const std::string& group, auto&& get) {
    std::vector<double> xs;
    for (const auto& p : rep.participants) xs.push_back(get(p));
    const auto ci = metrics::bootstrap_ci(xs, cfg.n_resamples, 0.95, derive_seed(cfg.seed, group));
    rep.rows.push_back({"balanced_accuracy", group, ci.mean, ci.lo, ci.hi, std::nullopt});
  };
  add("irda", [](const ParticipantResult& p) { return p.full.balanced_accuracy; });
  add("baseline", [](const ParticipantResult& p) { return p.baseline.balanced_accuracy; });
  add("mlp_individual", [](const ParticipantResult& p) { return p.mlp_individual; });
  add("mlp_collective", [](const ParticipantResult& p) { return p.mlp_collective; });

  std::vector<std::pair<double, double>> pairs;
  for (const auto& p : rep.participants) pairs.emplace_back(p.full.balanced_accuracy, p.baseline.balanced_accuracy);
  try {
    const auto w = metrics::wilcoxon_signed_rank(pairs);
    rep.rows.push_back({"wilcoxon_irda_vs_baseline", "all", w.w, w.w_minus, w.w_plus, w.p});
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::AllZeroDifferences) throw;
    rep.rows.push_back({"wilcoxon_irda_vs_baseline", "all", 0.0, 0.0, 0.0, 1.0});
  }

  std::vector<std::vector<int>> matrix(shared.size());
  for (std::size_t i = 0; i < shared.size(); ++i)
    for (const auto& p : rep.participants) matrix[i].push_back(p.truth[i]);
  const auto k = metrics::fleiss_kappa(matrix);
  rep.rows.push_back({"fleiss_kappa", "participants", k.value, k.value, k.value, std::nullopt});

  std::map<std::string, std::set<std::string>> features;
  for (const auto& p : rep.participants) features[p.pid] = {p.rule};
  const auto j = metrics::jaccard_mean(features);
  rep.rows.push_back({"jaccard_mean", "participants", j.mean, j.mean, j.mean, std::nullopt});
  return rep;
}

/// Report from recorded labels: {"participants": {pid: {"truth": [...],
/// "<method>": [...]}}, "features": {pid: [...]}}. Every method present for
/// all participants gets a balanced-accuracy row; "irda" vs "baseline" also
/// gets a Wilcoxon row.
inline std::vector<metrics::ReportRow> report_from_labels(const nlohmann::json& j, std::size_t n_resamples,
                                                          std::uint64_t seed) {
  const auto& parts = j.at("participants");
  if (!parts.is_object() || parts.empty()) fail(ErrorKind::BadRequest, "labels file has no participants");
  std::map<std::string, std::map<std::string, double>> scores;  // method -> pid -> score
  std::map<std::string, std::vector<int>> truths;
  for (const auto& [pid, p] : parts.items()) {
    truths[pid] = p.at("truth").get<std::vector<int>>();
    for (const auto& [method, preds] : p.items())
      if (method != "truth") scores[method][pid] = metrics::balanced_accuracy(truths[pid], preds.get<std::vector<int>>());
  }
  std::vector<metrics::ReportRow> rows;
  for (const auto& [method, per] : scores) {
    if (per.size() != truths.size()) fail(ErrorKind::BadRequest, "method " + method + " is missing participants");
    std::vector<double> xs;
    for (const auto& [_, v] : per) xs.push_back(v);
    const auto ci = metrics::bootstrap_ci(xs, n_resamples, 0.95, derive_seed(seed, method));
    rows.push_back({"balanced_accuracy", method, ci.mean, ci.lo, ci.hi, std::nullopt});
  }
  if (scores.count("irda") && scores.count("baseline")) {
    std::vector<std::pair<double, double>> pairs;
    for (const auto& [pid, v] : scores["irda"]) pairs.emplace_back(v, scores["baseline"].at(pid));
    try {
      const auto w = metrics::wilcoxon_signed_rank(pairs);
      rows.push_back({"wilcoxon_irda_vs_baseline", "all", w.w, w.w_minus, w.w_plus, w.p});
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::AllZeroDifferences) throw;
      rows.push_back({"wilcoxon_irda_vs_baseline", "all", 0.0, 0.0, 0.0, 1.0});
    }
  }
  const std::size_t n_items = truths.begin()->second.size();
  std::vector<std::vector<int>> matrix(n_items);
  for (const auto& [pid, t] : truths) {
    if (t.size() != n_items) fail(ErrorKind::DimensionMismatch, "participants labelled different item counts");
    for (std::size_t i = 0; i < n_items; ++i) matrix[i].push_back(t[i]);
  }
  if (truths.size() >= 2) {
    const auto k = metrics::fleiss_kappa(matrix);
    rows.push_back({"fleiss_kappa", "participants", k.value, k.value, k.value, std::nullopt});
  }
  if (j.contains("features")) {
    std::map<std::string, std::set<std::string>> features;
    for (const auto& [pid, f] : j.at("features").items()) features[pid] = f.get<std::set<std::string>>();
    const auto jm = metrics::jaccard_mean(features);
    rows.push_back({"jaccard_mean", "participants", jm.mean, jm.mean, jm.mean, std::nullopt});
  }
  return rows;
}

}  // namespace irda::harness

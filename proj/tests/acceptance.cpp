// Acceptance suite: one PASS/FAIL line per headline criterion. Exit status is
// the number of failures (capped), so ctest sees any regression.

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "fixtures.hpp"
#include "irda/dialogue.hpp"
#include "irda/encoding.hpp"
#include "irda/harness/benchmark.hpp"
#include "irda/llm/client.hpp"
#include "irda/llm/simulated.hpp"
#include "irda/metrics.hpp"
#include "irda/moral_machine.hpp"
#include "irda/reward.hpp"
#include "irda/sampling/confidence.hpp"
#include "irda/sampling/diversity.hpp"
#include "irda/sampling/uncertainty.hpp"
#include "irda/supervised.hpp"

using namespace irda;
using nlohmann::json;

namespace {

// Tolerances and limits, all in one place.
constexpr double kMetricTol = 1e-12;
constexpr double kAdamTol = 1e-12;
constexpr double kGradRelTol = 1e-4;
constexpr double kStandardizeTol = 1e-9;
constexpr double kBlobAccuracy = 0.95;
constexpr double kSyntheticFloor = 0.9;
constexpr double kIndividualFloor = 0.6;
constexpr std::size_t kDiversityRuns = 100;
constexpr std::size_t kDiversityNeeded = 95;

struct Outcome {
  bool ok = true;
  std::string note;
};

/// Collects failed checks with a short reason.
class Check {
 public:
  void expect(bool cond, const std::string& what) {
    if (!cond && out_.ok) {
      out_.ok = false;
      out_.note = what;
    }
  }
  void info(const std::string& s) {
    if (out_.ok) out_.note = s;
  }
  Outcome result() const { return out_; }

 private:
  Outcome out_;
};

int failures = 0;

void criterion(const std::string& name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (o.ok && secs > limit_s) o = {false, "took longer than " + std::to_string(limit_s) + " s"};
  if (!o.ok) ++failures;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f s", secs);
  std::cout << (o.ok ? "PASS " : "FAIL ") << name << " (" << buf << ")" << (o.note.empty() ? "" : ": " + o.note)
            << std::endl;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome ascii_golden() {
  Check c;
  const auto golden = fixtures::read_file(fixtures::data_path("ascii_golden.txt"));
  c.expect(!golden.empty(), "golden file missing");
  c.expect(encoding::encode_ascii(fixtures::two_step()).text == golden, "fixture does not reproduce the figure");
  const auto pool = env::generate_pool(env::EnvConfig{}, 100, 2024);
  for (const auto& t : pool.trajectories) {
    const auto text = encoding::encode_ascii(t).text;
    const auto parsed = encoding::parse_ascii(text);
    bool same = parsed.size() == t.states.size();
    for (std::size_t i = 0; same && i < parsed.size(); ++i) {
      same = parsed[i] == encoding::partial_of(t.states[i]) &&
             encoding::render_grid(parsed[i], 6) == encoding::render_grid(encoding::partial_of(t.states[i]), 6);
    }
    c.expect(same, "round trip differs for " + t.id);
  }
  return c.result();
}

Outcome diversity_oracle() {
  Check c;
  std::string summary;
  for (std::size_t k : {2, 3, 4}) {
    std::size_t good = 0;
    for (std::size_t run = 0; run < kDiversityRuns; ++run) {
      const auto planted = fixtures::planted_pool(k, 10, 1000 * k + run);
      const auto s = sampling::diversity_sample(planted.pool, k, run);
      std::set<std::size_t> covered;
      for (const auto& id : s.ids) covered.insert(planted.truth.at(id));
      bool ok = covered.size() == k;

      // Independent check: centroids from the returned assignment, then a
      // full scan for the nearest member of each cluster.
      std::vector<std::vector<double>> pts;
      for (const auto& t : planted.pool.trajectories) pts.push_back(encoding::encode_numeric(t).flat);
      const std::size_t dim = pts.front().size();
      std::vector<std::vector<double>> centroid(k, std::vector<double>(dim, 0.0));
      std::vector<double> count(k, 0.0);
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto l = s.clusters.labels[i];
        count[l] += 1.0;
        for (std::size_t d = 0; d < dim; ++d) centroid[l][d] += pts[i][d];
      }
      for (std::size_t l = 0; l < k; ++l)
        for (auto& v : centroid[l]) v /= count[l];
      for (std::size_t l = 0; ok && l < k; ++l) {
        double best = INFINITY;
        std::string best_id;
        for (std::size_t i = 0; i < pts.size(); ++i) {
          if (s.clusters.labels[i] != l) continue;
          double d2 = 0.0;
          for (std::size_t d = 0; d < dim; ++d) d2 += (pts[i][d] - centroid[l][d]) * (pts[i][d] - centroid[l][d]);
          const auto& id = planted.pool.trajectories[i].id;
          if (d2 < best - 1e-9 || (std::fabs(d2 - best) <= 1e-9 && id < best_id)) {
            best = d2;
            best_id = id;
          }
        }
        ok = best_id == s.ids[l];
      }
      good += ok;
    }
    c.expect(good >= kDiversityNeeded, "k=" + std::to_string(k) + " recovered in " + std::to_string(good) + "/100");
    summary += "k=" + std::to_string(k) + ":" + std::to_string(good) + "/100 ";
  }
  c.info(summary);
  return c.result();
}

/// Stub whose confidence in item i grows with the number of examples in the
/// prompt: p(pos) = min(0.995, 0.5 + 0.5 * (start_i + step * extra)).
llm::StubClient rising_stub(std::size_t base_examples) {
  return llm::StubClient([base_examples](const llm::LlmRequest& r) {
    std::size_t examples = 0;
    for (auto at = r.user_text.find(reward::kExampleHeading); at != std::string::npos;
         at = r.user_text.find(reward::kExampleHeading, at + 1))
      ++examples;
    const auto item = r.user_text.find("ITEM ", r.user_text.find(reward::kItemHeading));
    const int i = std::stoi(r.user_text.substr(item + 5, 2));
    const double extra = static_cast<double>(examples - base_examples);
    const double conf = std::min(0.99, 0.05 * i + 0.3 * extra);
    const double pp = 0.5 + conf / 2.0;
    return llm::answer_completion("", "respectful", {{"respectful", pp}, {"disrespectful", 1.0 - pp}});
  });
}

Outcome uncertainty_mechanics() {
  Check c;
  c.expect(sampling::confidence_from_probs(0.99, 0.01).value == 0.98, "confidence(0.99, 0.01) != 0.98");
  auto ctx = reward::orchard_context("respectfully", "respectful", "disrespectful");
  for (int i = 0; i < 4; ++i)
    ctx.feedback.push_back({"seed" + std::to_string(i), "example", i % 2, "because", reward::Stage::stage1});
  std::vector<sampling::Candidate> cands;
  for (int i = 0; i < 8; ++i) cands.push_back({"c" + std::to_string(i), "ITEM " + std::to_string(10 + i)});
  auto ask = [](const sampling::Candidate&) { return sampling::UserAnswer{1, "it was fine"}; };
  const double eps = 0.8;

  // Confidence of item i after r answers: 0.05 * (10 + i) + 0.3 r; the
  // weakest item (0.5) needs one answer to reach 0.8.
  for (std::size_t cap : {1, 2, 3, 0}) {
    auto stub = rising_stub(4);
    const auto r = sampling::uncertainty_loop(ctx, cands, eps, cap, stub, ask);
    const std::size_t bound = cap == 0 ? cands.size() : std::min(cap, cands.size());
    c.expect(r.rounds <= bound, "rounds exceed min(max_rounds, subset)");
    c.expect(r.rounds + r.remaining.size() == cands.size(), "candidate bookkeeping is off");
    if (r.threshold_met) {
      auto check = rising_stub(4);
      for (const auto& cand : r.remaining) {
        const auto conf = reward::classify_text(r.context, cand.text, check).confidence.value;
        c.expect(conf >= eps, "a remaining candidate is below epsilon");
      }
    }
    if (cap != 1) c.expect(r.threshold_met, "rising stub did not reach epsilon");
  }
  return c.result();
}

Outcome synthetic_user() {
  Check c;
  const auto pool = env::generate_pool(env::EnvConfig{}, 300, 11);
  auto llm = llm::sim::make_client();
  harness::SyntheticUser user{"stays_in_own_quadrant"};
  const auto s = harness::run_session(pool, dialogue::SessionConfig{}, llm,
                                      [&](const dialogue::DialogueSession& ss) { return user.answer(ss); });
  std::set<std::string> used;
  for (const auto& r : s.context.feedback) used.insert(r.trajectory_id);
  for (const auto& id : s.stage1_ids) used.insert(id);
  const auto& rule = harness::find_rule(user.rule);
  const auto held = harness::stratified_holdout(pool, rule, used, 20, 5);
  std::vector<int> truth;
  for (const auto* t : held) truth.push_back(harness::rule_label(rule, *t));
  c.expect(held.size() == 40, "held-out set is not 40 items");
  const auto full = harness::score_context(dialogue::finalize(s), held, truth, llm);
  const auto base = harness::score_context(dialogue::build_baseline_context(s), held, truth, llm);
  c.expect(full.balanced_accuracy >= base.balanced_accuracy, "full context scored below the baseline");
  c.expect(full.balanced_accuracy >= kSyntheticFloor, "full context below 0.9");
  c.info("full=" + fmt(full.balanced_accuracy) + " baseline=" + fmt(base.balanced_accuracy));
  return c.result();
}

// Independent metric implementations.
double kappa_oracle(const std::vector<std::vector<int>>& m, int categories) {
  const double N = static_cast<double>(m.size());
  const double n = static_cast<double>(m.front().size());
  std::vector<double> pj(static_cast<std::size_t>(categories), 0.0);
  double pbar = 0.0;
  for (const auto& row : m) {
    std::vector<double> nij(static_cast<std::size_t>(categories), 0.0);
    for (int v : row) nij[static_cast<std::size_t>(v)] += 1.0;
    double sq = 0.0;
    for (std::size_t j = 0; j < nij.size(); ++j) {
      sq += nij[j] * nij[j];
      pj[j] += nij[j] / (N * n);
    }
    pbar += (sq - n) / (n * (n - 1.0)) / N;
  }
  double pe = 0.0;
  for (double p : pj) pe += p * p;
  return (pbar - pe) / (1.0 - pe);
}

/// Two-sided exact p by enumerating every sign assignment.
double wilcoxon_enumerate(const std::vector<std::pair<double, double>>& pairs) {
  std::vector<double> d;
  for (auto [a, b] : pairs)
    if (a - b != 0.0) d.push_back(a - b);
  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return std::fabs(d[x]) < std::fabs(d[y]); });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::fabs(d[order[j + 1]]) == std::fabs(d[order[i]])) ++j;
    for (std::size_t q = i; q <= j; ++q) rank[order[q]] = (static_cast<double>(i + j) + 2.0) / 2.0;
    i = j + 1;
  }
  double wplus = 0.0, total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += rank[i];
    if (d[i] > 0) wplus += rank[i];
  }
  const double w = std::min(wplus, total - wplus);
  std::size_t hits = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1) s += rank[i];
    if (s <= w + 1e-9) ++hits;
  }
  return std::min(1.0, 2.0 * static_cast<double>(hits) / std::pow(2.0, static_cast<double>(n)));
}

Outcome metrics_oracles() {
  Check c;
  const std::vector<std::vector<int>> km{{1, 1, 1}, {0, 0, 0}, {1, 1, 0}, {0, 0, 1}};
  c.expect(std::fabs(metrics::fleiss_kappa(km).value - 1.0 / 3.0) <= kMetricTol, "kappa hand value");
  Rng rng(99);
  for (int f = 0; f < 50; ++f) {
    std::vector<std::vector<int>> m(5 + uniform_index(rng, 20), std::vector<int>(2 + uniform_index(rng, 5)));
    for (auto& row : m)
      for (auto& v : row) v = uniform_unit(rng) < 0.4 ? 1 : 0;
    const auto k = metrics::fleiss_kappa(m);
    if (!k.degenerate) c.expect(std::fabs(k.value - kappa_oracle(m, 2)) <= kMetricTol, "kappa vs oracle");
  }

  std::map<std::string, std::set<std::string>> feats{{"a", {"x", "y"}}, {"b", {"y", "z"}}, {"c", {"x", "y", "z"}}};
  c.expect(std::fabs(metrics::jaccard_mean(feats).mean - 5.0 / 9.0) <= kMetricTol, "jaccard hand value");

  const std::vector<int> truth{1, 1, 1, 0, 0}, pred{1, 0, 1, 0, 1};
  c.expect(std::fabs(metrics::balanced_accuracy(truth, pred) - 7.0 / 12.0) <= kMetricTol, "balanced accuracy");

  std::size_t compared = 0;
  for (int f = 0; f < 300; ++f) {
    const std::size_t n = 1 + uniform_index(rng, 12);
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse values so ties and zero differences show up.
      const double a = static_cast<double>(uniform_index(rng, 7));
      const double b = static_cast<double>(uniform_index(rng, 7));
      pairs.emplace_back(a, b);
    }
    try {
      const auto w = metrics::wilcoxon_signed_rank(pairs);
      c.expect(std::fabs(w.p - wilcoxon_enumerate(pairs)) <= kMetricTol, "wilcoxon exact p vs enumeration");
      ++compared;
    } catch (const Error& e) {
      c.expect(e.kind() == ErrorKind::AllZeroDifferences, "unexpected wilcoxon error");
    }
  }
  c.expect(compared > 250, "too few wilcoxon fixtures compared");

  for (int f = 0; f < 5; ++f) {
    std::vector<double> xs(30);
    for (auto& x : xs) x = standard_normal(rng);
    const auto a = metrics::bootstrap_ci(xs, 10000, 0.95, 7 + f);
    const auto b = metrics::bootstrap_ci(xs, 10000, 0.95, 7 + f);
    c.expect(a.lo == b.lo && a.hi == b.hi && a.mean == b.mean, "bootstrap not seed-deterministic");
    c.expect(a.lo <= a.mean && a.mean <= a.hi, "bootstrap interval misses the sample mean");
  }
  return c.result();
}

Outcome mlp_contract() {
  Check c;
  // Adam against the textbook update.
  {
    std::vector<double> p{0.5, -1.0, 2.0}, ref = p;
    const std::vector<std::vector<double>> grads{{0.1, -0.2, 0.3}, {-0.05, 0.4, 0.0}, {1.5, -0.1, 0.2}};
    supervised::AdamOptimizer adam(3, 1e-3);
    std::vector<double> m(3, 0.0), v(3, 0.0);
    for (std::size_t t = 1; t <= grads.size(); ++t) {
      adam.step(p, grads[t - 1]);
      for (std::size_t i = 0; i < 3; ++i) {
        const double g = grads[t - 1][i];
        m[i] = 0.9 * m[i] + 0.1 * g;
        v[i] = 0.999 * v[i] + 0.001 * g * g;
        const double mh = m[i] / (1.0 - std::pow(0.9, static_cast<double>(t)));
        const double vh = v[i] / (1.0 - std::pow(0.999, static_cast<double>(t)));
        ref[i] -= 1e-3 * mh / (std::sqrt(vh) + 1e-8);
        c.expect(std::fabs(p[i] - ref[i]) <= kAdamTol, "adam differs from the textbook update");
      }
    }
  }
  // Analytic gradient against central differences.
  {
    Rng rng(3);
    supervised::LabeledSet d;
    for (int i = 0; i < 12; ++i) {
      d.inputs.push_back({standard_normal(rng), standard_normal(rng), standard_normal(rng)});
      d.labels.push_back(i % 2);
    }
    supervised::MlpConfig cfg;
    cfg.input_dim = 3;
    cfg.hidden_dim = 5;
    cfg.seed = 4;
    auto m = supervised::init_mlp(cfg);
    auto params = supervised::flatten(m);
    for (std::size_t i = 0; i < params.size(); ++i) params[i] += 0.05 * standard_normal(rng);  // move biases off zero
    supervised::unflatten(m, params);
    const auto grad = supervised::loss_and_gradient(m, d).second;
    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto plus = params, minus = params;
      plus[i] += h;
      minus[i] -= h;
      auto mp = m, mm_ = m;
      supervised::unflatten(mp, plus);
      supervised::unflatten(mm_, minus);
      const double num =
          (supervised::loss_and_gradient(mp, d).first - supervised::loss_and_gradient(mm_, d).first) / (2 * h);
      const double rel = std::fabs(num - grad[i]) / std::max(1e-8, std::fabs(num) + std::fabs(grad[i]));
      worst = std::max(worst, rel);
    }
    c.expect(worst <= kGradRelTol, "gradient check failed, worst relative error " + std::to_string(worst));
  }
  // Separable blobs with the default configuration.
  {
    Rng rng(8);
    supervised::LabeledSet d;
    for (int i = 0; i < 200; ++i) {
      const int y = i % 2;
      const double cx = y ? 2.0 : -2.0;
      d.inputs.push_back({cx + 0.5 * standard_normal(rng), cx + 0.5 * standard_normal(rng)});
      d.labels.push_back(y);
    }
    supervised::MlpConfig cfg;
    c.expect(cfg.hidden_dim == 32 && cfg.learning_rate == 1e-3, "defaults are not hidden 32, lr 0.001");
    cfg.seed = 1;
    const auto r = supervised::train_mlp(d, cfg);
    const double acc = metrics::accuracy(d.labels, supervised::predict_all(r.model, d.inputs));
    c.expect(acc >= kBlobAccuracy, "blob training accuracy " + fmt(acc));
    c.info("blob accuracy " + fmt(acc));
  }
  return c.result();
}

Outcome individual_vs_collective() {
  Check c;
  const auto data = fixtures::contradiction_data(60, 20, 17);
  supervised::MlpConfig cfg;
  cfg.seed = 5;
  const auto ind = supervised::learning_curve(data.train, data.test, supervised::CurveMode::individual, {60}, cfg);
  const auto col = supervised::learning_curve(data.train, data.test, supervised::CurveMode::collective, {60}, cfg);
  for (const auto& [pid, v] : ind.front().per_participant)
    c.expect(v > kIndividualFloor, "individual model " + pid + " scored " + fmt(v));
  const auto& p = col.front();
  c.expect(p.ci_lo <= 0.5 && 0.5 <= p.ci_hi, "0.5 outside the collective CI");
  c.info("individual mean " + fmt(ind.front().mean) + ", collective " + fmt(p.mean) + " CI [" + fmt(p.ci_lo) + ", " +
         fmt(p.ci_hi) + "]");
  return c.result();
}

Outcome moral_machine() {
  Check c;
  const auto scenarios = mm::generate_scenarios(1000, 21);
  std::vector<mm::ScenarioVector> vs;
  for (const auto& s : scenarios) {
    auto swapped = s;
    std::swap(swapped.stay, swapped.swerve);
    const auto a = mm::vectorize(s), b = mm::vectorize(swapped);
    bool anti = true;
    for (std::size_t i = 0; i < mm::kVectorDim; ++i) anti = anti && a[i] == -b[i];
    c.expect(anti, "vectorize is not antisymmetric for " + s.id);
    vs.push_back(a);
  }
  c.expect(mm::render_text(fixtures::doctors_scenario()) == fixtures::read_file(fixtures::data_path("mm_golden.txt")),
           "render_text differs from the golden text");
  const auto st = mm::standardize(mm::to_rows(vs));
  for (std::size_t d = 0; d < mm::kVectorDim; ++d) {
    double sum = 0.0, ss = 0.0;
    for (const auto& v : st.vectors) sum += v[d];
    const double mean = sum / static_cast<double>(st.vectors.size());
    for (const auto& v : st.vectors) ss += (v[d] - mean) * (v[d] - mean);
    const double sd = std::sqrt(ss / static_cast<double>(st.vectors.size()));
    c.expect(std::fabs(mean) <= kStandardizeTol, "standardized mean off in dim " + std::to_string(d));
    if (st.std[d] > 1e-12) c.expect(std::fabs(sd - 1.0) <= kStandardizeTol, "standardized std off in dim " + std::to_string(d));
  }
  return c.result();
}

// ---------------------------------------------------------------------------
// Crash recovery against the real binary.

struct Child {
  pid_t pid = -1;
  int port = 0;
};

Child spawn_server(const std::string& store) {
  int fds[2];
  if (pipe(fds) != 0) throw std::runtime_error("pipe failed");
  const pid_t pid = fork();
  if (pid < 0) throw std::runtime_error("fork failed");
  if (pid == 0) {
    dup2(fds[1], STDOUT_FILENO);
    close(fds[0]);
    close(fds[1]);
    execl(IRDA_BIN, IRDA_BIN, "serve", "--port", "0", "--store", store.c_str(), "--llm", "stub", "--seed", "3",
          static_cast<char*>(nullptr));
    _exit(127);
  }
  close(fds[1]);
  std::string line;
  char ch;
  while (read(fds[0], &ch, 1) == 1 && ch != '\n') line += ch;
  close(fds[0]);
  const auto colon = line.rfind(':');
  if (line.rfind("listening on", 0) != 0 || colon == std::string::npos)
    throw std::runtime_error("server did not start: '" + line + "'");
  return {pid, std::stoi(line.substr(colon + 1))};
}

void kill_hard(const Child& c) {
  kill(c.pid, SIGKILL);
  waitpid(c.pid, nullptr, 0);
}

Outcome crash_recovery() {
  Check c;
  const auto store = std::filesystem::temp_directory_path() / ("irda-accept-" + std::to_string(getpid()));
  std::filesystem::remove_all(store);
  auto first = spawn_server(store.string());
  std::string before, sid;
  {
    httplib::Client cli("127.0.0.1", first.port);
    auto created = cli.Post("/sessions", "{}", "application/json");
    c.expect(created && created->status == 200, "create failed");
    sid = json::parse(created->body).at("session_id").get<std::string>();
    const char* answers[] = {"I want the agent to act respectfully.", "Yes, it was respectful because it stayed home.",
                             "No, it was disrespectful because it left its own orchard."};
    int seq = 0;
    for (const char* a : answers) {
      auto r = cli.Post(("/sessions/" + sid + "/messages").c_str(), json{{"seq", ++seq}, {"text", a}}.dump(),
                        "application/json");
      c.expect(r && r->status == 200, "message failed");
    }
    before = cli.Get(("/sessions/" + sid).c_str())->body;
  }
  kill_hard(first);
  auto second = spawn_server(store.string());
  {
    httplib::Client cli("127.0.0.1", second.port);
    const auto after = cli.Get(("/sessions/" + sid).c_str());
    c.expect(after && after->body == before, "session state differs after restart");
    // A retried seq returns the stored reply; the next seq moves on.
    auto again = cli.Post(("/sessions/" + sid + "/messages").c_str(),
                          json{{"seq", 3}, {"text", "ignored"}}.dump(), "application/json");
    c.expect(again && again->status == 200, "retried seq rejected");
    c.expect(cli.Get(("/sessions/" + sid).c_str())->body == before, "retried seq changed the session");
    auto next = cli.Post(("/sessions/" + sid + "/messages").c_str(),
                         json{{"seq", 4}, {"text", "Yes, it was respectful because it stayed in its orchard."}}.dump(),
                         "application/json");
    c.expect(next && next->status == 200, "session cannot continue after restart");
  }
  kill_hard(second);
  std::filesystem::remove_all(store);
  return c.result();
}

}  // namespace

int main() {
  criterion("ascii_golden_and_round_trip", 5, ascii_golden);
  criterion("diversity_sampling_oracle", 30, diversity_oracle);
  criterion("uncertainty_mechanics", 5, uncertainty_mechanics);
  criterion("end_to_end_synthetic_user", 60, synthetic_user);
  criterion("metrics_oracles", 60, metrics_oracles);
  criterion("mlp_contract", 60, mlp_contract);
  criterion("individual_vs_collective", 120, individual_vs_collective);
  criterion("moral_machine", 60, moral_machine);
  criterion("crash_recovery", 60, crash_recovery);
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures > 0 ? 1 : 0;
}

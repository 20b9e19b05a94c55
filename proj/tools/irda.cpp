// irda: command-line front end and HTTP service.

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "irda/dialogue.hpp"
#include "irda/encoding.hpp"
#include "irda/env.hpp"
#include "irda/harness/benchmark.hpp"
#include "irda/harness/http_server.hpp"
#include "irda/harness/service.hpp"
#include "irda/llm/client.hpp"
#include "irda/llm/http_client.hpp"
#include "irda/llm/simulated.hpp"
#include "irda/metrics.hpp"
#include "irda/moral_machine.hpp"
#include "irda/reward.hpp"
#include "irda/sampling/diversity.hpp"
#include "irda/supervised.hpp"

using nlohmann::json;
using namespace irda;

namespace {

struct Common {
  std::string pool_path;
  std::string llm_kind = "stub";
  std::string cassette;
  std::uint64_t seed = 0;
  std::size_t k = 4;
  double epsilon = 0.8;
  std::string out;
};

/// Keeps the backend and whatever it writes to alive for the command.
struct Backend {
  std::unique_ptr<llm::LlmClient> inner;
  std::unique_ptr<std::ofstream> record_file;
  std::unique_ptr<llm::LlmClient> recorder;
  llm::LlmClient& get() { return recorder ? *recorder : *inner; }
};

Backend make_backend(const Common& c) {
  Backend b;
  if (c.llm_kind == "stub") {
    b.inner = std::make_unique<llm::StubClient>(llm::sim::respond);
  } else if (c.llm_kind == "replay") {
    if (c.cassette.empty()) fail(ErrorKind::ConfigInvalid, "--llm replay needs --cassette");
    b.inner = std::make_unique<llm::ReplayClient>(llm::ReplayClient::from_file(c.cassette));
  } else if (c.llm_kind == "http") {
    b.inner = std::make_unique<llm::HttpClient>(llm::HttpConfig::from_env());
  } else {
    fail(ErrorKind::ConfigInvalid, "unknown --llm " + c.llm_kind);
  }
  // A live backend with a cassette path records every exchange there.
  if (c.llm_kind != "replay" && !c.cassette.empty()) {
    b.record_file = std::make_unique<std::ofstream>(c.cassette, std::ios::app);
    if (!*b.record_file) fail(ErrorKind::Io, "cannot write cassette " + c.cassette);
    b.recorder = std::make_unique<llm::RecordingClient>(*b.inner, *b.record_file);
  }
  return b;
}

env::TrajectoryPool pool_or_default(const Common& c, std::size_t n) {
  if (!c.pool_path.empty()) return env::load_pool(c.pool_path);
  return env::generate_pool(env::EnvConfig{}, n, c.seed);
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path);
  out << text;
  if (!out) fail(ErrorKind::Io, "write failed for " + path);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> read_script(const std::string& path) {
  std::istringstream in(slurp(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = reward::detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    lines.push_back(t);
  }
  return lines;
}

dialogue::SessionConfig session_config(const Common& c, std::size_t max_rounds, std::size_t subset) {
  dialogue::SessionConfig cfg;
  cfg.k = c.k;
  cfg.epsilon = c.epsilon;
  cfg.seed = c.seed;
  cfg.max_uncertainty_rounds = max_rounds;
  cfg.uncertainty_subset = subset;
  return cfg;
}

/// Rows of {"pid", "x", "y"}; a missing pid means a single participant.
std::map<std::string, supervised::LabeledSet> read_labeled(const std::string& path) {
  std::map<std::string, supervised::LabeledSet> out;
  std::istringstream in(slurp(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      auto& d = out[j.value("pid", std::string("all"))];
      d.inputs.push_back(j.at("x").get<std::vector<double>>());
      d.labels.push_back(j.at("y").get<int>());
    } catch (const json::exception& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return out;
}

std::vector<std::size_t> parse_grid(const std::string& s) {
  std::vector<std::size_t> grid;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      grid.push_back(std::stoul(tok));
    } catch (const std::exception&) {
      fail(ErrorKind::ConfigInvalid, "bad --grid entry '" + tok + "'");
    }
  }
  if (grid.empty()) fail(ErrorKind::ConfigInvalid, "--grid is empty");
  return grid;
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interactive reward elicitation: pools, dialogue sessions, labelling and evaluation"};
  app.require_subcommand(1);
  Common c;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--pool", c.pool_path, "Trajectory pool (JSON lines)");
    sub->add_option("--llm", c.llm_kind, "LLM backend")->check(CLI::IsMember({"http", "stub", "replay"}));
    sub->add_option("--cassette", c.cassette, "Replay source, or recording target for a live backend");
    sub->add_option("--seed", c.seed, "Seed");
    sub->add_option("--k", c.k, "Number of diversity examples");
    sub->add_option("--epsilon", c.epsilon, "Confidence threshold");
    sub->add_option("--out", c.out, "Output path (default stdout)");
  };

  // pool gen
  auto* pool = app.add_subcommand("pool", "Trajectory pools")->require_subcommand(1);
  std::size_t pool_n = 200;
  auto* pool_gen = pool->add_subcommand("gen", "Generate a seeded pool");
  add_common(pool_gen);
  pool_gen->add_option("--n", pool_n, "Number of trajectories");

  // sample diversity
  auto* sample = app.add_subcommand("sample", "Sampling")->require_subcommand(1);
  auto* sample_div = sample->add_subcommand("diversity", "Pick k varied trajectories");
  add_common(sample_div);

  // session run
  auto* session = app.add_subcommand("session", "Dialogue sessions")->require_subcommand(1);
  auto* session_run = session->add_subcommand("run", "Drive a full dialogue from scripted answers");
  add_common(session_run);
  std::string script_path, rule_name, transcript_path;
  std::size_t max_rounds = 1, subset = 20, default_pool_n = 200;
  session_run->add_option("--script", script_path, "Answers, one per line");
  session_run->add_option("--rule", rule_name, "Answer as a synthetic user holding this rule instead");
  session_run->add_option("--max-rounds", max_rounds, "Uncertainty rounds (0 = until confident)");
  session_run->add_option("--subset", subset, "Uncertainty candidate count");
  session_run->add_option("--pool-size", default_pool_n, "Generated pool size when --pool is absent");
  session_run->add_option("--transcript", transcript_path, "Write the session view here");

  // context export
  auto* context = app.add_subcommand("context", "Reward-model contexts")->require_subcommand(1);
  auto* context_export = context->add_subcommand("export", "Export a logged session's context");
  add_common(context_export);
  std::string store_root = "sessions", session_id;
  context_export->add_option("--store", store_root, "Session log directory");
  context_export->add_option("--session", session_id, "Session id")->required();

  // label
  auto* label = app.add_subcommand("label", "Apply a context to trajectories or scenarios");
  add_common(label);
  std::string context_path, items_path;
  std::size_t parallel = 1;
  label->add_option("--context", context_path, "Context file")->required();
  label->add_option("--items", items_path, "Pool or scenario file (JSON lines)")->required();
  label->add_option("--parallel", parallel, "Concurrent classifications");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Metrics report: full context vs baseline vs MLP");
  add_common(evaluate);
  bool synthetic = false;
  std::string labels_path;
  std::size_t resamples = 10000, eval_pool = 400;
  char sep = '\t';
  evaluate->add_flag("--synthetic", synthetic, "Use rule-following synthetic users");
  evaluate->add_option("--labels", labels_path, "Recorded labels (JSON)");
  evaluate->add_option("--resamples", resamples, "Bootstrap resamples");
  evaluate->add_option("--pool-size", eval_pool, "Synthetic pool size");
  evaluate->add_option("--sep", sep, "Column separator");

  // baseline train / curve
  auto* baseline = app.add_subcommand("baseline", "Supervised MLP baseline")->require_subcommand(1);
  auto* baseline_train = baseline->add_subcommand("train", "Train one MLP");
  add_common(baseline_train);
  std::string data_path, test_path, mode = "individual", grid = "5,10,15,20,25,30";
  std::size_t epochs = 200;
  baseline_train->add_option("--data", data_path, "Training rows {pid, x, y} (JSON lines)")->required();
  baseline_train->add_option("--epochs", epochs, "Epochs");
  auto* baseline_curve = baseline->add_subcommand("curve", "Learning curve over sample counts");
  add_common(baseline_curve);
  baseline_curve->add_option("--train", data_path, "Training rows")->required();
  baseline_curve->add_option("--test", test_path, "Test rows")->required();
  baseline_curve->add_option("--mode", mode)->check(CLI::IsMember({"individual", "collective"}));
  baseline_curve->add_option("--grid", grid, "Comma-separated sample counts");
  baseline_curve->add_option("--epochs", epochs, "Epochs");
  baseline_curve->add_option("--resamples", resamples, "Bootstrap resamples");

  // mm gen / import
  auto* mm = app.add_subcommand("mm", "Moral Machine scenarios")->require_subcommand(1);
  auto* mm_gen = mm->add_subcommand("gen", "Generate random scenarios");
  add_common(mm_gen);
  std::size_t mm_n = 100;
  mm_gen->add_option("--n", mm_n, "Number of scenarios");
  auto* mm_import = mm->add_subcommand("import", "Convert the public CSV export");
  add_common(mm_import);
  std::string csv_path;
  mm_import->add_option("--csv", csv_path, "CSV file")->required();

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  add_common(serve);
  std::string host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port (0 picks a free one)");
  serve->add_option("--store", store_root, "Session log directory");
  serve->add_option("--pool-size", default_pool_n, "Generated pool size when --pool is absent");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*pool_gen) {
      std::ostringstream ss;
      env::write_pool(ss, env::generate_pool(env::EnvConfig{}, pool_n, c.seed));
      emit(c.out, ss.str());
    } else if (*sample_div) {
      const auto p = pool_or_default(c, 200);
      const auto s = sampling::diversity_sample(p, c.k, c.seed);
      emit(c.out, json{{"ids", s.ids}, {"clusters", s.clusters.labels}, {"inertia", s.clusters.inertia}}.dump(2) +
                      "\n");
    } else if (*session_run) {
      if (script_path.empty() == rule_name.empty()) fail(ErrorKind::ConfigInvalid, "give exactly one of --script, --rule");
      const auto p = pool_or_default(c, default_pool_n);
      auto backend = make_backend(c);
      harness::AnswerFn answer;
      std::vector<std::string> script;
      std::size_t next = 0;
      std::optional<harness::SyntheticUser> user;
      if (!script_path.empty()) {
        script = read_script(script_path);
        answer = [&](const dialogue::DialogueSession&) {
          if (next >= script.size()) fail(ErrorKind::UnexpectedState, "script ended before the session finished");
          return script[next++];
        };
      } else {
        harness::find_rule(rule_name);
        user = harness::SyntheticUser{rule_name};
        answer = [&](const dialogue::DialogueSession& s) { return user->answer(s); };
      }
      const auto s = harness::run_session(p, session_config(c, max_rounds, subset), backend.get(), answer);
      if (next < script.size()) std::cerr << "warning: " << script.size() - next << " unused script lines\n";
      const auto ctx = dialogue::finalize(s);
      emit(c.out, reward::export_context(ctx).dump(2) + "\n");
      if (!transcript_path.empty()) emit(transcript_path, dialogue::session_view(s).dump(2) + "\n");
      std::cerr << "session finished with " << ctx.feedback.size() << " records\n";
    } else if (*context_export) {
      const env::TrajectoryPool p = pool_or_default(c, default_pool_n);
      llm::ReplayClient none({});
      harness::ServiceConfig sc;
      sc.store_root = store_root;
      harness::Service svc(sc, p, none);
      emit(c.out, svc.context(session_id).dump(2) + "\n");
    } else if (*label) {
      const auto ctx = reward::import_context(json::parse(slurp(context_path)));
      std::vector<reward::LabelItem> items;
      std::istringstream in(slurp(items_path));
      std::string line;
      std::size_t lineno = 0;
      while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
          const json j = json::parse(line);
          if (j.contains("states")) {
            const auto t = j.get<env::Trajectory>();
            items.push_back({t.id, encoding::encode_ascii(t).text});
          } else {
            const auto sc = j.get<mm::Scenario>();
            mm::validate(sc);
            items.push_back({sc.id, mm::render_text(sc)});
          }
        } catch (const json::exception& e) {
          throw ParseError(lineno, e.what());
        }
      }
      auto backend = make_backend(c);
      const auto res = reward::label_set(ctx, items, backend.get(), parallel);
      std::ostringstream ss;
      for (const auto& [id, cl] : res.labels)
        ss << json{{"id", id},
                   {"label", cl.label},
                   {"word", reward::label_word(ctx, cl.label)},
                   {"pos_prob", cl.confidence.pos_prob},
                   {"neg_prob", cl.confidence.neg_prob},
                   {"confidence", cl.confidence.value},
                   {"tie", cl.tie}}
                  .dump()
           << '\n';
      for (const auto& [id, err] : res.failures) ss << json{{"id", id}, {"error", err}}.dump() << '\n';
      emit(c.out, ss.str());
      if (!res.failures.empty()) {
        std::cerr << json{{"error", {{"code", "ItemsFailed"}, {"count", res.failures.size()}}}}.dump() << '\n';
        return 1;
      }
    } else if (*evaluate) {
      if (synthetic == !labels_path.empty()) fail(ErrorKind::ConfigInvalid, "give exactly one of --synthetic, --labels");
      std::vector<metrics::ReportRow> rows;
      if (synthetic) {
        auto backend = make_backend(c);
        harness::BenchmarkConfig bc;
        bc.seed = c.seed;
        bc.pool_size = eval_pool;
        bc.n_resamples = resamples;
        bc.session.k = c.k;
        bc.session.epsilon = c.epsilon;
        rows = harness::run_benchmark(bc, backend.get()).rows;
      } else {
        rows = harness::report_from_labels(json::parse(slurp(labels_path)), resamples, c.seed);
      }
      std::ostringstream ss;
      metrics::write_report(ss, rows, sep);
      emit(c.out, ss.str());
    } else if (*baseline_train) {
      const auto data = read_labeled(data_path);
      supervised::LabeledSet all;
      for (const auto& [_, d] : data) {
        all.inputs.insert(all.inputs.end(), d.inputs.begin(), d.inputs.end());
        all.labels.insert(all.labels.end(), d.labels.begin(), d.labels.end());
      }
      supervised::MlpConfig mc;
      mc.input_dim = supervised::input_dim(all);
      mc.epochs = epochs;
      mc.seed = c.seed;
      const auto r = supervised::train_mlp(all, mc);
      if (r.single_class) std::cerr << "warning: training labels contain a single class\n";
      emit(c.out, supervised::model_to_json(r.model).dump() + "\n");
    } else if (*baseline_curve) {
      const auto train = read_labeled(data_path);
      const auto test = read_labeled(test_path);
      supervised::MlpConfig mc;
      mc.input_dim = supervised::input_dim(train.begin()->second);
      mc.epochs = epochs;
      mc.seed = c.seed;
      const auto curve = supervised::learning_curve(
          train, test, mode == "individual" ? supervised::CurveMode::individual : supervised::CurveMode::collective,
          parse_grid(grid), mc, supervised::Metric::balanced_accuracy, resamples);
      std::ostringstream ss;
      supervised::write_curve(ss, curve);
      emit(c.out, ss.str());
    } else if (*mm_gen) {
      std::ostringstream ss;
      mm::write_scenarios(ss, mm::generate_scenarios(mm_n, c.seed));
      emit(c.out, ss.str());
    } else if (*mm_import) {
      std::istringstream in(slurp(csv_path));
      std::ostringstream ss;
      mm::write_scenarios(ss, mm::import_csv(in));
      emit(c.out, ss.str());
    } else if (*serve) {
      const auto p = pool_or_default(c, default_pool_n);
      auto backend = make_backend(c);
      harness::ServiceConfig sc;
      sc.store_root = store_root;
      sc.session_defaults.k = c.k;
      sc.session_defaults.epsilon = c.epsilon;
      sc.session_defaults.seed = c.seed;
      harness::Service svc(sc, p, backend.get());
      auto srv = harness::make_server(svc);
      const int bound = port == 0 ? srv->bind_to_any_port(host) : (srv->bind_to_port(host, port) ? port : -1);
      if (bound < 0) fail(ErrorKind::Io, "cannot bind " + host + ":" + std::to_string(port));
      g_server = srv.get();
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "listening on " << host << ":" << bound << std::endl;
      srv->listen_after_bind();
    }
  } catch (const Error& e) {
    std::cerr << json{{"error", {{"code", std::string(to_string(e.kind()))}, {"message", e.detail()}}}}.dump()
              << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"code", "Internal"}, {"message", e.what()}}}}.dump() << '\n';
    return 1;
  }
  return 0;
}

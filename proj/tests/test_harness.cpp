// Session log, service, HTTP routes, reports and the command line.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <thread>

#include "fixtures.hpp"
#include "irda/harness/benchmark.hpp"
#include "irda/harness/http_server.hpp"
#include "irda/harness/service.hpp"
#include "irda/harness/session_store.hpp"
#include "irda/llm/simulated.hpp"

using namespace irda;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::Io;
}

struct TempDir {
  fs::path path;
  TempDir() {
    static int n = 0;
    path = fs::temp_directory_path() / ("irda_test_" + std::to_string(::getpid()) + "_" + std::to_string(n++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

const env::TrajectoryPool& pool() {
  static const auto p = env::generate_pool(env::EnvConfig{}, 60, 13);
  return p;
}

harness::ServiceConfig service_config(const fs::path& root) {
  harness::ServiceConfig c;
  c.store_root = root;
  c.session_defaults.uncertainty_subset = 10;
  c.session_defaults.seed = 2;
  int tick = 0;
  c.clock = [tick]() mutable { return "2026-01-01T00:00:" + std::to_string(10 + tick++) + ".000Z"; };
  return c;
}

int run(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string bin() { return IRDA_BIN; }

}  // namespace

// ---------------------------------------------------------------------------
// Session log

TEST(Store, AppendsNumberedEvents) {
  TempDir d;
  harness::SessionStore store(d.path);
  store.append("s1", "created", {{"x", 1}}, "t0");
  store.append("s1", "turn", {{"x", 2}}, "t1");
  const auto ev = store.read("s1");
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_EQ(ev[1].seq, 1u);
  EXPECT_EQ(ev[1].payload.at("x"), 2);
  EXPECT_EQ(store.list(), std::vector<std::string>{"s1"});
  EXPECT_EQ(kind_of([&] { store.read("nope"); }), ErrorKind::NotFound);
}

TEST(Store, TornTailIsDropped) {
  TempDir d;
  {
    harness::SessionStore store(d.path);
    store.append("s1", "created", {}, "t0");
  }
  {
    std::ofstream out(d.path / "s1.jsonl", std::ios::app);
    out << "{\"schema\":\"irda-sess";
  }
  harness::SessionStore store(d.path);
  EXPECT_EQ(store.read("s1").size(), 1u);
  store.append("s1", "turn", {}, "t1");
  const auto ev = store.read("s1");
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_EQ(ev[1].seq, 1u);
}

TEST(Store, CorruptMiddleLineIsAnError) {
  TempDir d;
  {
    std::ofstream out(d.path / "s1.jsonl");
    out << "garbage\n{\"schema\":\"irda-session/1\",\"seq\":0,\"timestamp\":\"t\",\"kind\":\"created\",\"payload\":{}}\n";
  }
  harness::SessionStore store(d.path);
  EXPECT_EQ(kind_of([&] { store.read("s1"); }), ErrorKind::ParseError);
}

// ---------------------------------------------------------------------------
// Service

TEST(Service, LifecycleAndErrors) {
  TempDir d;
  auto llm = llm::sim::make_client();
  harness::Service svc(service_config(d.path), pool(), llm);
  const auto created = svc.create_session(json::object());
  const std::string id = created.at("session_id");
  EXPECT_EQ(created.at("turn").at("messages").at(0), dialogue::kGreeting);
  EXPECT_EQ(svc.get_session(id).at("state"), "AwaitValue");
  EXPECT_EQ(kind_of([&] { svc.get_session("s999999"); }), ErrorKind::NotFound);
  EXPECT_EQ(kind_of([&] { svc.context(id); }), ErrorKind::StageIncomplete);

  const auto r1 = svc.post_message(id, 1, "I want the agent to act respectfully.");
  EXPECT_EQ(svc.get_session(id).at("state"), "Stage1");
  EXPECT_EQ(svc.post_message(id, 1, "ignored on retry"), r1);
  EXPECT_EQ(svc.get_session(id).at("transcript").size(), 4u);

  const std::string tid = r1.at("turn").at("attachment");
  EXPECT_EQ(svc.frames(id, tid).size(), 31u);
  EXPECT_EQ(kind_of([&] { svc.frames(id, "t99999"); }), ErrorKind::NotFound);

  EXPECT_EQ(harness::http_status(harness::api_code(ErrorKind::UnexpectedState)), 409);
  EXPECT_EQ(harness::http_status(harness::api_code(ErrorKind::NotFound)), 404);
  EXPECT_EQ(harness::http_status(harness::api_code(ErrorKind::Transport)), 502);
  EXPECT_EQ(harness::http_status(harness::api_code(ErrorKind::ConfigInvalid)), 400);
}

TEST(Service, FailedMessageChangesNothing) {
  TempDir d;
  auto llm = llm::sim::make_client();
  harness::Service svc(service_config(d.path), pool(), llm);
  const std::string id = svc.create_session(json::object()).at("session_id");
  svc.post_message(id, 1, "act respectfully");
  svc.post_message(id, 2, "hmm");
  svc.post_message(id, 3, "hmm");
  const auto before = svc.get_session(id);
  EXPECT_EQ(kind_of([&] { svc.post_message(id, 4, "hmm"); }), ErrorKind::UnparsableLabel);
  EXPECT_EQ(svc.get_session(id), before);
  svc.post_message(id, 4, "It was respectful because it stayed home.");
  EXPECT_EQ(svc.get_session(id).at("index"), 1);
}

TEST(Service, RunsToDoneAndRecovers) {
  TempDir d;
  auto llm = llm::sim::make_client();
  harness::SyntheticUser user{"stays_in_own_quadrant"};
  json view, ctx;
  std::string id;
  {
    harness::Service svc(service_config(d.path), pool(), llm);
    id = svc.create_session(json::object()).at("session_id");
    // Drive it with the synthetic user through a shadow session.
    auto shadow = dialogue::start_session(pool(), service_config(d.path).session_defaults, id, "t").first;
    std::int64_t seq = 0;
    while (shadow.phase != dialogue::Phase::Done) {
      const auto text = user.answer(shadow);
      svc.post_message(id, ++seq, text);
      shadow = dialogue::submit(shadow, text, "t", llm).first;
    }
    view = svc.get_session(id);
    ctx = svc.context(id);
    EXPECT_EQ(view.at("state"), "Done");
    EXPECT_EQ(kind_of([&] { svc.post_message(id, seq + 1, "more"); }), ErrorKind::UnexpectedState);
  }
  // Recovery replays logged LLM answers; a client that knows nothing works.
  llm::ReplayClient none({});
  harness::Service again(service_config(d.path), pool(), none);
  EXPECT_EQ(again.session_count(), 1u);
  EXPECT_EQ(again.get_session(id), view);
  EXPECT_EQ(again.context(id), ctx);
  const std::string next = again.create_session(json::object()).at("session_id");
  EXPECT_NE(next, id);
}

// ---------------------------------------------------------------------------
// HTTP

TEST(Http, Routes) {
  TempDir d;
  auto llm = llm::sim::make_client();
  harness::Service svc(service_config(d.path), pool(), llm);
  auto srv = harness::make_server(svc);
  const int port = srv->bind_to_any_port("127.0.0.1");
  std::thread th([&] { srv->listen_after_bind(); });
  srv->wait_until_ready();
  httplib::Client cli("127.0.0.1", port);

  EXPECT_EQ(cli.Get("/healthz")->status, 200);
  auto created = cli.Post("/sessions", "{}", "application/json");
  ASSERT_EQ(created->status, 200) << created->body;
  const std::string id = json::parse(created->body).at("session_id");

  auto msg = cli.Post("/sessions/" + id + "/messages", R"({"seq":1,"text":"act respectfully"})", "application/json");
  EXPECT_EQ(msg->status, 200);
  const std::string tid = json::parse(msg->body).at("turn").at("attachment");
  EXPECT_EQ(cli.Get("/sessions/" + id + "/trajectories/" + tid + "/frames")->status, 200);

  auto missing = cli.Get("/sessions/s777777");
  EXPECT_EQ(missing->status, 404);
  EXPECT_EQ(json::parse(missing->body).at("error").at("code"), "not_found");
  EXPECT_EQ(cli.Post("/sessions/" + id + "/messages", R"({"text":"x"})", "application/json")->status, 400);
  EXPECT_EQ(cli.Post("/sessions/" + id + "/messages", "not json", "application/json")->status, 400);
  EXPECT_EQ(cli.Get("/sessions/" + id + "/context")->status, 409);
  EXPECT_EQ(cli.Get("/nowhere")->status, 404);
  srv->stop();
  th.join();
}

// ---------------------------------------------------------------------------
// Reports

TEST(Report, FromRecordedLabels) {
  const auto j = json::parse(R"({
    "participants": {
      "p1": {"truth": [1,0,1,0], "irda": [1,0,1,0], "baseline": [1,1,1,0]},
      "p2": {"truth": [1,0,0,0], "irda": [1,0,0,0], "baseline": [0,0,0,1]}
    },
    "features": {"p1": ["a","b","c"], "p2": ["b","c","d"]}
  })");
  const auto rows = harness::report_from_labels(j, 200, 1);
  std::map<std::string, metrics::ReportRow> by;
  for (const auto& r : rows) by.emplace(r.metric + "/" + r.group, r);
  EXPECT_EQ(by.at("balanced_accuracy/irda").mean, 1.0);
  EXPECT_NEAR(by.at("balanced_accuracy/baseline").mean, (0.75 + 1.0 / 3.0) / 2.0, 1e-12);
  EXPECT_TRUE(by.count("wilcoxon_irda_vs_baseline/all"));
  EXPECT_EQ(by.at("jaccard_mean/participants").mean, 0.5);
  EXPECT_TRUE(by.count("fleiss_kappa/participants"));
}

// ---------------------------------------------------------------------------
// Command line

TEST(Cli, UnknownFlagIsUsageError) {
  EXPECT_EQ(run(bin() + " pool gen --bogus >/dev/null 2>&1"), 2);
  EXPECT_EQ(run(bin() + " >/dev/null 2>&1"), 2);
}

TEST(Cli, ScriptedSessionExportsContext) {
  TempDir d;
  const auto out = d.path / "ctx.json", err = d.path / "err.txt";
  ASSERT_EQ(run(bin() + " session run --llm stub --seed 1 --pool-size 60 --script " +
                fixtures::data_path("respectful.answers") + " --out " + out.string() + " 2>" + err.string()),
            0)
      << fixtures::read_file(err.string());
  const auto ctx = reward::import_context(json::parse(fixtures::read_file(out.string())));
  EXPECT_EQ(ctx.pos_word, "respectful");
  EXPECT_EQ(ctx.feedback.size(), 5u);
  EXPECT_NE(fixtures::read_file(err.string()).find("5 records"), std::string::npos);
}

TEST(Cli, PoolThenLabel) {
  TempDir d;
  const auto p = (d.path / "pool.jsonl").string(), ctx = (d.path / "ctx.json").string(),
             out = (d.path / "labels.jsonl").string();
  ASSERT_EQ(run(bin() + " pool gen --n 8 --seed 3 --out " + p), 0);
  EXPECT_EQ(env::load_pool(p).size(), 8u);
  ASSERT_EQ(run(bin() + " session run --llm stub --rule picks_garbage --pool-size 60 --out " + ctx + " 2>/dev/null"), 0);
  ASSERT_EQ(run(bin() + " label --llm stub --context " + ctx + " --items " + p + " --parallel 2 --out " + out), 0);
  std::istringstream in(fixtures::read_file(out));
  std::size_t n = 0;
  for (std::string line; std::getline(in, line); ++n) {
    const auto j = json::parse(line);
    EXPECT_TRUE(j.at("label") == 0 || j.at("label") == 1);
  }
  EXPECT_EQ(n, 8u);
  EXPECT_EQ(run(bin() + " label --llm replay --context " + ctx + " --items " + p + " >/dev/null 2>&1"), 1);
}

TEST(Cli, MoralMachineAndEvaluate) {
  TempDir d;
  const auto mmf = (d.path / "mm.jsonl").string(), labels = (d.path / "labels.json").string(),
             report = (d.path / "report.tsv").string();
  ASSERT_EQ(run(bin() + " mm gen --n 5 --seed 2 --out " + mmf), 0);
  std::ifstream in(mmf);
  EXPECT_EQ(mm::read_scenarios(in).size(), 5u);
  {
    std::ofstream out(labels);
    out << R"({"participants":{"a":{"truth":[1,0],"irda":[1,0]},"b":{"truth":[0,1],"irda":[0,1]}}})";
  }
  ASSERT_EQ(run(bin() + " evaluate --labels " + labels + " --resamples 100 --out " + report), 0);
  EXPECT_EQ(fixtures::read_file(report).rfind("metric\tgroup", 0), 0u);
}

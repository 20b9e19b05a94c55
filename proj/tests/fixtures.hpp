#pragma once

// Hand-built inputs shared by the unit and acceptance suites.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <map>
#include <vector>

#include "irda/core/random.hpp"
#include "irda/env.hpp"
#include "irda/supervised.hpp"
#include "irda/moral_machine.hpp"

namespace fixtures {

inline std::string data_path(const std::string& name) { return std::string(IRDA_TEST_DATA) + "/" + name; }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Two steps: the main agent moves one cell right, nothing else changes.
inline irda::env::Trajectory two_step() {
  using namespace irda::env;
  EnvConfig cfg;
  cfg.n_apples = 7;
  cfg.n_garbage = 2;
  cfg.episode_length = 1;
  GridState s;
  s.main_agent = {0, 0};
  s.background = {BackgroundAgent{{5, 2}, true}, BackgroundAgent{{0, 4}, true}, BackgroundAgent{{3, 4}, false}};
  s.apples = {{{0, 1}, 1}, {{4, 2}, 2}, {{2, 4}, 1}, {{0, 5}, 1}, {{3, 5}, 1}, {{4, 5}, 1}};
  s.garbage = {{{4, 0}, 1}, {{3, 1}, 1}};
  GridState s1 = s;
  s1.step_index = 1;
  s1.main_agent = {1, 0};
  Trajectory t;
  t.id = "fixture";
  t.policy = "stay_home";
  t.config = cfg;
  t.states = {s, s1};
  Event moved;
  moved.kind = EventKind::moved;
  moved.agent = kMainAgent;
  moved.from = {0, 0};
  moved.to = {1, 0};
  t.events = {{moved}};
  return t;
}

/// Pedestrians on both sides: four girls and a female doctor crossing on red
/// straight ahead, four boys and a male doctor crossing on green on the
/// swerve side.
inline irda::mm::Scenario doctors_scenario() {
  using namespace irda::mm;
  auto index = [](std::string_view name) {
    for (std::size_t i = 0; i < kCharacterTypes; ++i)
      if (kCharacters[i].column == name) return i;
    return kCharacterTypes;
  };
  Scenario s;
  s.id = "doctors";
  s.stay.intervention = 0;
  s.stay.ped_ped = 1;
  s.stay.crossing_signal = CrossingSignal::red;
  s.stay.character_counts[index("Girl")] = 4;
  s.stay.character_counts[index("FemaleDoctor")] = 1;
  s.swerve = s.stay;
  s.swerve.intervention = 1;
  s.swerve.crossing_signal = CrossingSignal::green;
  s.swerve.character_counts = {};
  s.swerve.character_counts[index("Boy")] = 4;
  s.swerve.character_counts[index("MaleDoctor")] = 1;
  s.stay.number_of_characters = s.swerve.number_of_characters = 5;
  return s;
}

/// Pool whose trajectories fall into k planted behaviours: the main agent
/// idles in corner c of the grid, apart from one short excursion to a
/// neighbouring cell. Ids are shuffled so they carry no cluster
/// information. `truth[id]` is the planted cluster.
struct PlantedPool {
  irda::env::TrajectoryPool pool;
  std::map<std::string, std::size_t> truth;
};

inline PlantedPool planted_pool(std::size_t k, std::size_t per_cluster, std::uint64_t seed) {
  using namespace irda::env;
  static const Position corners[4] = {{0, 0}, {5, 0}, {0, 5}, {5, 5}};
  irda::Rng rng(irda::derive_seed(seed, "planted"));
  EnvConfig cfg;
  GridState base;
  base.background = {BackgroundAgent{{2, 3}, true}, BackgroundAgent{{3, 2}, true}, BackgroundAgent{{3, 3}, false}};
  base.apples = {{{1, 2}, 1}, {{4, 1}, 2}, {{2, 4}, 1}};
  base.garbage = {{{1, 4}, 1}};
  std::vector<std::size_t> ids(k * per_cluster);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[irda::uniform_index(rng, i)]);
  PlantedPool out;
  out.pool.trajectories.resize(ids.size());
  for (std::size_t c = 0, n = 0; c < k; ++c) {
    for (std::size_t m = 0; m < per_cluster; ++m, ++n) {
      Trajectory t;
      t.id = pool_id(ids[n]);
      t.config = cfg;
      t.policy = "stay_home";
      const Position home = corners[c];
      const std::size_t start = 1 + irda::uniform_index(rng, cfg.episode_length - 3);
      const std::size_t len = irda::uniform_index(rng, 4);
      const Position away{home.x == 0 ? 1 : home.x - 1, home.y};
      for (int step = 0; step <= cfg.episode_length; ++step) {
        GridState s = base;
        s.step_index = step;
        const auto st = static_cast<std::size_t>(step);
        s.main_agent = st >= start && st < start + len ? away : home;
        t.states.push_back(s);
      }
      t.events.resize(static_cast<std::size_t>(cfg.episode_length));
      out.truth[t.id] = c;
      out.pool.trajectories[ids[n]] = std::move(t);
    }
  }
  return out;
}

/// Three pseudo-participants whose labelling rules contradict each other
/// pairwise. Inputs are 2-d; x0 picks one of three regions and x1's sign
/// carries the label. Each participant sees two regions and shares each one
/// with another participant who labels it the opposite way. Test points are
/// the same for everyone sharing a region and come in (x1, -x1) pairs.
struct ContradictionData {
  std::map<std::string, irda::supervised::LabeledSet> train, test;
};

inline ContradictionData contradiction_data(std::size_t n_train, std::size_t test_per_region, std::uint64_t seed) {
  const double centre[3] = {-2.5, 0.0, 2.5};
  struct Who {
    const char* pid;
    std::size_t regions[2];
  };
  const Who who[3] = {{"A", {0, 1}}, {"B", {1, 2}}, {"C", {2, 0}}};
  auto label = [](const std::string& pid, std::size_t region, double x1) {
    const bool up = x1 > 0.0;
    if (pid == "A") return up ? 1 : 0;
    if (pid == "B") return up ? 0 : 1;
    return region == 2 ? (up ? 1 : 0) : (up ? 0 : 1);
  };
  irda::Rng rng(irda::derive_seed(seed, "contradiction"));
  auto draw = [&](std::size_t region) {
    const double x0 = centre[region] + irda::uniform_unit(rng) - 0.5;
    const double mag = 0.1 + 0.9 * irda::uniform_unit(rng);
    return std::pair{x0, mag};
  };
  std::vector<std::pair<double, double>> shared[3];
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t i = 0; i < test_per_region; ++i) shared[r].push_back(draw(r));
  ContradictionData d;
  for (const auto& w : who) {
    auto& tr = d.train[w.pid];
    for (std::size_t i = 0; i < n_train; ++i) {
      const std::size_t r = w.regions[i % 2];
      auto [x0, mag] = draw(r);
      const double x1 = irda::uniform_unit(rng) < 0.5 ? mag : -mag;
      tr.inputs.push_back({x0, x1});
      tr.labels.push_back(label(w.pid, r, x1));
    }
    auto& te = d.test[w.pid];
    for (std::size_t r : w.regions)
      for (auto [x0, mag] : shared[r])
        for (double x1 : {mag, -mag}) {
          te.inputs.push_back({x0, x1});
          te.labels.push_back(label(w.pid, r, x1));
        }
  }
  return d;
}

}  // namespace fixtures

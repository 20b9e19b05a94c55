#pragma once

// Multi-agent apple-farming grid world.
//
// The board is a square grid split into 2x2 quadrants (orchards). Agent 0 is
// the main agent and owns the upper-left quadrant; agents 1..3 are background
// agents, two of which never move. Agents collect every item on a cell when
// they enter it (apples before garbage). Items never respawn.

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "irda/core/error.hpp"
#include "irda/core/random.hpp"

namespace irda::env {

inline constexpr const char* kPoolSchema = "irda-pool/1";
inline constexpr int kMainAgent = 0;
inline constexpr int kAgentCount = 4;
inline constexpr int kBackgroundCount = 3;

/// Grid coordinate: x is the column, y is the row, origin at the upper-left.
/// Ordered row-major, i.e. by (y, x).
struct Position {
  int x = 0;
  int y = 0;

  friend bool operator==(const Position&, const Position&) = default;
  friend std::strong_ordering operator<=>(const Position& a, const Position& b) {
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.x <=> b.x;
  }
};

enum class Action { up, down, left, right, stay };
inline constexpr std::array<Action, 5> kActions{Action::up, Action::down, Action::left,
                                                Action::right, Action::stay};

enum class Policy { uniform_random, stay_home, greedy_apple };

inline std::string to_string(Policy p) {
  switch (p) {
    case Policy::uniform_random: return "uniform_random";
    case Policy::stay_home: return "stay_home";
    case Policy::greedy_apple: return "greedy_apple";
  }
  return "?";
}

inline Policy parse_policy(const std::string& name) {
  if (name == "uniform_random") return Policy::uniform_random;
  if (name == "stay_home") return Policy::stay_home;
  if (name == "greedy_apple") return Policy::greedy_apple;
  fail(ErrorKind::UnknownPolicy, "unknown policy '" + name + "'");
}

struct EnvConfig {
  int grid_size = 6;
  int quadrant_size = 3;
  int n_apples = 12;
  int n_garbage = 4;
  int max_items_per_cell = 2;
  int episode_length = 30;
  std::vector<std::pair<std::string, double>> policy_mix{
      {"uniform_random", 2.0}, {"stay_home", 1.0}, {"greedy_apple", 1.0}};

  friend bool operator==(const EnvConfig&, const EnvConfig&) = default;
};

inline void validate(const EnvConfig& c) {
  auto bad = [](const std::string& m) { fail(ErrorKind::ConfigInvalid, m); };
  if (c.quadrant_size < 1) bad("quadrant_size must be >= 1");
  if (c.grid_size != 2 * c.quadrant_size) bad("grid_size must equal 2 * quadrant_size");
  if (c.n_apples < 0 || c.n_garbage < 0) bad("item counts must be nonnegative");
  if (c.max_items_per_cell < 1) bad("max_items_per_cell must be >= 1");
  if (c.n_apples + c.n_garbage > c.grid_size * c.grid_size * c.max_items_per_cell)
    bad("too many items for the grid");
  if (c.episode_length < 1) bad("episode_length must be >= 1");
  if (c.policy_mix.empty()) bad("policy_mix is empty");
  double total = 0.0;
  for (const auto& [name, w] : c.policy_mix) {
    parse_policy(name);
    if (!(w >= 0.0)) bad("policy weights must be nonnegative");
    total += w;
  }
  if (!(total > 0.0)) bad("policy weights must sum to > 0");
}

inline bool in_bounds(Position p, int grid_size) {
  return p.x >= 0 && p.y >= 0 && p.x < grid_size && p.y < grid_size;
}

/// Quadrant ids: 0 upper-left, 1 upper-right, 2 lower-left, 3 lower-right.
inline int quadrant_of(Position p, int quadrant_size) {
  return (p.y / quadrant_size) * 2 + (p.x / quadrant_size);
}

inline Position quadrant_origin(int quadrant, int quadrant_size) {
  return {(quadrant % 2) * quadrant_size, (quadrant / 2) * quadrant_size};
}

struct BackgroundAgent {
  Position pos;
  bool stationary = true;

  friend bool operator==(const BackgroundAgent&, const BackgroundAgent&) = default;
};

using ItemMap = std::map<Position, int>;

struct GridState {
  int step_index = 0;
  Position main_agent;
  std::array<BackgroundAgent, kBackgroundCount> background{};
  ItemMap apples;
  ItemMap garbage;
  /// quadrant id -> agent id
  std::array<int, 4> ownership{0, 1, 2, 3};

  Position agent_position(int agent) const {
    return agent == kMainAgent ? main_agent : background[agent - 1].pos;
  }
  void set_agent_position(int agent, Position p) {
    if (agent == kMainAgent)
      main_agent = p;
    else
      background[agent - 1].pos = p;
  }
  int owner_of(int quadrant) const { return ownership[quadrant]; }
  int quadrant_owned_by(int agent) const {
    for (int q = 0; q < 4; ++q)
      if (ownership[q] == agent) return q;
    return -1;
  }

  friend bool operator==(const GridState&, const GridState&) = default;
};

inline int item_total(const ItemMap& items) {
  int n = 0;
  for (const auto& [_, c] : items) n += c;
  return n;
}

inline int count_at(const ItemMap& items, Position p) {
  auto it = items.find(p);
  return it == items.end() ? 0 : it->second;
}

/// Throws ConfigInvalid when a state breaks a structural invariant.
inline void validate_state(const GridState& s, const EnvConfig& c) {
  auto bad = [](const std::string& m) { fail(ErrorKind::ConfigInvalid, "invalid state: " + m); };
  if (!in_bounds(s.main_agent, c.grid_size)) bad("main agent out of bounds");
  int stationary = 0;
  for (const auto& b : s.background) {
    if (!in_bounds(b.pos, c.grid_size)) bad("background agent out of bounds");
    stationary += b.stationary ? 1 : 0;
  }
  if (stationary != 2) bad("exactly two background agents must be stationary");
  std::array<bool, kAgentCount> seen{};
  for (int owner : s.ownership) {
    if (owner < 0 || owner >= kAgentCount || seen[owner]) bad("ownership is not a bijection");
    seen[owner] = true;
  }
  if (s.ownership[0] != kMainAgent) bad("main agent must own the upper-left quadrant");
  for (const ItemMap* items : {&s.apples, &s.garbage}) {
    for (const auto& [p, n] : *items) {
      if (!in_bounds(p, c.grid_size)) bad("item out of bounds");
      if (n < 1 || n > c.max_items_per_cell) bad("item count out of range");
    }
  }
  for (const auto& [p, n] : s.apples) {
    if (n + count_at(s.garbage, p) > c.max_items_per_cell) bad("cell over capacity");
  }
}

enum class EventKind { moved, collected_apple, collected_garbage, entered_quadrant, left_quadrant };

inline std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::moved: return "moved";
    case EventKind::collected_apple: return "collected_apple";
    case EventKind::collected_garbage: return "collected_garbage";
    case EventKind::entered_quadrant: return "entered_quadrant";
    case EventKind::left_quadrant: return "left_quadrant";
  }
  return "?";
}

inline EventKind parse_event_kind(const std::string& s) {
  for (auto k : {EventKind::moved, EventKind::collected_apple, EventKind::collected_garbage,
                 EventKind::entered_quadrant, EventKind::left_quadrant})
    if (to_string(k) == s) return k;
  fail(ErrorKind::ParseError, "unknown event kind '" + s + "'");
}

/// `from`/`to` are the agent's positions before and after the step; item
/// events happen at `to`. `quadrant` is set for quadrant events only.
struct Event {
  EventKind kind = EventKind::moved;
  int agent = kMainAgent;
  Position from;
  Position to;
  int quadrant = -1;

  friend bool operator==(const Event&, const Event&) = default;
};

struct Trajectory {
  std::string id;
  std::uint64_t seed = 0;
  std::string policy;
  EnvConfig config;
  std::vector<GridState> states;
  /// events[t] holds what happened between states[t] and states[t + 1].
  std::vector<std::vector<Event>> events;

  std::size_t steps() const { return states.empty() ? 0 : states.size() - 1; }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct TrajectoryPool {
  std::vector<Trajectory> trajectories;
  std::uint64_t seed = 0;

  std::size_t size() const { return trajectories.size(); }

  const Trajectory* find(const std::string& id) const {
    for (const auto& t : trajectories)
      if (t.id == id) return &t;
    return nullptr;
  }
  const Trajectory& at(const std::string& id) const {
    if (const auto* t = find(id)) return *t;
    fail(ErrorKind::NotFound, "no trajectory with id '" + id + "'");
  }
};

// ---------------------------------------------------------------------------
// Mechanics

inline GridState init_state(const EnvConfig& config, std::uint64_t seed) {
  validate(config);
  Rng rng(derive_seed(seed, "init"));
  const int q = config.quadrant_size;

  GridState s;
  s.step_index = 0;
  s.main_agent = {0, 0};
  s.ownership = {0, 1, 2, 3};
  const auto mobile = static_cast<int>(uniform_index(rng, kBackgroundCount));
  for (int i = 0; i < kBackgroundCount; ++i) {
    s.background[i].pos = quadrant_origin(i + 1, q);
    s.background[i].stationary = (i != mobile);
  }

  std::vector<Position> free_cells;
  for (int y = 0; y < config.grid_size; ++y)
    for (int x = 0; x < config.grid_size; ++x) {
      Position p{x, y};
      bool occupied = p == s.main_agent;
      for (const auto& b : s.background) occupied = occupied || b.pos == p;
      if (!occupied) free_cells.push_back(p);
    }
  const auto capacity = static_cast<long>(free_cells.size()) * config.max_items_per_cell;
  if (config.n_apples + config.n_garbage > capacity)
    fail(ErrorKind::ConfigInvalid, "items exceed the capacity of agent-free cells");

  std::map<Position, int> load;
  auto place = [&](ItemMap& items, int n) {
    for (int i = 0; i < n; ++i) {
      std::vector<Position> open;
      for (const auto& p : free_cells)
        if (load[p] < config.max_items_per_cell) open.push_back(p);
      const Position p = open[uniform_index(rng, open.size())];
      ++items[p];
      ++load[p];
    }
  };
  place(s.apples, config.n_apples);
  place(s.garbage, config.n_garbage);
  return s;
}

inline Position apply_action(Position p, Action a, int grid_size) {
  Position next = p;
  switch (a) {
    case Action::up: --next.y; break;
    case Action::down: ++next.y; break;
    case Action::left: --next.x; break;
    case Action::right: ++next.x; break;
    case Action::stay: break;
  }
  return in_bounds(next, grid_size) ? next : p;
}

struct StepResult {
  GridState state;
  std::vector<Event> events;
};

/// Advances one step. The mobile background agent draws its action from
/// `rng`; everything else is determined by `main_action`.
inline StepResult step(const GridState& state, const EnvConfig& config, Action main_action,
                       Rng& rng) {
  StepResult r{state, {}};
  r.state.step_index = state.step_index + 1;

  std::array<Action, kAgentCount> actions{};
  actions.fill(Action::stay);
  actions[kMainAgent] = main_action;
  for (int i = 0; i < kBackgroundCount; ++i) {
    if (!state.background[i].stationary) actions[i + 1] = kActions[uniform_index(rng, kActions.size())];
  }

  const int q = config.quadrant_size;
  for (int agent = 0; agent < kAgentCount; ++agent) {
    const Position from = state.agent_position(agent);
    const Position to = apply_action(from, actions[agent], config.grid_size);
    if (to == from) continue;
    r.state.set_agent_position(agent, to);
    r.events.push_back({EventKind::moved, agent, from, to, -1});
    const int qa = quadrant_of(from, q);
    const int qb = quadrant_of(to, q);
    if (qa != qb) {
      r.events.push_back({EventKind::left_quadrant, agent, from, to, qa});
      r.events.push_back({EventKind::entered_quadrant, agent, from, to, qb});
    }
    for (auto [items, kind] : {std::pair{&r.state.apples, EventKind::collected_apple},
                               std::pair{&r.state.garbage, EventKind::collected_garbage}}) {
      auto it = items->find(to);
      if (it == items->end()) continue;
      for (int n = 0; n < it->second; ++n) r.events.push_back({kind, agent, from, to, -1});
      items->erase(it);
    }
  }
  return r;
}

inline int manhattan(Position a, Position b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

inline Action choose_action(Policy policy, const GridState& s, const EnvConfig& config, Rng& rng) {
  switch (policy) {
    case Policy::uniform_random:
      return kActions[uniform_index(rng, kActions.size())];
    case Policy::stay_home: {
      const int home = s.quadrant_owned_by(kMainAgent);
      if (quadrant_of(s.main_agent, config.quadrant_size) != home)
        return kActions[uniform_index(rng, kActions.size())];
      for (;;) {
        const Action a = kActions[uniform_index(rng, kActions.size())];
        const Position next = apply_action(s.main_agent, a, config.grid_size);
        if (quadrant_of(next, config.quadrant_size) == home) return a;
      }
    }
    case Policy::greedy_apple: {
      std::optional<Position> target;
      for (const auto& [p, n] : s.apples) {  // map order is (y, x)
        if (!target || manhattan(s.main_agent, p) < manhattan(s.main_agent, *target)) target = p;
      }
      if (!target) return Action::stay;
      const Position m = s.main_agent;
      if (target->x > m.x) return Action::right;
      if (target->x < m.x) return Action::left;
      if (target->y > m.y) return Action::down;
      if (target->y < m.y) return Action::up;
      return Action::stay;
    }
  }
  return Action::stay;
}

/// Plays one episode from `initial`; randomness for the main policy and the
/// background agent come from separate streams of `seed`.
inline Trajectory rollout_from(const GridState& initial, const EnvConfig& config,
                               std::uint64_t seed, const std::string& policy_name) {
  const Policy policy = parse_policy(policy_name);
  Rng policy_rng(derive_seed(seed, "policy"));
  Rng world_rng(derive_seed(seed, "world"));

  Trajectory t;
  t.seed = seed;
  t.policy = policy_name;
  t.config = config;
  t.states.reserve(config.episode_length + 1);
  t.states.push_back(initial);
  for (int i = 0; i < config.episode_length; ++i) {
    const Action a = choose_action(policy, t.states.back(), config, policy_rng);
    auto r = step(t.states.back(), config, a, world_rng);
    t.states.push_back(std::move(r.state));
    t.events.push_back(std::move(r.events));
  }
  return t;
}

inline Trajectory rollout(const EnvConfig& config, std::uint64_t seed, const std::string& policy) {
  parse_policy(policy);
  return rollout_from(init_state(config, seed), config, seed, policy);
}

inline std::string pool_id(std::size_t index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 5) digits.insert(0, 5 - digits.size(), '0');
  return "t" + digits;
}

inline TrajectoryPool generate_pool(const EnvConfig& config, std::size_t n, std::uint64_t seed) {
  validate(config);
  if (n < 1) fail(ErrorKind::ConfigInvalid, "pool size must be >= 1");
  std::vector<double> weights;
  for (const auto& [_, w] : config.policy_mix) weights.push_back(w);
  Rng mix_rng(derive_seed(seed, "policy-mix"));

  TrajectoryPool pool;
  pool.seed = seed;
  pool.trajectories.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& policy = config.policy_mix[weighted_index(mix_rng, weights)].first;
    Trajectory t = rollout(config, derive_seed(seed, i), policy);
    t.id = pool_id(i);
    pool.trajectories.push_back(std::move(t));
  }
  return pool;
}

// ---------------------------------------------------------------------------
// Playback frames

struct CellDescriptor {
  Position pos;
  std::string glyphs;  // "" for an empty cell
  int quadrant = 0;
  int owner = 0;
};

struct Frame {
  int step = 0;
  int grid_size = 0;
  std::vector<CellDescriptor> cells;  // row-major
};

struct Glyphs {
  char main = 'M';
  char background = 'B';
  char apple = 'A';
  char garbage = 'G';
  char empty = '.';
};

/// Glyphs of a cell in canonical order: main, background agents, apples, garbage.
inline std::string cell_glyphs(const GridState& s, Position p, const Glyphs& g = {}) {
  std::string out;
  if (s.main_agent == p) out += g.main;
  for (const auto& b : s.background)
    if (b.pos == p) out += g.background;
  out.append(static_cast<std::size_t>(count_at(s.apples, p)), g.apple);
  out.append(static_cast<std::size_t>(count_at(s.garbage, p)), g.garbage);
  return out;
}

inline std::vector<Frame> render_frames(const Trajectory& traj) {
  std::vector<Frame> frames;
  frames.reserve(traj.states.size());
  const int n = traj.config.grid_size;
  for (const auto& s : traj.states) {
    Frame f{s.step_index, n, {}};
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const Position p{x, y};
        const int qd = quadrant_of(p, traj.config.quadrant_size);
        f.cells.push_back({p, cell_glyphs(s, p), qd, s.owner_of(qd)});
      }
    frames.push_back(std::move(f));
  }
  return frames;
}

// ---------------------------------------------------------------------------
// Serialization

using nlohmann::json;

inline void to_json(json& j, const Position& p) { j = json::array({p.x, p.y}); }
inline void from_json(const json& j, Position& p) {
  p.x = j.at(0).get<int>();
  p.y = j.at(1).get<int>();
}

inline void to_json(json& j, const EnvConfig& c) {
  json mix = json::array();
  for (const auto& [name, w] : c.policy_mix) mix.push_back(json::array({name, w}));
  j = json{{"grid_size", c.grid_size},         {"quadrant_size", c.quadrant_size},
           {"n_apples", c.n_apples},           {"n_garbage", c.n_garbage},
           {"max_items_per_cell", c.max_items_per_cell},
           {"episode_length", c.episode_length}, {"policy_mix", mix}};
}
inline void from_json(const json& j, EnvConfig& c) {
  c = EnvConfig{};
  c.grid_size = j.value("grid_size", c.grid_size);
  c.quadrant_size = j.value("quadrant_size", c.quadrant_size);
  c.n_apples = j.value("n_apples", c.n_apples);
  c.n_garbage = j.value("n_garbage", c.n_garbage);
  c.max_items_per_cell = j.value("max_items_per_cell", c.max_items_per_cell);
  c.episode_length = j.value("episode_length", c.episode_length);
  if (j.contains("policy_mix")) {
    c.policy_mix.clear();
    for (const auto& e : j.at("policy_mix"))
      c.policy_mix.emplace_back(e.at(0).get<std::string>(), e.at(1).get<double>());
  }
}

inline json items_to_json(const ItemMap& items) {
  json a = json::array();
  for (const auto& [p, n] : items) a.push_back(json::array({p.x, p.y, n}));
  return a;
}
inline ItemMap items_from_json(const json& j) {
  ItemMap items;
  for (const auto& e : j) items[{e.at(0).get<int>(), e.at(1).get<int>()}] = e.at(2).get<int>();
  return items;
}

inline void to_json(json& j, const GridState& s) {
  json bg = json::array();
  for (const auto& b : s.background) bg.push_back(json{{"pos", b.pos}, {"stationary", b.stationary}});
  j = json{{"step", s.step_index},
           {"main", s.main_agent},
           {"background", bg},
           {"apples", items_to_json(s.apples)},
           {"garbage", items_to_json(s.garbage)},
           {"ownership", s.ownership}};
}
inline void from_json(const json& j, GridState& s) {
  s.step_index = j.at("step").get<int>();
  s.main_agent = j.at("main").get<Position>();
  const auto& bg = j.at("background");
  if (bg.size() != kBackgroundCount) fail(ErrorKind::ParseError, "expected 3 background agents");
  for (int i = 0; i < kBackgroundCount; ++i) {
    s.background[i].pos = bg.at(i).at("pos").get<Position>();
    s.background[i].stationary = bg.at(i).at("stationary").get<bool>();
  }
  s.apples = items_from_json(j.at("apples"));
  s.garbage = items_from_json(j.at("garbage"));
  s.ownership = j.at("ownership").get<std::array<int, 4>>();
}

inline void to_json(json& j, const Event& e) {
  j = json{{"kind", to_string(e.kind)}, {"agent", e.agent}, {"from", e.from}, {"to", e.to}};
  if (e.quadrant >= 0) j["quadrant"] = e.quadrant;
}
inline void from_json(const json& j, Event& e) {
  e.kind = parse_event_kind(j.at("kind").get<std::string>());
  e.agent = j.at("agent").get<int>();
  e.from = j.at("from").get<Position>();
  e.to = j.at("to").get<Position>();
  e.quadrant = j.value("quadrant", -1);
}

inline void to_json(json& j, const Trajectory& t) {
  j = json{{"schema", kPoolSchema}, {"id", t.id},         {"seed", t.seed},
           {"policy", t.policy},    {"config", t.config}, {"states", t.states},
           {"events", t.events}};
}
inline void from_json(const json& j, Trajectory& t) {
  if (j.value("schema", std::string{}) != kPoolSchema)
    fail(ErrorKind::ParseError, std::string("expected schema ") + kPoolSchema);
  t.id = j.at("id").get<std::string>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.policy = j.at("policy").get<std::string>();
  t.config = j.at("config").get<EnvConfig>();
  t.states = j.at("states").get<std::vector<GridState>>();
  t.events = j.at("events").get<std::vector<std::vector<Event>>>();
}

inline void to_json(json& j, const CellDescriptor& c) {
  j = json{{"pos", c.pos}, {"glyphs", c.glyphs}, {"quadrant", c.quadrant}, {"owner", c.owner}};
}
inline void to_json(json& j, const Frame& f) {
  j = json{{"step", f.step}, {"grid_size", f.grid_size}, {"cells", f.cells}};
}

/// One trajectory per line; each line carries the pool seed as well.
inline void write_pool(std::ostream& out, const TrajectoryPool& pool) {
  for (const auto& t : pool.trajectories) {
    json j = t;
    j["pool_seed"] = pool.seed;
    out << j.dump() << '\n';
  }
}

inline TrajectoryPool read_pool(std::istream& in) {
  TrajectoryPool pool;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      pool.seed = j.value("pool_seed", std::uint64_t{0});
      pool.trajectories.push_back(j.get<Trajectory>());
    } catch (const json::exception& e) {
      throw ParseError(lineno, e.what());
    } catch (const Error& e) {
      throw ParseError(lineno, e.detail());
    }
  }
  return pool;
}

inline void save_pool(const std::string& path, const TrajectoryPool& pool) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path);
  write_pool(out, pool);
}

inline TrajectoryPool load_pool(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot read " + path);
  return read_pool(in);
}

}  // namespace irda::env

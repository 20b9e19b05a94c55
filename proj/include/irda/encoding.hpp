#pragma once

// Trajectory encodings: a dense numeric tensor for clustering and supervised
// baselines, and the annotated ASCII document ("irda-ascii/1") that the
// language model reads.

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "irda/env.hpp"

namespace irda::encoding {

inline constexpr const char* kAsciiFormat = "irda-ascii/1";
inline constexpr int kChannels = 3;

// ---------------------------------------------------------------------------
// Numeric

/// Shape (steps + 1, 3, n, n), row-major. Channel 0 counts agents (all four,
/// co-occupancy adds up), channel 1 apples, channel 2 garbage.
struct NumericEncoding {
  std::size_t frames = 0;
  std::size_t grid = 0;
  std::vector<double> flat;

  std::size_t index(std::size_t t, std::size_t channel, std::size_t y, std::size_t x) const {
    return ((t * kChannels + channel) * grid + y) * grid + x;
  }
  double at(std::size_t t, std::size_t channel, std::size_t y, std::size_t x) const {
    return flat[index(t, channel, y, x)];
  }
};

inline NumericEncoding encode_numeric(const env::Trajectory& traj) {
  NumericEncoding e;
  e.frames = traj.states.size();
  e.grid = static_cast<std::size_t>(traj.config.grid_size);
  e.flat.assign(e.frames * kChannels * e.grid * e.grid, 0.0);
  for (std::size_t t = 0; t < e.frames; ++t) {
    const auto& s = traj.states[t];
    for (int a = 0; a < env::kAgentCount; ++a) {
      const auto p = s.agent_position(a);
      e.flat[e.index(t, 0, p.y, p.x)] += 1.0;
    }
    for (const auto& [p, n] : s.apples) e.flat[e.index(t, 1, p.y, p.x)] = n;
    for (const auto& [p, n] : s.garbage) e.flat[e.index(t, 2, p.y, p.x)] = n;
  }
  return e;
}

// ---------------------------------------------------------------------------
// ASCII

using Legend = env::Glyphs;

/// What the grid part of a step block determines. Background agents are
/// indistinguishable in the text, so they are kept as a sorted list.
struct PartialState {
  int step = 0;
  env::Position main_agent;
  std::vector<env::Position> background;
  env::ItemMap apples;
  env::ItemMap garbage;

  friend bool operator==(const PartialState&, const PartialState&) = default;
};

inline PartialState partial_of(const env::GridState& s) {
  PartialState p{s.step_index, s.main_agent, {}, s.apples, s.garbage};
  for (const auto& b : s.background) p.background.push_back(b.pos);
  std::sort(p.background.begin(), p.background.end());
  return p;
}

inline constexpr std::string_view kRowSeparator = "-----------------------";
inline constexpr std::string_view kStepSeparator = "=========================";

namespace detail {

inline std::string cell_text(const PartialState& s, env::Position p, const Legend& g) {
  std::string out;
  if (s.main_agent == p) out += g.main;
  for (const auto& b : s.background)
    if (b == p) out += g.background;
  out.append(static_cast<std::size_t>(env::count_at(s.apples, p)), g.apple);
  out.append(static_cast<std::size_t>(env::count_at(s.garbage, p)), g.garbage);
  if (out.empty()) out += g.empty;
  return out;
}

inline std::string pos_text(env::Position p) {
  return "[" + std::to_string(p.x) + ", " + std::to_string(p.y) + "]";
}

inline std::string agent_name(int agent) {
  return agent == env::kMainAgent ? "Main agent" : "Background agent " + std::to_string(agent);
}

inline std::string quadrant_phrase(int agent, int owner) {
  if (owner == agent) return "the quadrant (orchard) that it owns";
  if (owner == env::kMainAgent) return "the quadrant (orchard) owned by the main agent";
  return "the quadrant (orchard) owned by background agent " + std::to_string(owner);
}

inline std::string event_line(const env::Event& e, const env::GridState& after) {
  const std::string who = agent_name(e.agent);
  switch (e.kind) {
    case env::EventKind::moved:
      return who + " moved from " + pos_text(e.from) + " to " + pos_text(e.to) + ". ";
    case env::EventKind::left_quadrant:
      return who + " left " + quadrant_phrase(e.agent, after.owner_of(e.quadrant)) + ". ";
    case env::EventKind::entered_quadrant:
      return who + " entered " + quadrant_phrase(e.agent, after.owner_of(e.quadrant)) + ". ";
    case env::EventKind::collected_apple:
      return who + " picked up an apple at " + pos_text(e.to) + ". ";
    case env::EventKind::collected_garbage:
      return who + " picked up garbage at " + pos_text(e.to) + ". ";
  }
  return {};
}

inline std::string ownership_line(const env::GridState& s, int quadrant_size, const Legend& g) {
  const int owner = s.owner_of(env::quadrant_of(s.main_agent, quadrant_size));
  std::string head = std::string("The main agent (") + g.main + ") is in the \n";
  if (owner == env::kMainAgent) return head + "quadrant (orchard) that it owns.";
  return head + "quadrant (orchard) owned by background agent " + std::to_string(owner) + ".";
}

inline bool is_cell_token(std::string_view tok, const Legend& g) {
  if (tok.empty()) return false;
  if (tok.size() == 1 && tok[0] == g.empty) return true;
  std::size_t i = 0;
  if (tok[i] == g.main) ++i;
  for (char c : {g.background, g.apple, g.garbage})
    while (i < tok.size() && tok[i] == c) ++i;
  return i == tok.size();
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

/// The six cell tokens of a grid row. The boundary bar may touch a wide
/// cell ("|MB"), so the row is split on it before tokenizing.
inline std::optional<std::vector<std::string_view>> row_cells(std::string_view line, const Legend& g) {
  const auto bar = line.find('|');
  if (bar == std::string_view::npos || line.find('|', bar + 1) != std::string_view::npos) return std::nullopt;
  auto cells = split_ws(line.substr(0, bar));
  const auto right = split_ws(line.substr(bar + 1));
  if (cells.size() != 3 || right.size() != 3) return std::nullopt;
  cells.insert(cells.end(), right.begin(), right.end());
  for (auto tok : cells)
    if (!is_cell_token(tok, g)) return std::nullopt;
  return cells;
}

inline bool is_grid_row(std::string_view line, const Legend& g) { return row_cells(line, g).has_value(); }

inline bool is_row_separator(std::string_view line) {
  return line.size() >= 3 && line.find_first_not_of('-') == std::string_view::npos;
}

}  // namespace detail

/// The seven grid lines of one step block, each terminated by '\n'.
/// Cells are right-aligned in two columns; wider cells push the row right.
inline std::string render_grid(const PartialState& s, int grid_size, const Legend& g = {}) {
  if (grid_size != 6) fail(ErrorKind::UnsupportedLayout, "ASCII format requires a 6x6 grid");
  std::string out;
  for (int y = 0; y < grid_size; ++y) {
    if (y == 3) {
      out += kRowSeparator;
      out += '\n';
    }
    for (int x = 0; x < grid_size; ++x) {
      if (x == 3)
        out += " |";
      else if (x > 0)
        out += "  ";
      const std::string cell = detail::cell_text(s, {x, y}, g);
      if (cell.size() < 2) out += ' ';
      out += cell;
    }
    out += '\n';
  }
  return out;
}

struct AsciiEncoding {
  std::string text;
  std::vector<std::size_t> step_offsets;
};

inline AsciiEncoding encode_ascii(const env::Trajectory& traj, const Legend& legend = {}) {
  const auto& cfg = traj.config;
  if (cfg.grid_size != 6 || cfg.quadrant_size != 3)
    fail(ErrorKind::UnsupportedLayout, "ASCII format requires a 6x6 grid of 3x3 quadrants");
  AsciiEncoding enc;
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    const auto& s = traj.states[t];
    if (t > 0) {
      enc.text += kStepSeparator;
      enc.text += '\n';
    }
    enc.step_offsets.push_back(enc.text.size());
    enc.text += "----- Step: " + std::to_string(t) + " -----\n";
    if (t == 0) {
      enc.text += detail::ownership_line(s, cfg.quadrant_size, legend) + "\n";
    } else if (t - 1 < traj.events.size()) {
      for (const auto& e : traj.events[t - 1]) enc.text += detail::event_line(e, s) + "\n";
    }
    enc.text += render_grid(partial_of(s), cfg.grid_size, legend);
  }
  return enc;
}

/// Recovers positions and item counts from an encode_ascii document.
/// Annotation lines are skipped.
inline std::vector<PartialState> parse_ascii(std::string_view text, const Legend& g = {}) {
  std::vector<std::string_view> lines;
  for (std::size_t i = 0; i <= text.size();) {
    const std::size_t j = std::min(text.find('\n', i), text.size());
    lines.push_back(text.substr(i, j - i));
    i = j + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();

  std::vector<PartialState> out;
  std::size_t i = 0;
  auto lineno = [&] { return i + 1; };
  while (i < lines.size()) {
    const std::string_view header = lines[i];
    constexpr std::string_view prefix = "----- Step: ";
    constexpr std::string_view suffix = " -----";
    if (header.size() <= prefix.size() + suffix.size() || header.substr(0, prefix.size()) != prefix ||
        header.substr(header.size() - suffix.size()) != suffix)
      throw ParseError(lineno(), "expected step header");
    const auto num = header.substr(prefix.size(), header.size() - prefix.size() - suffix.size());
    if (num.empty() || num.find_first_not_of("0123456789") != std::string_view::npos)
      throw ParseError(lineno(), "bad step number");
    PartialState s;
    s.step = std::stoi(std::string(num));
    ++i;

    while (i < lines.size() && !detail::is_grid_row(lines[i], g)) {
      if (lines[i] == kStepSeparator || detail::is_row_separator(lines[i]))
        throw ParseError(lineno(), "boundary line before grid rows");
      ++i;
    }
    bool have_main = false;
    for (int y = 0; y < 6; ++y) {
      if (y == 3) {
        if (i >= lines.size() || lines[i] != kRowSeparator)
          throw ParseError(lineno(), "expected horizontal boundary row");
        ++i;
      }
      if (i >= lines.size() || !detail::is_grid_row(lines[i], g))
        throw ParseError(lineno(), "expected grid row");
      const auto toks = *detail::row_cells(lines[i], g);
      for (std::size_t k = 0; k < toks.size(); ++k) {
        const env::Position p{static_cast<int>(k), y};
        const auto tok = toks[k];
        if (tok.size() == 1 && tok[0] == g.empty) continue;
        for (char c : tok) {
          if (c == g.main) {
            if (have_main) throw ParseError(lineno(), "more than one main agent");
            s.main_agent = p;
            have_main = true;
          } else if (c == g.background) {
            s.background.push_back(p);
          } else if (c == g.apple) {
            ++s.apples[p];
          } else if (c == g.garbage) {
            ++s.garbage[p];
          }
        }
      }
      ++i;
    }
    if (!have_main) throw ParseError(lineno(), "step has no main agent");
    std::sort(s.background.begin(), s.background.end());
    out.push_back(std::move(s));

    if (i < lines.size()) {
      if (lines[i] != kStepSeparator) throw ParseError(lineno(), "expected step separator");
      ++i;
      if (i >= lines.size()) throw ParseError(lineno(), "dangling step separator");
    }
  }
  return out;
}

}  // namespace irda::encoding

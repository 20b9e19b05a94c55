#pragma once

// Moral Machine dilemmas: stay-vs-swerve scenarios, their 26-dimensional
// difference vectors, and the natural-language rendering fed to the reward
// model.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "irda/core/error.hpp"
#include "irda/core/random.hpp"

namespace irda::mm {

inline constexpr const char* kScenarioSchema = "irda-mm/1";
inline constexpr std::size_t kCharacterTypes = 20;
inline constexpr std::size_t kVectorDim = 26;
inline constexpr int kMaxCharacters = 5;

struct CharacterType {
  std::string_view column;
  std::string_view singular;
  std::string_view plural;
};

// Column order of the public dataset.
inline constexpr std::array<CharacterType, kCharacterTypes> kCharacters{{
    {"Man", "man", "men"},
    {"Woman", "woman", "women"},
    {"Pregnant", "pregnant woman", "pregnant women"},
    {"Stroller", "baby in a stroller", "babies in strollers"},
    {"OldMan", "elderly man", "elderly men"},
    {"OldWoman", "elderly woman", "elderly women"},
    {"Boy", "boy", "boys"},
    {"Girl", "girl", "girls"},
    {"Homeless", "homeless person", "homeless people"},
    {"LargeWoman", "large woman", "large women"},
    {"LargeMan", "large man", "large men"},
    {"Criminal", "criminal", "criminals"},
    {"MaleExecutive", "male executive", "male executives"},
    {"FemaleExecutive", "female executive", "female executives"},
    {"FemaleAthlete", "female athlete", "female athletes"},
    {"MaleAthlete", "male athlete", "male athletes"},
    {"FemaleDoctor", "female doctor", "female doctors"},
    {"MaleDoctor", "male doctor", "male doctors"},
    {"Dog", "dog", "dogs"},
    {"Cat", "cat", "cats"},
}};

/// Ordinal encoding used in the vector: none = 0, green = 1, red = 2.
enum class CrossingSignal { none = 0, green = 1, red = 2 };

struct Outcome {
  int intervention = 0;
  int ped_ped = 0;
  int barrier = 0;
  CrossingSignal crossing_signal = CrossingSignal::none;
  std::array<int, kCharacterTypes> character_counts{};
  int number_of_characters = 0;
  int diff_number_of_characters = 0;

  friend bool operator==(const Outcome&, const Outcome&) = default;
};

struct Scenario {
  std::string id;
  Outcome stay;
  Outcome swerve;
  /// Participant decision when known ("stay" or "swerve").
  std::optional<std::string> choice;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

using ScenarioVector = std::array<double, kVectorDim>;

inline int character_sum(const Outcome& o) {
  int n = 0;
  for (int c : o.character_counts) n += c;
  return n;
}

inline void validate(const Scenario& s) {
  auto bad = [&](const std::string& m) {
    fail(ErrorKind::ConfigInvalid, "scenario " + s.id + ": " + m);
  };
  for (const Outcome* o : {&s.stay, &s.swerve}) {
    if (o->number_of_characters < 1 || o->number_of_characters > kMaxCharacters)
      bad("each outcome needs 1..5 characters");
    if (o->number_of_characters != character_sum(*o)) bad("character counts do not sum");
    for (int c : o->character_counts)
      if (c < 0 || c > kMaxCharacters) bad("character count out of range");
    if ((o->intervention | o->barrier | o->ped_ped) & ~1) bad("flags must be 0/1");
    if (o->barrier == 1 && o->crossing_signal != CrossingSignal::none)
      bad("passengers behind a barrier have no crossing signal");
  }
  if (s.stay.intervention + s.swerve.intervention != 1) bad("exactly one outcome intervenes");
}

/// Componentwise stay - swerve over the 26 features.
inline ScenarioVector vectorize(const Scenario& s) {
  auto features = [](const Outcome& o) {
    ScenarioVector f{};
    f[0] = o.intervention;
    f[1] = o.ped_ped;
    f[2] = o.barrier;
    f[3] = static_cast<double>(static_cast<int>(o.crossing_signal));
    f[4] = o.number_of_characters;
    f[5] = o.diff_number_of_characters;
    for (std::size_t i = 0; i < kCharacterTypes; ++i) f[6 + i] = o.character_counts[i];
    return f;
  };
  const auto a = features(s.stay);
  const auto b = features(s.swerve);
  ScenarioVector d{};
  for (std::size_t i = 0; i < kVectorDim; ++i) d[i] = a[i] - b[i];
  return d;
}

struct Standardized {
  std::vector<std::vector<double>> vectors;
  std::vector<double> mean;
  std::vector<double> std;
};

/// Per-dimension z-score with the population standard deviation.
/// Zero-variance dimensions are centred but not scaled.
inline Standardized standardize(const std::vector<std::vector<double>>& vectors) {
  if (vectors.size() < 2) fail(ErrorKind::TooFewSamples, "standardize needs >= 2 vectors");
  const std::size_t dim = vectors.front().size();
  for (const auto& v : vectors)
    if (v.size() != dim) fail(ErrorKind::DimensionMismatch, "vectors differ in length");
  const double n = static_cast<double>(vectors.size());
  Standardized out{vectors, std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
  for (std::size_t d = 0; d < dim; ++d) {
    double sum = 0.0;
    for (const auto& v : vectors) sum += v[d];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& v : vectors) ss += (v[d] - mean) * (v[d] - mean);
    const double sd = std::sqrt(ss / n);
    out.mean[d] = mean;
    out.std[d] = sd;
    const bool scale = sd > 1e-12;
    for (auto& v : out.vectors) v[d] = scale ? (v[d] - mean) / sd : v[d] - mean;
  }
  return out;
}

inline std::vector<std::vector<double>> to_rows(const std::vector<ScenarioVector>& vs) {
  std::vector<std::vector<double>> rows;
  rows.reserve(vs.size());
  for (const auto& v : vs) rows.emplace_back(v.begin(), v.end());
  return rows;
}

// ---------------------------------------------------------------------------
// Text rendering

namespace detail {

inline std::string with_article(std::string_view noun) {
  const char c = noun.empty() ? 'x' : noun.front();
  const bool vowel = c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
  return std::string(vowel ? "An " : "A ") + std::string(noun);
}

inline std::string outcome_paragraph(const Outcome& o) {
  const int n = o.number_of_characters;
  std::string s;
  if (o.barrier == 1) {
    s += n == 1 ? "crash into a concrete barrier, killing the 1 passenger in the car. "
                  "The passenger is:"
                : "crash into a concrete barrier, killing the " + std::to_string(n) +
                      " passengers in the car. The group of passengers include:";
    return s;
  }
  std::string crossing;
  switch (o.crossing_signal) {
    case CrossingSignal::red: crossing = "crossing against a red do not walk signal"; break;
    case CrossingSignal::green: crossing = "crossing with a green walk signal"; break;
    case CrossingSignal::none: crossing = "crossing the road"; break;
  }
  if (n == 1) return "run over 1 pedestrian who is " + crossing + ". The pedestrian is:";
  return "run over a group of " + std::to_string(n) + " pedestrians who are " + crossing +
         ". The group of pedestrians include:";
}

inline std::string character_lines(const Outcome& o) {
  std::string s;
  for (std::size_t i = 0; i < kCharacterTypes; ++i) {
    const int c = o.character_counts[i];
    if (c == 0) continue;
    s += "    - ";
    s += c == 1 ? with_article(kCharacters[i].singular)
                : std::to_string(c) + " " + std::string(kCharacters[i].plural);
    s += '\n';
  }
  return s;
}

}  // namespace detail

/// Deterministic description: preamble and stay outcome in one paragraph,
/// then the swerve outcome; characters as indented bullets. Prose is not
/// line-wrapped.
inline std::string render_text(const Scenario& s) {
  std::string out =
      "The brakes of a self-driving car have failed. The self-driving car can continue "
      "driving straight ahead or swerve. If the car continues straight ahead, it will ";
  out += detail::outcome_paragraph(s.stay) + "\n";
  out += detail::character_lines(s.stay);
  out += "If the car swerves, it will " + detail::outcome_paragraph(s.swerve) + "\n";
  out += detail::character_lines(s.swerve);
  return out;
}

// ---------------------------------------------------------------------------
// Generation

namespace detail {

inline Outcome random_outcome(Rng& rng, bool barrier) {
  Outcome o;
  o.barrier = barrier ? 1 : 0;
  o.crossing_signal =
      barrier ? CrossingSignal::none : static_cast<CrossingSignal>(uniform_index(rng, 3));
  const int n = 1 + static_cast<int>(uniform_index(rng, kMaxCharacters));
  for (int i = 0; i < n; ++i) ++o.character_counts[uniform_index(rng, kCharacterTypes)];
  o.number_of_characters = n;
  return o;
}

inline void fill_derived(Scenario& s) {
  const int ped_ped = (s.stay.barrier == 0 && s.swerve.barrier == 0) ? 1 : 0;
  const int diff = std::abs(s.stay.number_of_characters - s.swerve.number_of_characters);
  for (Outcome* o : {&s.stay, &s.swerve}) {
    o->ped_ped = ped_ped;
    o->diff_number_of_characters = diff;
  }
}

}  // namespace detail

inline std::vector<Scenario> generate_scenarios(std::size_t n, std::uint64_t seed) {
  if (n < 1) fail(ErrorKind::ConfigInvalid, "n must be >= 1");
  Rng rng(derive_seed(seed, "moral-machine"));
  std::vector<Scenario> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    // 0: pedestrians vs pedestrians, 1: passengers on stay, 2: passengers on swerve
    const auto layout = uniform_index(rng, 3);
    Scenario s;
    s.id = "mm" + std::to_string(i);
    s.stay = detail::random_outcome(rng, layout == 1);
    s.swerve = detail::random_outcome(rng, layout == 2);
    s.stay.intervention = 0;
    s.swerve.intervention = 1;
    detail::fill_derived(s);
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files

using nlohmann::json;

inline void to_json(json& j, const Outcome& o) {
  json counts = json::object();
  for (std::size_t i = 0; i < kCharacterTypes; ++i)
    if (o.character_counts[i] != 0) counts[std::string(kCharacters[i].column)] = o.character_counts[i];
  j = json{{"intervention", o.intervention},
           {"ped_ped", o.ped_ped},
           {"barrier", o.barrier},
           {"crossing_signal", static_cast<int>(o.crossing_signal)},
           {"characters", counts},
           {"number_of_characters", o.number_of_characters},
           {"diff_number_of_characters", o.diff_number_of_characters}};
}

inline void from_json(const json& j, Outcome& o) {
  o.intervention = j.at("intervention").get<int>();
  o.ped_ped = j.at("ped_ped").get<int>();
  o.barrier = j.at("barrier").get<int>();
  const int sig = j.at("crossing_signal").get<int>();
  if (sig < 0 || sig > 2) fail(ErrorKind::ParseError, "crossing_signal must be 0..2");
  o.crossing_signal = static_cast<CrossingSignal>(sig);
  o.character_counts.fill(0);
  for (const auto& [name, count] : j.at("characters").items()) {
    bool found = false;
    for (std::size_t i = 0; i < kCharacterTypes; ++i)
      if (kCharacters[i].column == name) {
        o.character_counts[i] = count.get<int>();
        found = true;
      }
    if (!found) fail(ErrorKind::ParseError, "unknown character type '" + name + "'");
  }
  o.number_of_characters = j.at("number_of_characters").get<int>();
  o.diff_number_of_characters = j.at("diff_number_of_characters").get<int>();
}

inline void to_json(json& j, const Scenario& s) {
  j = json{{"schema", kScenarioSchema}, {"id", s.id}, {"stay", s.stay}, {"swerve", s.swerve}};
  if (s.choice) j["choice"] = *s.choice;
}

inline void from_json(const json& j, Scenario& s) {
  if (j.value("schema", std::string{}) != kScenarioSchema)
    fail(ErrorKind::ParseError, std::string("expected schema ") + kScenarioSchema);
  s.id = j.at("id").get<std::string>();
  s.stay = j.at("stay").get<Outcome>();
  s.swerve = j.at("swerve").get<Outcome>();
  s.choice.reset();
  if (j.contains("choice")) s.choice = j.at("choice").get<std::string>();
}

inline void write_scenarios(std::ostream& out, const std::vector<Scenario>& scenarios) {
  for (const auto& s : scenarios) out << json(s).dump() << '\n';
}

inline std::vector<Scenario> read_scenarios(std::istream& in) {
  std::vector<Scenario> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line).get<Scenario>());
      validate(out.back());
    } catch (const json::exception& e) {
      throw ParseError(lineno, e.what());
    } catch (const Error& e) {
      throw ParseError(lineno, e.detail());
    }
  }
  return out;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace detail

/// Columns the importer requires, spelled as in the public dataset.
inline std::vector<std::string> required_csv_columns() {
  std::vector<std::string> cols{"ResponseID",         "Intervention", "PedPed",
                                "Barrier",            "CrossingSignal", "NumberOfCharacters",
                                "DiffNumberOFCharacters"};
  for (const auto& c : kCharacters) cols.emplace_back(c.column);
  return cols;
}

/// Imports the two-rows-per-response CSV layout. Rows are paired by
/// ResponseID and keyed on Intervention (0 = stay, 1 = swerve). When a
/// "Saved" column is present the participant choice is recovered from it.
inline std::vector<Scenario> import_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty CSV");
  const auto header = detail::split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const auto& name : required_csv_columns())
    if (!col.count(name)) throw ParseError(1, "missing column '" + name + "'");
  const bool has_saved = col.count("Saved") > 0;

  struct Half {
    Outcome outcome;
    int saved = -1;
  };
  std::map<std::string, std::vector<Half>> rows;
  std::vector<std::string> order;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() < header.size()) throw ParseError(lineno, "short row");
    auto num = [&](const std::string& name) {
      try {
        return static_cast<int>(std::lround(std::stod(cells[col[name]])));
      } catch (const std::exception&) {
        throw ParseError(lineno, "non-numeric value in column '" + name + "'");
      }
    };
    Half h;
    h.outcome.intervention = num("Intervention");
    h.outcome.ped_ped = num("PedPed");
    h.outcome.barrier = num("Barrier");
    const int sig = num("CrossingSignal");
    if (sig < 0 || sig > 2) throw ParseError(lineno, "CrossingSignal must be 0..2");
    h.outcome.crossing_signal = static_cast<CrossingSignal>(sig);
    h.outcome.number_of_characters = num("NumberOfCharacters");
    h.outcome.diff_number_of_characters = num("DiffNumberOFCharacters");
    for (std::size_t i = 0; i < kCharacterTypes; ++i)
      h.outcome.character_counts[i] = num(std::string(kCharacters[i].column));
    if (has_saved) h.saved = num("Saved");
    const auto& id = cells[col["ResponseID"]];
    if (!rows.count(id)) order.push_back(id);
    rows[id].push_back(h);
  }

  std::vector<Scenario> out;
  for (const auto& id : order) {
    const auto& halves = rows[id];
    if (halves.size() != 2) fail(ErrorKind::ParseError, "response " + id + " does not have two rows");
    const bool first_is_stay = halves[0].outcome.intervention == 0;
    const Half& stay = first_is_stay ? halves[0] : halves[1];
    const Half& swerve = first_is_stay ? halves[1] : halves[0];
    Scenario s{id, stay.outcome, swerve.outcome, std::nullopt};
    if (stay.saved >= 0) s.choice = stay.saved == 1 ? "swerve" : "stay";
    validate(s);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace irda::mm

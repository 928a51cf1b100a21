#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mctrack/error.hpp"
#include "mctrack/io.hpp"

namespace mctrack {

// exact: pace = step_period / step_length.
// paper_rounded: profiles carrying a published rounded pace use it instead
// (blind: 4.66 s/m rather than 2.7/0.58 = 4.65517...).
enum class Mode { exact, paper_rounded };

inline Mode parse_mode(const std::string& s) {
  if (s == "exact") return Mode::exact;
  if (s == "paper_rounded") return Mode::paper_rounded;
  throw ValidationError("unknown mode '" + s + "' (expected exact or paper_rounded)");
}

inline const char* to_string(Mode m) { return m == Mode::exact ? "exact" : "paper_rounded"; }

struct WalkingProfile {
  std::string name;
  double step_length = 0.0;  // m
  double step_period = 0.0;  // s per step
  std::optional<double> rounded_pace;  // s per m, used in paper_rounded mode

  WalkingProfile(std::string n, double length, double period, std::optional<double> rounded = std::nullopt)
      : name(std::move(n)), step_length(length), step_period(period), rounded_pace(rounded) {
    if (!(step_length > 0.0) || !std::isfinite(step_length))
      throw ValidationError("profile '" + name + "': step_length must be > 0");
    if (!(step_period > 0.0) || !std::isfinite(step_period))
      throw ValidationError("profile '" + name + "': step_period must be > 0");
    if (rounded_pace && !(*rounded_pace > 0.0))
      throw ValidationError("profile '" + name + "': rounded pace must be > 0");
  }

  double speed() const { return step_length / step_period; }  // m/s

  double pace(Mode mode) const {
    if (mode == Mode::paper_rounded && rounded_pace) return *rounded_pace;
    return step_period / step_length;
  }
};

inline constexpr double kStepLengthM = 0.58;      // 23.2 in
inline constexpr double kNormalStepPeriodS = 1.0;
inline constexpr double kBlindStepPeriodS = 2.7;
inline constexpr double kBlindRoundedPace = 4.66;  // s/m as published

struct BuiltinProfiles {
  WalkingProfile normal;
  WalkingProfile blind;
};

inline BuiltinProfiles builtin_profiles() {
  return {WalkingProfile("normal", kStepLengthM, kNormalStepPeriodS),
          WalkingProfile("blind", kStepLengthM, kBlindStepPeriodS, kBlindRoundedPace)};
}

inline WalkingProfile builtin_profile(const std::string& name) {
  auto b = builtin_profiles();
  if (name == "normal") return b.normal;
  if (name == "blind") return b.blind;
  throw ValidationError("unknown builtin profile '" + name + "' (expected normal or blind)");
}

inline double travel_time(const WalkingProfile& p, double distance, Mode mode = Mode::exact) {
  if (!(distance >= 0.0)) throw ValidationError("travel_time: distance must be >= 0");
  if (mode == Mode::exact) return distance * p.step_period / p.step_length;
  return distance * p.pace(mode);
}

inline double distance_of_steps(const WalkingProfile& p, long long steps) {
  if (steps < 0) throw ValidationError("distance_of_steps: steps must be >= 0");
  return static_cast<double>(steps) * p.step_length;
}

// Whole steps nearest to the distance; halves round to even.
inline long long steps_for_distance(const WalkingProfile& p, double distance) {
  if (!(distance >= 0.0)) throw ValidationError("steps_for_distance: distance must be >= 0");
  return std::llrint(distance / p.step_length);
}

struct ComparisonRow {
  double distance = 0.0;
  double normal_time = 0.0;
  double blind_time = 0.0;
};

inline std::vector<ComparisonRow> comparison_table(const std::vector<double>& distances, Mode mode) {
  const auto [normal, blind] = builtin_profiles();
  std::vector<ComparisonRow> rows;
  rows.reserve(distances.size());
  for (double d : distances)
    rows.push_back({d, travel_time(normal, d, mode), travel_time(blind, d, mode)});
  return rows;
}

inline constexpr const char* kComparisonHeader = "distance_m,normal_time_s,blind_time_s";

inline std::string write_comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::string out = std::string(kComparisonHeader) + "\n";
  for (const auto& r : rows)
    out += io::format_double(r.distance) + "," + io::format_double(r.normal_time) + "," +
           io::format_double(r.blind_time) + "\n";
  return out;
}

inline std::vector<ComparisonRow> read_comparison_csv(const std::string& text) {
  const auto ls = io::lines(text);
  if (ls.empty() || io::trim(ls.front()) != kComparisonHeader)
    throw ParseError(std::string("comparison CSV: expected header '") + kComparisonHeader + "'");
  std::vector<ComparisonRow> rows;
  for (std::size_t i = 1; i < ls.size(); ++i) {
    if (io::trim(ls[i]).empty()) continue;
    const auto cells = io::split(ls[i], ',');
    const auto where = "comparison CSV line " + std::to_string(i + 1);
    if (cells.size() != 3) throw ParseError(where + ": expected 3 columns");
    rows.push_back({io::parse_double(cells[0], where), io::parse_double(cells[1], where),
                    io::parse_double(cells[2], where)});
  }
  return rows;
}

// One number per line; blank lines are skipped.
inline std::vector<double> read_distances(const std::string& text) {
  std::vector<double> out;
  int lineno = 0;
  for (const auto& line : io::lines(text)) {
    ++lineno;
    if (io::trim(line).empty()) continue;
    const double d = io::parse_double(line, "distances line " + std::to_string(lineno));
    if (!(d >= 0.0)) throw ValidationError("distances line " + std::to_string(lineno) + ": negative distance");
    out.push_back(d);
  }
  return out;
}

// {"name": ..., "step_length_m": ..., "step_period_s": ..., "rounded_pace_s_per_m": ... (optional)}
inline WalkingProfile load_profile(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("profile: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("profile: top level must be an object");
  auto number = [&](const char* key) {
    if (!doc.contains(key) || !doc[key].is_number())
      throw ParseError(std::string("profile: field '") + key + "' must be a number");
    return doc[key].get<double>();
  };
  if (!doc.contains("name") || !doc["name"].is_string())
    throw ParseError("profile: field 'name' must be a string");
  std::optional<double> rounded;
  if (doc.contains("rounded_pace_s_per_m")) rounded = number("rounded_pace_s_per_m");
  return WalkingProfile(doc["name"].get<std::string>(), number("step_length_m"), number("step_period_s"),
                        rounded);
}

}  // namespace mctrack

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mctrack/chain_core.hpp"
#include "mctrack/error.hpp"
#include "mctrack/geo_map.hpp"
#include "mctrack/io.hpp"
#include "mctrack/rng.hpp"
#include "mctrack/stochastic_matrix.hpp"
#include "mctrack/walk_profiles.hpp"

namespace mctrack {

inline constexpr double kDefaultEmissionSigmaM = 1.0;
inline constexpr double kDefaultSaferDistanceM = 5.0;

// ---------------------------------------------------------------------------
// Traces

struct Fix {
  double t = 0.0;  // s since trace start
  LocalPoint position;
  std::optional<State> truth_state;
};

struct Trace {
  std::vector<Fix> fixes;
  std::string profile_name;

  std::size_t size() const { return fixes.size(); }

  void validate() const {
    if (fixes.empty()) throw ValidationError("trace is empty");
    for (std::size_t k = 1; k < fixes.size(); ++k)
      if (!(fixes[k].t > fixes[k - 1].t))
        throw ValidationError("trace timestamps must be strictly increasing (fix " + std::to_string(k) + ")");
  }

  bool has_truth() const {
    return std::all_of(fixes.begin(), fixes.end(), [](const Fix& f) { return f.truth_state.has_value(); });
  }
};

inline std::string write_trace_csv(const Trace& tr) {
  const bool truth = tr.has_truth();
  std::string out = truth ? "t_s,x_m,y_m,truth_vertex\n" : "t_s,x_m,y_m\n";
  for (const auto& f : tr.fixes) {
    out += io::format_double(f.t) + "," + io::format_double(f.position.x) + "," + io::format_double(f.position.y);
    if (truth) out += "," + std::to_string(*f.truth_state);
    out += "\n";
  }
  return out;
}

inline Trace read_trace_csv(const std::string& text, std::string profile_name = {}) {
  const auto ls = io::lines(text);
  if (ls.empty()) throw ParseError("trace CSV: missing header");
  const auto header = io::trim(ls.front());
  bool truth = false;
  if (header == "t_s,x_m,y_m,truth_vertex")
    truth = true;
  else if (header != "t_s,x_m,y_m")
    throw ParseError("trace CSV: expected header 't_s,x_m,y_m[,truth_vertex]'");
  Trace tr;
  tr.profile_name = std::move(profile_name);
  for (std::size_t i = 1; i < ls.size(); ++i) {
    if (io::trim(ls[i]).empty()) continue;
    const auto where = "trace CSV line " + std::to_string(i + 1);
    const auto cells = io::split(ls[i], ',');
    if (cells.size() != (truth ? 4u : 3u)) throw ParseError(where + ": wrong column count");
    Fix f;
    f.t = io::parse_double(cells[0], where);
    f.position = {io::parse_double(cells[1], where), io::parse_double(cells[2], where)};
    if (truth) {
      const double v = io::parse_double(cells[3], where);
      if (v != std::floor(v) || v < 0) throw ParseError(where + ": truth_vertex must be a vertex id");
      f.truth_state = static_cast<State>(v);
    }
    tr.fixes.push_back(f);
  }
  tr.validate();
  return tr;
}

// ---------------------------------------------------------------------------
// Simulation

enum class Timing {
  kinematic,  // edge length / profile speed
  poisson,    // exponential dwell with the same mean (uniformized variant)
};

// Samples a walk of n_steps transitions from `start`. Each fix sits on the
// visited vertex; time advances by the edge traversal time.
inline Trace simulate_walk(const PathGraph& g, const StochasticMatrix& p, const WalkingProfile& profile,
                           State start, int n_steps, std::uint64_t seed, Timing timing = Timing::kinematic) {
  if (p.size() != g.size()) throw ValidationError("simulate_walk: matrix and graph sizes differ");
  require_state(p, start, "simulate_walk: start");
  if (n_steps < 0) throw ValidationError("simulate_walk: n_steps must be >= 0");
  Rng rng(seed);
  Trace tr;
  tr.profile_name = profile.name;
  tr.fixes.reserve(static_cast<std::size_t>(n_steps) + 1);
  State cur = start;
  double t = 0.0;
  tr.fixes.push_back({t, g.position(cur), cur});
  for (int k = 0; k < n_steps; ++k) {
    const State next = rng.discrete(p.matrix().row(cur));
    const double len = distance(g.position(cur), g.position(next));
    if (!(len > 0.0))
      throw ValidationError("simulate_walk: zero-length move between vertices " + std::to_string(cur) + " and " +
                            std::to_string(next));
    const double mean_dwell = len / profile.speed();
    t += timing == Timing::kinematic ? mean_dwell : rng.exponential(1.0 / mean_dwell);
    cur = next;
    tr.fixes.push_back({t, g.position(cur), cur});
  }
  return tr;
}

// Isotropic Gaussian displacement of every fix; truth labels are kept.
inline Trace add_noise(const Trace& tr, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ValidationError("add_noise: sigma must be >= 0");
  Trace out = tr;
  if (sigma == 0.0) return out;
  Rng rng(seed);
  for (auto& f : out.fixes) {
    const auto [dx, dy] = rng.normal_pair();
    f.position.x += sigma * dx;
    f.position.y += sigma * dy;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Estimation

// Nearest vertex per fix; ties go to the lowest id.
inline std::vector<State> snap(const Trace& tr, const PathGraph& g) {
  if (g.size() == 0) throw ValidationError("snap: graph is empty");
  std::vector<State> out;
  out.reserve(tr.size());
  for (const auto& f : tr.fixes) {
    State best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (State v = 0; v < g.size(); ++v) {
      const auto q = g.position(v);
      const double dx = q.x - f.position.x, dy = q.y - f.position.y;
      const double d2 = dx * dx + dy * dy;
      if (d2 < best_d2) {
        best_d2 = d2;
        best = v;
      }
    }
    out.push_back(best);
  }
  return out;
}

// Log emission density up to a state-independent constant.
inline double log_emission(const LocalPoint& fix, const LocalPoint& vertex, double sigma) {
  const double dx = fix.x - vertex.x, dy = fix.y - vertex.y;
  return -(dx * dx + dy * dy) / (2.0 * sigma * sigma);
}

// Joint log score of a state sequence: uniform prior, Gaussian emissions and
// chain transitions. -inf when a transition has zero probability.
inline double sequence_log_score(const std::vector<State>& seq, const Trace& tr, const PathGraph& g,
                                 const StochasticMatrix& p, double sigma) {
  if (seq.size() != tr.size()) throw ValidationError("sequence_log_score: length mismatch");
  if (seq.empty()) return 0.0;
  double s = -std::log(static_cast<double>(g.size()));
  for (std::size_t k = 0; k < seq.size(); ++k) {
    s += log_emission(tr.fixes[k].position, g.position(seq[k]), sigma);
    if (k > 0) {
      const double w = p(seq[k - 1], seq[k]);
      if (w <= 0.0) return -std::numeric_limits<double>::infinity();
      s += std::log(w);
    }
  }
  return s;
}

class SmoothingError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Most likely vertex sequence under the chain (exact dynamic programming in
// log space). Ties resolve toward the lower vertex id.
inline std::vector<State> smooth(const Trace& tr, const PathGraph& g, const StochasticMatrix& p,
                                 double emission_sigma = kDefaultEmissionSigmaM) {
  if (!(emission_sigma > 0.0)) throw ValidationError("smooth: emission_sigma must be > 0");
  if (p.size() != g.size()) throw ValidationError("smooth: matrix and graph sizes differ");
  tr.validate();
  const int n = g.size();
  const double ninf = -std::numeric_limits<double>::infinity();

  // Predecessors with positive transition probability, ascending ids.
  std::vector<std::vector<std::pair<State, double>>> preds(n);
  for (State r = 0; r < n; ++r)
    for (State s = 0; s < n; ++s)
      if (p(r, s) > 0.0) preds[s].emplace_back(r, std::log(p(r, s)));

  const std::size_t len = tr.size();
  std::vector<double> score(n), next(n);
  std::vector<std::vector<State>> back(len, std::vector<State>(n, -1));
  const double prior = -std::log(static_cast<double>(n));
  for (State s = 0; s < n; ++s) score[s] = prior + log_emission(tr.fixes[0].position, g.position(s), emission_sigma);

  for (std::size_t k = 1; k < len; ++k) {
    bool any = false;
    for (State s = 0; s < n; ++s) {
      double best = ninf;
      State arg = -1;
      for (auto [r, lp] : preds[s]) {
        const double c = score[r] + lp;
        if (c > best) {
          best = c;
          arg = r;
        }
      }
      back[k][s] = arg;
      next[s] = arg < 0 ? ninf : best + log_emission(tr.fixes[k].position, g.position(s), emission_sigma);
      any = any || arg >= 0;
    }
    if (!any)
      throw SmoothingError("smooth: no state sequence with positive prior probability reaches fix " +
                           std::to_string(k) + "; try a larger emission sigma or add self-loops to the chain");
    score.swap(next);
  }

  State last = -1;
  double best = ninf;
  for (State s = 0; s < n; ++s)
    if (score[s] > best) {
      best = score[s];
      last = s;
    }
  if (last < 0)
    throw SmoothingError("smooth: every state sequence has zero probability; try a larger emission sigma "
                         "or add self-loops to the chain");
  std::vector<State> out(len);
  out[len - 1] = last;
  for (std::size_t k = len - 1; k > 0; --k) out[k - 1] = back[k][out[k]];
  return out;
}

// Mean distance between estimated and true vertex positions.
inline double localization_error(const std::vector<State>& estimate, const Trace& tr, const PathGraph& g) {
  if (estimate.size() != tr.size())
    throw ValidationError("localization_error: estimate has " + std::to_string(estimate.size()) +
                          " states, trace has " + std::to_string(tr.size()) + " fixes");
  if (tr.fixes.empty()) throw ValidationError("localization_error: empty trace");
  double sum = 0.0;
  for (std::size_t k = 0; k < estimate.size(); ++k) {
    const auto& truth = tr.fixes[k].truth_state;
    if (!truth) throw ValidationError("localization_error: fix " + std::to_string(k) + " has no truth state");
    sum += distance(g.position(estimate[k]), g.position(*truth));
  }
  return sum / static_cast<double>(estimate.size());
}

// Blocked states hold position: their rows become a self-loop.
inline StochasticMatrix hold_on_obstacle(const StochasticMatrix& p, const std::set<State>& blocked) {
  Eigen::MatrixXd m = p.matrix();
  for (State s : blocked) {
    require_state(p, s, "hold_on_obstacle: blocked");
    m.row(s).setZero();
    m(s, s) = 1.0;
  }
  return StochasticMatrix(std::move(m), kDerivedRowTolerance);
}

// ---------------------------------------------------------------------------
// Obstacles and alerts

enum class ObstacleKind { stationary, moving };

struct Obstacle {
  std::string id;
  ObstacleKind kind = ObstacleKind::stationary;
  LocalPoint position;  // at t = 0
  double vx = 0.0, vy = 0.0;

  LocalPoint position_at(double t) const { return {position.x + vx * t, position.y + vy * t}; }
};

inline std::vector<Obstacle> load_obstacles(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("obstacles: invalid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError("obstacles: top level must be an array");
  std::vector<Obstacle> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto where = "obstacles[" + std::to_string(i) + "]";
    const auto& o = doc[i];
    if (!o.is_object()) throw ParseError(where + " must be an object");
    Obstacle ob;
    if (!o.contains("id")) throw ParseError(where + ": missing field 'id'");
    ob.id = o["id"].is_string() ? o["id"].get<std::string>() : o["id"].dump();
    if (!o.contains("kind") || !o["kind"].is_string()) throw ParseError(where + ": field 'kind' must be a string");
    const auto kind = o["kind"].get<std::string>();
    if (kind == "stationary")
      ob.kind = ObstacleKind::stationary;
    else if (kind == "moving")
      ob.kind = ObstacleKind::moving;
    else
      throw ParseError(where + ": field 'kind' must be 'stationary' or 'moving'");
    auto number = [&](const char* key, bool required) {
      if (!o.contains(key)) {
        if (required) throw ParseError(where + ": missing field '" + key + "'");
        return 0.0;
      }
      if (!o[key].is_number()) throw ParseError(where + ": field '" + key + "' must be a number");
      return o[key].get<double>();
    };
    ob.position = {number("x", true), number("y", true)};
    ob.vx = number("vx", false);
    ob.vy = number("vy", false);
    if (ob.kind == ObstacleKind::stationary && (ob.vx != 0.0 || ob.vy != 0.0))
      throw ValidationError(where + ": stationary obstacle with nonzero velocity");
    out.push_back(std::move(ob));
  }
  return out;
}

enum class AlertKind { obstacle_warning, hold_position, destination_reached };

inline const char* to_string(AlertKind k) {
  switch (k) {
    case AlertKind::obstacle_warning: return "obstacle_warning";
    case AlertKind::hold_position: return "hold_position";
    case AlertKind::destination_reached: return "destination_reached";
  }
  return "?";
}

struct AlertEvent {
  std::uint64_t id = 0;  // assigned by the run; keys idempotent delivery
  double t = 0.0;
  AlertKind kind = AlertKind::obstacle_warning;
  double distance = 0.0;
  std::string message;
  std::string obstacle_id;
  std::optional<double> time_to_reach;  // s
};

// Earliest time >= t at which the obstacle is within `safer` of the user,
// or nullopt if it never gets there on its current course.
inline std::optional<double> time_to_safer_boundary(const LocalPoint& user, double t, const Obstacle& ob,
                                                    double safer) {
  const auto pos = ob.position_at(t);
  const double rx = pos.x - user.x, ry = pos.y - user.y;
  const double c = rx * rx + ry * ry - safer * safer;
  if (c <= 0.0) return t;
  const double a = ob.vx * ob.vx + ob.vy * ob.vy;
  if (a == 0.0) return std::nullopt;
  const double b = 2.0 * (rx * ob.vx + ry * ob.vy);
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return std::nullopt;
  const double s = (-b - std::sqrt(disc)) / (2.0 * a);
  if (s < 0.0) return std::nullopt;
  return t + s;
}

// Warnings for every obstacle within the safer distance at time t, nearest
// first. Stationary obstacles report the walking time to reach them; moving
// obstacles that are closing report the time until contact at the current
// closing speed.
inline std::vector<AlertEvent> detect(const LocalPoint& user, double t, const std::vector<Obstacle>& obstacles,
                                      const WalkingProfile& profile, double safer_distance) {
  if (!(safer_distance > 0.0)) throw ValidationError("detect: safer_distance must be > 0");
  std::vector<AlertEvent> out;
  for (const auto& ob : obstacles) {
    const auto pos = ob.position_at(t);
    const double d = distance(pos, user);
    if (!(d <= safer_distance)) continue;
    AlertEvent ev;
    ev.t = t;
    ev.kind = AlertKind::obstacle_warning;
    ev.distance = d;
    ev.obstacle_id = ob.id;
    if (ob.kind == ObstacleKind::stationary) {
      ev.time_to_reach = d / profile.speed();
      ev.message = "stationary obstacle " + ob.id + " at " + io::format_double(d) + " m, reached in " +
                   io::format_double(*ev.time_to_reach) + " s";
    } else {
      const double closing = d > 0.0 ? -((pos.x - user.x) * ob.vx + (pos.y - user.y) * ob.vy) / d : 0.0;
      if (d == 0.0) {
        ev.time_to_reach = 0.0;
        ev.message = "moving obstacle " + ob.id + " at the user position";
      } else if (closing > 0.0) {
        ev.time_to_reach = d / closing;
        ev.message = "moving obstacle " + ob.id + " at " + io::format_double(d) + " m closing at " +
                     io::format_double(closing) + " m/s, contact in " + io::format_double(*ev.time_to_reach) + " s";
      } else {
        ev.message = "moving obstacle " + ob.id + " at " + io::format_double(d) + " m, not closing";
      }
    }
    out.push_back(std::move(ev));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const AlertEvent& a, const AlertEvent& b) { return a.distance < b.distance; });
  return out;
}

// ---------------------------------------------------------------------------
// Tracking run

struct TrackOptions {
  double emission_sigma = kDefaultEmissionSigmaM;
  double safer_distance = kDefaultSaferDistanceM;
  std::optional<State> destination;
};

struct TrackResult {
  std::vector<State> snapped;
  std::vector<State> smoothed;
  std::optional<double> snap_error;    // present when the trace carries truth
  std::optional<double> smooth_error;
  std::vector<AlertEvent> events;      // ids 0, 1, 2, ... in emission order
  std::set<State> blocked;
  StochasticMatrix held;               // chain after hold_on_obstacle(blocked)
};

// Estimates the path, then walks it raising edge-triggered alerts: a warning
// when an obstacle enters the safer distance, plus a hold at the current
// vertex when that obstacle is stationary.
inline TrackResult run_tracking(const Trace& tr, const PathGraph& g, const StochasticMatrix& p,
                                const WalkingProfile& profile, const std::vector<Obstacle>& obstacles,
                                const TrackOptions& opt) {
  TrackResult r;
  r.snapped = snap(tr, g);
  r.smoothed = smooth(tr, g, p, opt.emission_sigma);
  if (tr.has_truth()) {
    r.snap_error = localization_error(r.snapped, tr, g);
    r.smooth_error = localization_error(r.smoothed, tr, g);
  }
  std::vector<bool> in_range(obstacles.size(), false);
  bool arrived = false;
  std::uint64_t next_id = 0;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const State here = r.smoothed[k];
    const auto user = g.position(here);
    const double t = tr.fixes[k].t;
    std::vector<std::pair<AlertEvent, std::size_t>> hits;
    for (std::size_t idx = 0; idx < obstacles.size(); ++idx)
      for (auto& ev : detect(user, t, {obstacles[idx]}, profile, opt.safer_distance))
        hits.emplace_back(std::move(ev), idx);
    std::stable_sort(hits.begin(), hits.end(),
                     [](const auto& a, const auto& b) { return a.first.distance < b.first.distance; });
    std::vector<bool> now(obstacles.size(), false);
    for (auto& [ev, idx] : hits) {
      now[idx] = true;
      if (in_range[idx]) continue;
      ev.id = next_id++;
      const bool blocking = obstacles[idx].kind == ObstacleKind::stationary;
      const double dist = ev.distance;
      const std::string oid = ev.obstacle_id;
      r.events.push_back(std::move(ev));
      if (blocking) {
        r.blocked.insert(here);
        AlertEvent hold;
        hold.id = next_id++;
        hold.t = t;
        hold.kind = AlertKind::hold_position;
        hold.distance = dist;
        hold.obstacle_id = oid;
        hold.message = "hold position at vertex " + std::to_string(here) + ", obstacle " + oid + " ahead";
        r.events.push_back(std::move(hold));
      }
    }
    in_range = std::move(now);
    if (opt.destination && !arrived && here == *opt.destination) {
      arrived = true;
      AlertEvent done;
      done.id = next_id++;
      done.t = t;
      done.kind = AlertKind::destination_reached;
      done.distance = 0.0;
      done.message = "destination vertex " + std::to_string(here) + " reached";
      r.events.push_back(std::move(done));
    }
  }
  r.held = hold_on_obstacle(p, r.blocked);
  return r;
}

}  // namespace mctrack

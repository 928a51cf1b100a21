#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mctrack/alerts.hpp"
#include "mctrack/chain_core.hpp"
#include "mctrack/ctmc_uniform.hpp"
#include "mctrack/error.hpp"
#include "mctrack/geo_map.hpp"
#include "mctrack/guidance.hpp"
#include "mctrack/io.hpp"
#include "mctrack/svg_plot.hpp"
#include "mctrack/walk_profiles.hpp"

// Subcommand bodies behind the mctrack CLI. Each writes its artifacts into
// the output directory and throws ParseError/ValidationError (exit 1) or
// IoError (exit 2) on failure.
namespace mctrack::cmd {

inline constexpr std::uint64_t kDefaultSeed = 42;
inline constexpr int kMaxPairwiseVertices = 50;

struct GlobalOptions {
  std::uint64_t seed = kDefaultSeed;
  Mode mode = Mode::exact;
  std::string out_dir = ".";
  double tolerance = kDefaultTransientTolerance;
};

inline std::filesystem::path prepare_out_dir(const GlobalOptions& g) {
  std::error_code ec;
  std::filesystem::create_directories(g.out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + g.out_dir + "': " + ec.message());
  return std::filesystem::path(g.out_dir);
}

inline void write(const std::filesystem::path& dir, const std::string& name, const std::string& content) {
  io::write_file((dir / name).string(), content);
}

// "normal", "blind", or a path to a profile JSON file.
inline WalkingProfile resolve_profile(const std::string& spec) {
  if (spec == "normal" || spec == "blind") return builtin_profile(spec);
  return load_profile(io::read_file(spec));
}

inline std::string bool_text(bool b) { return b ? "true" : "false"; }

inline std::string optional_text(const std::optional<double>& v) {
  return v ? io::format_double(*v) : std::string("NA");
}

// ---------------------------------------------------------------------------

struct AnalyzeOptions {
  std::string map_path;
};

// Returns the analysis so callers can inspect it; warnings go to `err`.
inline ChainAnalysis analyze(const GlobalOptions& g, const AnalyzeOptions& o, std::ostream& err = std::cerr) {
  const auto graph = load_map(io::read_file(o.map_path));
  const auto p = random_walk_matrix(graph);
  const auto a = mctrack::analyze(p);
  const auto dir = prepare_out_dir(g);

  write(dir, "transition.csv", csv::write_matrix(p.matrix()));

  std::string classes = "state,class,closed,period\n";
  for (State s = 0; s < p.size(); ++s) {
    const int c = a.class_of[s];
    classes += std::to_string(s) + "," + std::to_string(c) + "," + bool_text(a.closed[c]) + "," +
               std::to_string(a.period[c]) + "\n";
  }
  write(dir, "classes.csv", classes);

  std::string summary = "key,value\n";
  summary += "states," + std::to_string(graph.size()) + "\n";
  summary += "edges," + std::to_string(graph.edge_count()) + "\n";
  summary += "degree_sum," + std::to_string(degree_sum(graph)) + "\n";
  summary += "classes," + std::to_string(a.classes.size()) + "\n";
  summary += "irreducible," + bool_text(a.irreducible) + "\n";
  summary += "period," + (a.irreducible ? std::to_string(a.period.front()) : std::string("NA")) + "\n";
  summary += "mixing_rate_slem," + optional_text(a.mixing_rate) + "\n";
  summary += "mixing_time_quarter," + (a.mixing_time ? std::to_string(*a.mixing_time) : std::string("NA")) + "\n";
  write(dir, "summary.csv", summary);

  if (a.stationary) {
    std::string st = "state,probability\n";
    for (State s = 0; s < p.size(); ++s)
      st += std::to_string(s) + "," + io::format_double((*a.stationary)[s]) + "\n";
    write(dir, "stationary.csv", st);
  } else {
    std::error_code ec;
    std::filesystem::remove(dir / "stationary.csv", ec);
    err << "warning: chain is reducible (" << a.classes.size()
        << " communicating classes); stationary distribution and mixing rate omitted\n";
  }

  if (graph.size() <= kMaxPairwiseVertices) {
    const int n = p.size();
    Eigen::MatrixXd h(n, n);
    for (State v = 0; v < n; ++v) h.col(v) = hitting_times_to(p, v);
    const Eigen::MatrixXd c = h + h.transpose();
    write(dir, "hitting.csv", csv::write_matrix(h));
    write(dir, "commute.csv", csv::write_matrix(c));
  }
  return a;
}

// ---------------------------------------------------------------------------

inline svg::LinePlot comparison_plot(const std::vector<ComparisonRow>& rows) {
  svg::LinePlot plot{"Time and distance: normal vs blind walker", "distance (m)", "time (s)", {}};
  svg::Series normal{"normal", "#1f77b4", {}}, blind{"blind", "#d62728", {}};
  for (const auto& r : rows) {
    normal.points.emplace_back(r.distance, r.normal_time);
    blind.points.emplace_back(r.distance, r.blind_time);
  }
  plot.series = {std::move(normal), std::move(blind)};
  return plot;
}

struct TableOptions {
  std::string distances_path;
};

inline std::vector<ComparisonRow> table(const GlobalOptions& g, const TableOptions& o) {
  const auto distances = read_distances(io::read_file(o.distances_path));
  const auto rows = comparison_table(distances, g.mode);
  const auto dir = prepare_out_dir(g);
  write(dir, "comparison.csv", write_comparison_csv(rows));
  write(dir, "comparison.svg", svg::render(comparison_plot(rows)));
  return rows;
}

// ---------------------------------------------------------------------------

struct TransientOptions {
  std::string map_path;     // either a map ...
  std::string matrix_path;  // ... or a transition matrix CSV
  double rate = 1.0;
  double time = 1.0;
};

inline StochasticMatrix transient(const GlobalOptions& g, const TransientOptions& o) {
  if (o.map_path.empty() == o.matrix_path.empty())
    throw ValidationError("transient: give exactly one of --map or --matrix");
  StochasticMatrix p = o.map_path.empty()
                           ? StochasticMatrix(csv::read_matrix(io::read_file(o.matrix_path)))
                           : random_walk_matrix(load_map(io::read_file(o.map_path)));
  const UniformizedChain chain(p, o.rate);
  const auto pt = mctrack::transient(chain, o.time, g.tolerance);
  const auto dir = prepare_out_dir(g);
  write(dir, "generator.csv", csv::write_matrix(generator(chain).matrix()));
  write(dir, "transient.csv", csv::write_matrix(pt.matrix()));
  std::string info = "key,value\n";
  info += "rate," + io::format_double(o.rate) + "\n";
  info += "time," + io::format_double(o.time) + "\n";
  info += "tolerance," + io::format_double(g.tolerance) + "\n";
  info += "truncation_point," + std::to_string(truncation_point(o.rate * o.time, g.tolerance)) + "\n";
  info += "sojourn_mean_s," + io::format_double(sojourn_mean(chain)) + "\n";
  write(dir, "transient_info.csv", info);
  return pt;
}

// ---------------------------------------------------------------------------

struct SimulateOptions {
  std::string map_path;
  std::string profile = "normal";
  State start = 0;
  int steps = 100;
  double noise_sigma = 0.0;
  Timing timing = Timing::kinematic;
  std::optional<double> arrival_rate;  // also sample Poisson obstacle arrivals
  double horizon = 0.0;
};

// Noise uses seed + 1 so the walk itself is unchanged by the noise level.
inline Trace simulated_trace(const PathGraph& graph, const StochasticMatrix& p, const WalkingProfile& profile,
                             const GlobalOptions& g, State start, int steps, double noise_sigma, Timing timing) {
  const auto walk = simulate_walk(graph, p, profile, start, steps, g.seed, timing);
  return add_noise(walk, noise_sigma, g.seed + 1);
}

inline Trace simulate(const GlobalOptions& g, const SimulateOptions& o) {
  const auto graph = load_map(io::read_file(o.map_path));
  const auto p = random_walk_matrix(graph);
  const auto profile = resolve_profile(o.profile);
  const auto tr = simulated_trace(graph, p, profile, g, o.start, o.steps, o.noise_sigma, o.timing);
  const auto dir = prepare_out_dir(g);
  write(dir, "trace.csv", write_trace_csv(tr));
  if (o.arrival_rate) {
    std::string out = "arrival_s\n";
    for (double t : sample_arrivals(*o.arrival_rate, o.horizon, g.seed + 2)) out += io::format_double(t) + "\n";
    write(dir, "arrivals.csv", out);
  }
  return tr;
}

// ---------------------------------------------------------------------------

struct TrackOptions {
  std::string map_path;
  std::string trace_path;  // empty: simulate
  std::string profile = "normal";
  State start = 0;
  int steps = 200;
  double noise_sigma = 1.0;
  std::string obstacles_path;
  std::string alert_log;  // default: <out-dir>/alerts.log
  std::string webhook_url;
  double emission_sigma = kDefaultEmissionSigmaM;
  double safer_distance = kDefaultSaferDistanceM;
  std::optional<State> destination;
};

struct TrackOutcome {
  TrackResult result;
  DeliveryReport delivery;
};

inline std::string write_estimated_path_csv(const Trace& tr, const PathGraph& graph, const TrackResult& r) {
  const bool truth = tr.has_truth();
  std::string out = "t_s,x_m,y_m,snapped_vertex,smoothed_vertex";
  out += truth ? ",truth_vertex,snapped_error_m,smoothed_error_m\n" : "\n";
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const auto& f = tr.fixes[k];
    out += io::format_double(f.t) + "," + io::format_double(f.position.x) + "," + io::format_double(f.position.y) +
           "," + std::to_string(r.snapped[k]) + "," + std::to_string(r.smoothed[k]);
    if (truth) {
      const auto tp = graph.position(*f.truth_state);
      out += "," + std::to_string(*f.truth_state) + "," + io::format_double(distance(graph.position(r.snapped[k]), tp)) +
             "," + io::format_double(distance(graph.position(r.smoothed[k]), tp));
    }
    out += "\n";
  }
  return out;
}

// The alert log is truncated at the start of each run and appended to per
// event during it.
inline TrackOutcome track(const GlobalOptions& g, const TrackOptions& o) {
  const auto graph = load_map(io::read_file(o.map_path));
  const auto p = random_walk_matrix(graph);
  const auto profile = resolve_profile(o.profile);
  const Trace tr = o.trace_path.empty()
                       ? simulated_trace(graph, p, profile, g, o.start, o.steps, o.noise_sigma, Timing::kinematic)
                       : read_trace_csv(io::read_file(o.trace_path), profile.name);
  const auto obstacles = o.obstacles_path.empty() ? std::vector<Obstacle>{}
                                                  : load_obstacles(io::read_file(o.obstacles_path));
  mctrack::TrackOptions topt;
  topt.emission_sigma = o.emission_sigma;
  topt.safer_distance = o.safer_distance;
  topt.destination = o.destination;
  if (o.destination && (*o.destination < 0 || *o.destination >= graph.size()))
    throw ValidationError("track: destination vertex out of range");

  TrackOutcome out;
  out.result = run_tracking(tr, graph, p, profile, obstacles, topt);
  const auto dir = prepare_out_dir(g);

  write(dir, "estimated_path.csv", write_estimated_path_csv(tr, graph, out.result));
  write(dir, "held_chain.csv", csv::write_matrix(out.result.held.matrix()));

  std::string summary = "method,mean_error_m\n";
  summary += "snapped," + optional_text(out.result.snap_error) + "\n";
  summary += "smoothed," + optional_text(out.result.smooth_error) + "\n";
  write(dir, "summary.csv", summary);

  const std::string log_path = o.alert_log.empty() ? (dir / "alerts.log").string() : o.alert_log;
  io::write_file(log_path, "");
  Dispatcher dispatcher;
  dispatcher.add_sink(std::make_unique<FileSink>(log_path));
  if (!o.webhook_url.empty()) dispatcher.add_sink(std::make_unique<WebhookSink>(o.webhook_url));
  out.delivery = dispatcher.dispatch(out.result.events);
  write(dir, "delivery.csv", write_delivery_csv(out.delivery));
  return out;
}

// ---------------------------------------------------------------------------

struct ReportOptions {
  std::string table_csv;  // comparison CSV from `table`
  std::string path_csv;   // estimated_path.csv from `track`
};

// Regenerates figures from CSV artifacts only.
inline void report(const GlobalOptions& g, const ReportOptions& o) {
  if (o.table_csv.empty() && o.path_csv.empty())
    throw ValidationError("report: give --table and/or --path");
  const auto dir = prepare_out_dir(g);
  if (!o.table_csv.empty()) {
    const auto rows = read_comparison_csv(io::read_file(o.table_csv));
    write(dir, "comparison.svg", svg::render(comparison_plot(rows)));
    // Cumulative walk over the rows in order, as a route-style time graph.
    svg::LinePlot route{"Cumulative route time", "cumulative distance (m)", "cumulative time (s)", {}};
    svg::Series normal{"normal", "#1f77b4", {{0.0, 0.0}}}, blind{"blind", "#d62728", {{0.0, 0.0}}};
    double d = 0, tn = 0, tb = 0;
    for (const auto& r : rows) {
      d += r.distance;
      tn += r.normal_time;
      tb += r.blind_time;
      normal.points.emplace_back(d, tn);
      blind.points.emplace_back(d, tb);
    }
    route.series = {std::move(normal), std::move(blind)};
    write(dir, "route_time.svg", svg::render(route));
  }
  if (!o.path_csv.empty()) {
    const auto ls = io::lines(io::read_file(o.path_csv));
    if (ls.empty() || io::trim(ls.front()) !=
                          "t_s,x_m,y_m,snapped_vertex,smoothed_vertex,truth_vertex,snapped_error_m,smoothed_error_m")
      throw ParseError("report: path CSV must be an estimated_path.csv with truth columns");
    svg::LinePlot plot{"Localization error over time", "time (s)", "error (m)", {}};
    svg::Series snapped{"snapped", "#7f7f7f", {}}, smoothed{"smoothed", "#2ca02c", {}};
    for (std::size_t i = 1; i < ls.size(); ++i) {
      if (io::trim(ls[i]).empty()) continue;
      const auto cells = io::split(ls[i], ',');
      const auto where = "path CSV line " + std::to_string(i + 1);
      if (cells.size() != 8) throw ParseError(where + ": expected 8 columns");
      const double t = io::parse_double(cells[0], where);
      snapped.points.emplace_back(t, io::parse_double(cells[6], where));
      smoothed.points.emplace_back(t, io::parse_double(cells[7], where));
    }
    plot.series = {std::move(snapped), std::move(smoothed)};
    write(dir, "error.svg", svg::render(plot));
  }
}

}  // namespace mctrack::cmd

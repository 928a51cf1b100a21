// mctrack: command-line front end for the tracking toolkit.
//
// Exit codes: 0 success, 1 domain/validation error (including bad usage),
// 2 I/O error.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mctrack/commands.hpp"

namespace {

int run(int argc, char** argv) {
  using namespace mctrack;

  CLI::App app{"Markov-chain tracking toolkit: random walks, uniformized chains, walking profiles, smoothing"};
  app.require_subcommand(1);

  cmd::GlobalOptions global;
  std::string mode = "exact";
  app.add_option("--seed", global.seed, "Seed for every random draw")->capture_default_str();
  app.add_option("--mode", mode, "Profile arithmetic: exact or paper_rounded")->capture_default_str();
  app.add_option("--out-dir", global.out_dir, "Directory for output artifacts")->capture_default_str();
  app.add_option("--tolerance", global.tolerance, "Poisson tail mass dropped by transient")->capture_default_str();

  cmd::AnalyzeOptions analyze;
  auto* a = app.add_subcommand("analyze", "Chain structure, stationary law, mixing, hitting/commute times");
  a->add_option("--map", analyze.map_path, "Map JSON")->required();

  cmd::TableOptions table;
  auto* t = app.add_subcommand("table", "Normal vs blind travel-time table and plot");
  t->add_option("--distances", table.distances_path, "One distance (m) per line")->required();

  cmd::TransientOptions transient;
  auto* tr = app.add_subcommand("transient", "Uniformized transition matrix P(t) and generator");
  tr->add_option("--map", transient.map_path, "Map JSON (random-walk jump chain)");
  tr->add_option("--matrix", transient.matrix_path, "Jump chain as CSV");
  tr->add_option("--rate", transient.rate, "Poisson rate (events/s)")->required();
  tr->add_option("--time", transient.time, "Time t (s)")->required();

  cmd::SimulateOptions simulate;
  std::string sim_timing = "kinematic";
  std::optional<double> arrival_rate;
  auto* s = app.add_subcommand("simulate", "Simulate a walk on the map and write its trace");
  s->add_option("--map", simulate.map_path, "Map JSON")->required();
  s->add_option("--profile", simulate.profile, "normal, blind, or profile JSON path")->capture_default_str();
  s->add_option("--start", simulate.start, "Start vertex")->capture_default_str();
  s->add_option("--steps", simulate.steps, "Number of transitions")->capture_default_str();
  s->add_option("--noise", simulate.noise_sigma, "Gaussian fix noise sigma (m)")->capture_default_str();
  s->add_option("--timing", sim_timing, "kinematic or poisson")->capture_default_str();
  s->add_option("--arrival-rate", arrival_rate, "Also sample Poisson obstacle arrivals at this rate");
  s->add_option("--horizon", simulate.horizon, "Arrival horizon (s)")->capture_default_str();

  cmd::TrackOptions track;
  std::optional<int> destination;
  auto* k = app.add_subcommand("track", "Smooth a trace, raise obstacle alerts, dispatch them");
  k->add_option("--map", track.map_path, "Map JSON")->required();
  k->add_option("--trace", track.trace_path, "Trace CSV (omit to simulate)");
  k->add_option("--profile", track.profile, "normal, blind, or profile JSON path")->capture_default_str();
  k->add_option("--start", track.start, "Start vertex when simulating")->capture_default_str();
  k->add_option("--steps", track.steps, "Transitions when simulating")->capture_default_str();
  k->add_option("--noise", track.noise_sigma, "Fix noise sigma (m) when simulating")->capture_default_str();
  k->add_option("--obstacles", track.obstacles_path, "Obstacle JSON");
  k->add_option("--alert-log", track.alert_log, "Alert log path (default <out-dir>/alerts.log)");
  k->add_option("--webhook", track.webhook_url, "POST each alert to http://host[:port]/path");
  k->add_option("--sigma", track.emission_sigma, "Emission sigma (m) for smoothing")->capture_default_str();
  k->add_option("--safer-distance", track.safer_distance, "Alert radius (m)")->capture_default_str();
  k->add_option("--destination", destination, "Vertex that raises destination_reached");

  cmd::ReportOptions report;
  auto* r = app.add_subcommand("report", "Regenerate figures from CSV artifacts");
  r->add_option("--table", report.table_csv, "comparison.csv from `table`");
  r->add_option("--path", report.path_csv, "estimated_path.csv from `track`");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    global.mode = parse_mode(mode);
    if (*a) {
      cmd::analyze(global, analyze);
    } else if (*t) {
      cmd::table(global, table);
    } else if (*tr) {
      cmd::transient(global, transient);
    } else if (*s) {
      if (sim_timing == "kinematic")
        simulate.timing = Timing::kinematic;
      else if (sim_timing == "poisson")
        simulate.timing = Timing::poisson;
      else
        throw ValidationError("--timing must be kinematic or poisson");
      simulate.arrival_rate = arrival_rate;
      cmd::simulate(global, simulate);
    } else if (*k) {
      if (destination) track.destination = *destination;
      const auto out = cmd::track(global, track);
      if (out.delivery.total_failed() > 0)
        std::cerr << "warning: " << out.delivery.total_failed() << " alert deliveries failed (see delivery.csv)\n";
    } else if (*r) {
      cmd::report(global, report);
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }

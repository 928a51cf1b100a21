#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "mctrack/chain_core.hpp"
#include "mctrack/guidance.hpp"
#include "test_support.hpp"

using namespace mctrack;
using namespace mctrack::testing;

namespace {

// Exhaustive MAP search: every state sequence, lexicographic order, strict
// improvement only, so ties keep the lexicographically smallest sequence.
std::vector<State> brute_force_map(const Trace& tr, const PathGraph& g, const StochasticMatrix& p, double sigma) {
  const int n = g.size();
  const std::size_t len = tr.size();
  std::vector<State> seq(len, 0), best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (;;) {
    double s = -std::log(static_cast<double>(n));
    for (std::size_t k = 0; k < len && std::isfinite(s); ++k) {
      const auto v = g.position(seq[k]);
      const double dx = tr.fixes[k].position.x - v.x, dy = tr.fixes[k].position.y - v.y;
      s -= (dx * dx + dy * dy) / (2 * sigma * sigma);
      if (k > 0) s += p(seq[k - 1], seq[k]) > 0 ? std::log(p(seq[k - 1], seq[k])) : -INFINITY;
    }
    if (s > best_score) {
      best_score = s;
      best = seq;
    }
    std::size_t k = len;
    while (k > 0) {
      --k;
      if (++seq[k] < n) break;
      seq[k] = 0;
      if (k == 0) return best;
    }
  }
}

Trace trace_of(const std::vector<LocalPoint>& pts) {
  Trace tr;
  for (std::size_t k = 0; k < pts.size(); ++k) tr.fixes.push_back({static_cast<double>(k), pts[k], std::nullopt});
  return tr;
}

}  // namespace

TEST(SimulateWalk, ZeroSteps) {
  const auto g = path_graph(3, 0.58);
  const auto tr = simulate_walk(g, random_walk_matrix(g), builtin_profiles().normal, 1, 0, 42);
  ASSERT_EQ(tr.size(), 1u);
  EXPECT_EQ(tr.fixes[0].t, 0.0);
  EXPECT_EQ(*tr.fixes[0].truth_state, 1);
}

TEST(SimulateWalk, StepTimesFollowSpeed) {
  const auto g = path_graph(3, 0.58);
  const auto tr = simulate_walk(g, random_walk_matrix(g), builtin_profiles().normal, 0, 1, 42);
  ASSERT_EQ(tr.size(), 2u);
  EXPECT_EQ(*tr.fixes[1].truth_state, 1);  // 0 has a single neighbour
  EXPECT_NEAR(tr.fixes[1].t, 1.0, 1e-12);
  const auto blind = simulate_walk(g, random_walk_matrix(g), builtin_profiles().blind, 0, 4, 42);
  for (std::size_t k = 0; k < blind.size(); ++k) EXPECT_NEAR(blind.fixes[k].t, 2.7 * k, 1e-9);
}

TEST(SimulateWalk, DeterministicAndValid) {
  const auto g = grid_graph(4, 4);
  const auto p = random_walk_matrix(g);
  const auto a = simulate_walk(g, p, builtin_profiles().normal, 5, 300, 9);
  const auto b = simulate_walk(g, p, builtin_profiles().normal, 5, 300, 9);
  EXPECT_EQ(write_trace_csv(a), write_trace_csv(b));
  EXPECT_NO_THROW(a.validate());
  for (std::size_t k = 1; k < a.size(); ++k) EXPECT_GT(p(*a.fixes[k - 1].truth_state, *a.fixes[k].truth_state), 0.0);
}

TEST(SimulateWalk, PoissonTimingHasMatchingMeanDwell) {
  const auto g = cycle_graph(8);
  const auto p = random_walk_matrix(g);
  const auto prof = builtin_profiles().normal;
  const int steps = 20000;
  const auto tr = simulate_walk(g, p, prof, 0, steps, 5, Timing::poisson);
  const double edge = distance(g.position(0), g.position(1));
  const double mean = tr.fixes.back().t / steps;
  const double expected = edge / prof.speed();
  EXPECT_LT(std::abs(mean - expected), 3.0 * expected / std::sqrt(steps));
}

TEST(SimulateWalk, VisitFrequenciesMatchStationary) {
  const auto g = grid_graph(3, 3);
  // Add a diagonal so the walk is aperiodic.
  std::vector<Edge> edges = g.edges();
  edges.emplace_back(0, 4);
  const PathGraph h(g.vertices(), edges);
  const auto p = random_walk_matrix(h);
  const auto tr = simulate_walk(h, p, builtin_profiles().normal, 0, 100000, 42);
  Eigen::VectorXd freq = Eigen::VectorXd::Zero(h.size());
  for (const auto& f : tr.fixes) freq(*f.truth_state) += 1.0;
  freq /= freq.sum();
  EXPECT_LT(total_variation(freq, analyze(p).stationary->vector()), 0.02);
}

TEST(AddNoise, ZeroSigmaIsIdentity) {
  const auto g = grid_graph(3, 3);
  const auto tr = simulate_walk(g, random_walk_matrix(g), builtin_profiles().normal, 0, 50, 1);
  EXPECT_EQ(write_trace_csv(add_noise(tr, 0.0, 3)), write_trace_csv(tr));
}

TEST(AddNoise, RayleighMeanAndDeterminism) {
  Trace tr;
  for (int k = 0; k < 10000; ++k) tr.fixes.push_back({static_cast<double>(k), {0.0, 0.0}, 0});
  const auto noisy = add_noise(tr, 1.0, 77);
  double mean = 0.0;
  for (const auto& f : noisy.fixes) mean += std::hypot(f.position.x, f.position.y);
  mean /= noisy.size();
  const double rayleigh = std::sqrt(std::numbers::pi / 2.0);
  EXPECT_NEAR(mean, rayleigh, 0.03 * rayleigh);
  EXPECT_EQ(write_trace_csv(noisy), write_trace_csv(add_noise(tr, 1.0, 77)));
  for (const auto& f : noisy.fixes) EXPECT_EQ(*f.truth_state, 0);
  EXPECT_THROW(add_noise(tr, -1.0, 1), ValidationError);
}

TEST(TraceCsv, RoundTripAndValidation) {
  const auto g = grid_graph(3, 3);
  const auto tr = add_noise(simulate_walk(g, random_walk_matrix(g), builtin_profiles().blind, 4, 40, 2), 0.7, 3);
  const auto text = write_trace_csv(tr);
  EXPECT_EQ(write_trace_csv(read_trace_csv(text)), text);
  EXPECT_THROW(read_trace_csv("t_s,x_m,y_m\n1,0,0\n1,0,0\n"), ValidationError);
  EXPECT_THROW(read_trace_csv("t_s,x_m,y_m\n"), ValidationError);
  EXPECT_THROW(read_trace_csv("time,x,y\n0,0,0\n"), ParseError);
  EXPECT_THROW(read_trace_csv("t_s,x_m,y_m\n0,zero,0\n"), ParseError);
}

TEST(Snap, OnVertexAndTies) {
  const auto g = grid_graph(2, 3);  // ids 0..5
  EXPECT_EQ(snap(trace_of({g.position(3)}), g).front(), 3);
  // Midway between 1 (1,0) and 4 (1,1).
  EXPECT_EQ(snap(trace_of({{1.0, 0.5}}), g).front(), 1);
}

TEST(Snap, NoiselessTraceGivesTruth) {
  const auto g = grid_graph(4, 4);
  const auto tr = simulate_walk(g, random_walk_matrix(g), builtin_profiles().normal, 0, 100, 8);
  const auto s = snap(tr, g);
  for (std::size_t k = 0; k < tr.size(); ++k) EXPECT_EQ(s[k], *tr.fixes[k].truth_state);
}

TEST(Smooth, NoiselessTraceGivesTruth) {
  const auto g = grid_graph(4, 4);
  const auto p = random_walk_matrix(g);
  const auto tr = simulate_walk(g, p, builtin_profiles().normal, 0, 100, 8);
  for (double sigma : {0.3, 0.6, 1.0}) {
    const auto s = smooth(tr, g, p, sigma);
    for (std::size_t k = 0; k < tr.size(); ++k) EXPECT_EQ(s[k], *tr.fixes[k].truth_state) << "sigma " << sigma;
  }
}

TEST(Smooth, SingleFixIsNearestVertex) {
  const auto g = grid_graph(3, 3);
  const auto p = random_walk_matrix(g);
  EXPECT_EQ(smooth(trace_of({{1.9, 1.2}}), g, p).front(), 5);
  EXPECT_EQ(smooth(trace_of({{1.0, 0.5}}), g, p).front(), 1);  // tie toward the lower id
}

TEST(Smooth, MatchesExhaustiveSearch) {
  std::mt19937_64 gen(101);
  std::normal_distribution<double> noise(0.0, 0.8);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 3 + trial % 4;  // up to 6 states
    const auto g = random_connected_graph(n, trial % 3, gen);
    Eigen::MatrixXd m = random_walk_matrix(g).matrix();
    if (trial % 2) m = 0.8 * m + 0.2 * Eigen::MatrixXd::Identity(n, n);  // self-loops on half the cases
    const StochasticMatrix p(m);
    const int len = 2 + trial % 6;  // up to 7 fixes
    std::vector<LocalPoint> pts;
    std::uniform_int_distribution<int> pick(0, n - 1);
    for (int k = 0; k < len; ++k) {
      const auto v = g.position(pick(gen));
      pts.push_back({v.x + 20.0 * noise(gen), v.y + 20.0 * noise(gen)});
    }
    const auto tr = trace_of(pts);
    const double sigma = 15.0;
    const auto dp = smooth(tr, g, p, sigma);
    const auto oracle = brute_force_map(tr, g, p, sigma);
    EXPECT_NEAR(sequence_log_score(dp, tr, g, p, sigma), sequence_log_score(oracle, tr, g, p, sigma), 1e-9);
    EXPECT_EQ(dp, oracle) << "trial " << trial;
  }
}

TEST(Smooth, NeverUsesZeroTransitionsAndBeatsSnapScore) {
  const auto g = grid_graph(5, 5);
  const auto p = random_walk_matrix(g);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto tr = add_noise(simulate_walk(g, p, builtin_profiles().normal, 12, 120, seed), 0.4 + 0.2 * seed, seed + 50);
    for (double sigma : {0.5, 1.0, 2.0}) {
      const auto s = smooth(tr, g, p, sigma);
      for (std::size_t k = 1; k < s.size(); ++k) EXPECT_GT(p(s[k - 1], s[k]), 0.0);
      EXPECT_GE(sequence_log_score(s, tr, g, p, sigma), sequence_log_score(snap(tr, g), tr, g, p, sigma));
    }
  }
}

TEST(Smooth, ScoresAtLeastTheTruePath) {
  const auto g = grid_graph(5, 5);
  const auto p = random_walk_matrix(g);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto tr = add_noise(simulate_walk(g, p, builtin_profiles().normal, 12, 200, seed), 1.0, seed + 100);
    std::vector<State> truth;
    for (const auto& f : tr.fixes) truth.push_back(*f.truth_state);
    EXPECT_GE(sequence_log_score(smooth(tr, g, p, 1.0), tr, g, p, 1.0), sequence_log_score(truth, tr, g, p, 1.0));
  }
}

TEST(Smooth, ZeroProbabilityTrellisFails) {
  const auto g = path_graph(3);
  const auto p = random_walk_matrix(g);
  // Squared distances overflow, so every emission is zero.
  const auto far = trace_of({{1e200, 1e200}, {1e200, 0}});
  EXPECT_THROW(smooth(far, g, p), SmoothingError);
  // An identity chain still admits staying put.
  EXPECT_EQ(smooth(trace_of({{0.0, 0.0}, {1.0, 0.0}}), path_graph(2), StochasticMatrix::identity(2)).size(), 2u);
}

TEST(Smooth, RejectsBadArguments) {
  const auto g = path_graph(3);
  const auto p = random_walk_matrix(g);
  EXPECT_THROW(smooth(trace_of({{0, 0}}), g, p, 0.0), ValidationError);
  EXPECT_THROW(smooth(trace_of({{0, 0}}), g, StochasticMatrix::identity(2)), ValidationError);
}

TEST(LocalizationError, Basics) {
  const auto g = path_graph(4, 0.58);
  Trace tr;
  for (int k = 0; k < 3; ++k) tr.fixes.push_back({static_cast<double>(k), g.position(k), k});
  EXPECT_EQ(localization_error({0, 1, 2}, tr, g), 0.0);
  EXPECT_NEAR(localization_error({1, 2, 3}, tr, g), 0.58, 1e-12);
  EXPECT_THROW(localization_error({0, 1}, tr, g), ValidationError);
  tr.fixes[1].truth_state.reset();
  EXPECT_THROW(localization_error({0, 1, 2}, tr, g), ValidationError);
}

TEST(HoldOnObstacle, Basics) {
  const auto p = random_walk_matrix(path_graph(3));
  EXPECT_EQ(hold_on_obstacle(p, {}).matrix(), p.matrix());
  const auto held = hold_on_obstacle(p, {1});
  EXPECT_EQ(held(1, 0), 0.0);
  EXPECT_EQ(held(1, 1), 1.0);
  EXPECT_EQ(held(1, 2), 0.0);
  const auto pi = unique_stationary(held);
  ASSERT_TRUE(pi);
  EXPECT_NEAR((*pi)[1], 1.0, 1e-12);
  const auto limit = evolve(Distribution::point_mass(3, 0), held, 60);
  EXPECT_NEAR(limit[1], 1.0, 1e-12);
}

TEST(HoldOnObstacle, RandomCasesStayStochasticAndUntouchedRowsIdentical) {
  std::mt19937_64 gen(55);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 10;
    const StochasticMatrix p(random_stochastic(n, gen));
    std::set<State> blocked;
    std::uniform_int_distribution<int> pick(0, n - 1);
    for (int k = 0; k < trial % 4; ++k) blocked.insert(pick(gen));
    const auto held = hold_on_obstacle(p, blocked);
    for (int i = 0; i < n; ++i) {
      EXPECT_NEAR(held.matrix().row(i).sum(), 1.0, 1e-12);
      if (!blocked.count(i))
        for (int j = 0; j < n; ++j) EXPECT_EQ(held(i, j), p(i, j));
    }
  }
  EXPECT_THROW(hold_on_obstacle(StochasticMatrix::identity(2), {5}), ValidationError);
}

TEST(Detect, BeyondSaferDistance) {
  const std::vector<Obstacle> obs{{"a", ObstacleKind::stationary, {10.0, 0.0}, 0, 0}};
  EXPECT_TRUE(detect({0, 0}, 0.0, obs, builtin_profiles().normal, 5.0).empty());
}

TEST(Detect, StationaryTimeToReach) {
  const std::vector<Obstacle> obs{{"a", ObstacleKind::stationary, {10.0, 0.0}, 0, 0}};
  const auto ev = detect({0, 0}, 0.0, obs, builtin_profiles().blind, 12.0);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].kind, AlertKind::obstacle_warning);
  EXPECT_EQ(ev[0].distance, 10.0);
  EXPECT_NEAR(*ev[0].time_to_reach, 46.55, 0.05);  // 10 / 0.2148
}

TEST(Detect, ClosingObstacleFirstAlert) {
  const std::vector<Obstacle> obs{{"car", ObstacleKind::moving, {10.0, 0.0}, -1.0, 0.0}};
  const auto prof = builtin_profiles().normal;
  std::optional<double> first;
  for (int k = 0; k <= 1000 && !first; ++k) {
    const double t = k / 100.0;
    if (!detect({0, 0}, t, obs, prof, 5.0).empty()) first = t;
  }
  ASSERT_TRUE(first);
  EXPECT_EQ(*first, 5.0);
  EXPECT_EQ(*time_to_safer_boundary({0, 0}, 0.0, obs[0], 5.0), 5.0);
  const auto ev = detect({0, 0}, 5.0, obs, prof, 5.0);
  EXPECT_NEAR(*ev[0].time_to_reach, 5.0, 1e-12);  // 5 m left at 1 m/s
}

TEST(Detect, BoundaryHelperEdgeCases) {
  const Obstacle receding{"r", ObstacleKind::moving, {10.0, 0.0}, 1.0, 0.0};
  EXPECT_FALSE(time_to_safer_boundary({0, 0}, 0.0, receding, 5.0));
  const Obstacle passing{"p", ObstacleKind::moving, {-20.0, 6.0}, 1.0, 0.0};
  EXPECT_FALSE(time_to_safer_boundary({0, 0}, 0.0, passing, 5.0));  // closest approach 6 m
  const Obstacle still{"s", ObstacleKind::stationary, {3.0, 0.0}, 0, 0};
  EXPECT_EQ(*time_to_safer_boundary({0, 0}, 2.0, still, 5.0), 2.0);
}

TEST(Detect, SortedAndMonotoneInSaferDistance) {
  std::mt19937_64 gen(66);
  std::uniform_real_distribution<double> pos(-30.0, 30.0), vel(-2.0, 2.0);
  const auto prof = builtin_profiles().blind;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Obstacle> obs;
    for (int i = 0; i < 6; ++i) {
      const bool moving = i % 2;
      obs.push_back({std::to_string(i), moving ? ObstacleKind::moving : ObstacleKind::stationary,
                     {pos(gen), pos(gen)}, moving ? vel(gen) : 0.0, moving ? vel(gen) : 0.0});
    }
    const double t = trial * 0.1;
    const auto small = detect({0, 0}, t, obs, prof, 8.0);
    const auto large = detect({0, 0}, t, obs, prof, 20.0);
    for (std::size_t k = 1; k < large.size(); ++k) EXPECT_LE(large[k - 1].distance, large[k].distance);
    for (const auto& e : small) {
      bool found = false;
      for (const auto& f : large) found = found || f.obstacle_id == e.obstacle_id;
      EXPECT_TRUE(found);
    }
  }
  EXPECT_THROW(detect({0, 0}, 0, {}, prof, 0.0), ValidationError);
}

TEST(Obstacles, LoadFile) {
  const auto obs = load_obstacles(R"([{"id": "bench", "kind": "stationary", "x": 1, "y": 2},
                                      {"id": 7, "kind": "moving", "x": 0, "y": 0, "vx": 1.5, "vy": -1}])");
  ASSERT_EQ(obs.size(), 2u);
  EXPECT_EQ(obs[0].id, "bench");
  EXPECT_EQ(obs[1].id, "7");
  EXPECT_EQ(obs[1].position_at(2.0), (LocalPoint{3.0, -2.0}));
  EXPECT_THROW(load_obstacles(R"([{"id": 1, "kind": "stationary", "x": 0, "y": 0, "vx": 1}])"), ValidationError);
  EXPECT_THROW(load_obstacles(R"([{"id": 1, "kind": "flying", "x": 0, "y": 0}])"), ParseError);
  EXPECT_THROW(load_obstacles(R"({"id": 1})"), ParseError);
}

TEST(RunTracking, BlockingObstacleRaisesHold) {
  const auto g = path_graph(6, 1.0);
  const auto p = random_walk_matrix(g);
  Trace tr;
  for (int k = 0; k < 6; ++k) tr.fixes.push_back({static_cast<double>(k), g.position(k), k});
  const std::vector<Obstacle> obs{{"cone", ObstacleKind::stationary, {5.0, 0.5}, 0, 0}};
  TrackOptions opt;
  opt.safer_distance = 2.0;
  opt.destination = 5;
  const auto r = run_tracking(tr, g, p, builtin_profiles().blind, obs, opt);
  EXPECT_EQ(*r.snap_error, 0.0);
  EXPECT_EQ(*r.smooth_error, 0.0);
  ASSERT_GE(r.events.size(), 3u);
  EXPECT_EQ(r.events[0].kind, AlertKind::obstacle_warning);
  EXPECT_EQ(r.events[1].kind, AlertKind::hold_position);
  EXPECT_EQ(r.events.back().kind, AlertKind::destination_reached);
  for (std::size_t i = 0; i < r.events.size(); ++i) EXPECT_EQ(r.events[i].id, i);
  // First in range at vertex 4 (distance sqrt(1.25)); edge-triggered, so one warning.
  EXPECT_EQ(r.blocked, std::set<State>{4});
  EXPECT_EQ(r.held(4, 4), 1.0);
  int warnings = 0;
  for (const auto& e : r.events) warnings += e.kind == AlertKind::obstacle_warning;
  EXPECT_EQ(warnings, 1);
}

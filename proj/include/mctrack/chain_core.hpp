#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "mctrack/error.hpp"
#include "mctrack/stochastic_matrix.hpp"

namespace mctrack {

// Tolerance for rows of derived matrices (powers, products).
inline constexpr double kDerivedRowTolerance = 1e-10;

inline void require_state(const StochasticMatrix& p, State s, const char* what) {
  if (!p.contains(s))
    throw ValidationError(std::string(what) + " state " + std::to_string(s) + " out of range [0, " +
                          std::to_string(p.size()) + ")");
}

// P^n by repeated squaring; n = 0 gives the identity.
inline StochasticMatrix n_step(const StochasticMatrix& p, int n) {
  if (n < 0) throw ValidationError("n_step: n must be >= 0");
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(p.size(), p.size());
  Eigen::MatrixXd base = p.matrix();
  while (n > 0) {
    if (n & 1) result = result * base;
    n >>= 1;
    if (n) base = base * base;
  }
  return StochasticMatrix(std::move(result), kDerivedRowTolerance);
}

// Marginal after n steps: d0 P^n.
inline Distribution evolve(const Distribution& d0, const StochasticMatrix& p, int n) {
  if (d0.size() != p.size())
    throw ValidationError("evolve: distribution has " + std::to_string(d0.size()) +
                          " states, matrix has " + std::to_string(p.size()));
  if (n < 0) throw ValidationError("evolve: n must be >= 0");
  Eigen::RowVectorXd d = d0.vector().transpose();
  for (int k = 0; k < n; ++k) d = d * p.matrix();
  return Distribution(d.transpose(), kDerivedRowTolerance);
}

// States reachable from `from` along positive entries, including `from`.
inline std::vector<bool> reachable_from(const StochasticMatrix& p, State from) {
  require_state(p, from, "reachable_from:");
  const int n = p.size();
  std::vector<bool> seen(n, false);
  std::deque<State> queue{from};
  seen[from] = true;
  while (!queue.empty()) {
    const State i = queue.front();
    queue.pop_front();
    for (State j = 0; j < n; ++j)
      if (p(i, j) > 0.0 && !seen[j]) {
        seen[j] = true;
        queue.push_back(j);
      }
  }
  return seen;
}

// States from which `to` is reachable, including `to`.
inline std::vector<bool> reaching(const StochasticMatrix& p, State to) {
  require_state(p, to, "reaching:");
  const int n = p.size();
  std::vector<bool> seen(n, false);
  std::deque<State> queue{to};
  seen[to] = true;
  while (!queue.empty()) {
    const State j = queue.front();
    queue.pop_front();
    for (State i = 0; i < n; ++i)
      if (p(i, j) > 0.0 && !seen[i]) {
        seen[i] = true;
        queue.push_back(i);
      }
  }
  return seen;
}

// i -> j: some n >= 0 with P^n(i, j) > 0. Every state reaches itself.
inline bool accessible(const StochasticMatrix& p, State i, State j) {
  require_state(p, j, "accessible:");
  return reachable_from(p, i)[j];
}

struct ChainAnalysis {
  std::vector<std::vector<State>> classes;  // communicating classes, ordered by smallest member
  std::vector<bool> closed;                 // per class
  std::vector<int> period;                  // per class; 0 when the class contains no cycle
  bool irreducible = false;
  std::optional<Distribution> stationary;   // present iff irreducible
  std::optional<double> mixing_rate;        // second-largest eigenvalue modulus, iff irreducible
  std::optional<int> mixing_time;           // min n with max_i TV(P^n(i,.), pi) <= 1/4; iff aperiodic

  // Class index of each state.
  std::vector<int> class_of;
};

namespace detail {

// gcd of cycle lengths through the class, from BFS levels: every in-class
// edge (u, v) contributes level[u] + 1 - level[v].
inline int class_period(const StochasticMatrix& p, const std::vector<State>& members,
                        const std::vector<int>& class_of, int cls) {
  const int n = p.size();
  std::vector<int> level(n, -1);
  std::deque<State> queue{members.front()};
  level[members.front()] = 0;
  int g = 0;
  while (!queue.empty()) {
    const State u = queue.front();
    queue.pop_front();
    for (State v = 0; v < n; ++v) {
      if (p(u, v) <= 0.0 || class_of[v] != cls) continue;
      if (level[v] < 0) {
        level[v] = level[u] + 1;
        queue.push_back(v);
      } else {
        g = std::gcd(g, std::abs(level[u] + 1 - level[v]));
      }
    }
  }
  return g;
}

// Solves pi (P - I) = 0, sum(pi) = 1 for an irreducible matrix.
inline Eigen::VectorXd solve_stationary(const Eigen::MatrixXd& p) {
  const auto n = p.rows();
  Eigen::MatrixXd a = p.transpose() - Eigen::MatrixXd::Identity(n, n);
  a.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(n - 1) = 1.0;
  Eigen::VectorXd pi = a.fullPivLu().solve(b);
  for (Eigen::Index i = 0; i < n; ++i)
    if (pi(i) < 0.0 && pi(i) > -1e-12) pi(i) = 0.0;
  return pi / pi.sum();
}

}  // namespace detail

inline double second_largest_eigenvalue_modulus(const StochasticMatrix& p) {
  if (p.size() < 2) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(p.matrix(), /*computeEigenvectors=*/false);
  std::vector<double> moduli;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) moduli.push_back(std::abs(es.eigenvalues()(i)));
  std::sort(moduli.begin(), moduli.end(), std::greater<>());
  return moduli[1];
}

// Smallest n with max_i TV(P^n(i, .), pi) <= eps, or nullopt when the bound
// is not reached within max_steps.
inline std::optional<int> mixing_time(const StochasticMatrix& p, const Distribution& pi, double eps = 0.25,
                                      int max_steps = 100000) {
  Eigen::MatrixXd pn = Eigen::MatrixXd::Identity(p.size(), p.size());
  for (int n = 0; n <= max_steps; ++n) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < pn.rows(); ++i)
      worst = std::max(worst, total_variation(pn.row(i).transpose(), pi.vector()));
    if (worst <= eps) return n;
    pn = pn * p.matrix();
  }
  return std::nullopt;
}

inline ChainAnalysis analyze(const StochasticMatrix& p) {
  const int n = p.size();
  ChainAnalysis out;
  out.class_of.assign(n, -1);

  std::vector<std::vector<bool>> reach(n);
  for (State i = 0; i < n; ++i) reach[i] = reachable_from(p, i);

  for (State i = 0; i < n; ++i) {
    if (out.class_of[i] >= 0) continue;
    const int cls = static_cast<int>(out.classes.size());
    std::vector<State> members;
    for (State j = i; j < n; ++j)
      if (reach[i][j] && reach[j][i]) {
        members.push_back(j);
        out.class_of[j] = cls;
      }
    out.classes.push_back(std::move(members));
  }

  for (std::size_t c = 0; c < out.classes.size(); ++c) {
    bool closed = true;
    for (State i : out.classes[c])
      for (State j = 0; j < n && closed; ++j)
        if (p(i, j) > 0.0 && out.class_of[j] != static_cast<int>(c)) closed = false;
    out.closed.push_back(closed);
    out.period.push_back(detail::class_period(p, out.classes[c], out.class_of, static_cast<int>(c)));
  }

  out.irreducible = out.classes.size() == 1;
  if (out.irreducible) {
    out.stationary = Distribution(detail::solve_stationary(p.matrix()), kDerivedRowTolerance);
    out.mixing_rate = second_largest_eigenvalue_modulus(p);
    if (out.period.front() == 1) out.mixing_time = mixing_time(p, *out.stationary);
  }
  return out;
}

// Stationary distribution of a chain with exactly one closed class (unique
// in that case, supported on the closed class). nullopt otherwise.
inline std::optional<Distribution> unique_stationary(const StochasticMatrix& p) {
  const auto a = analyze(p);
  if (a.stationary) return a.stationary;
  std::optional<std::size_t> closed;
  for (std::size_t c = 0; c < a.classes.size(); ++c)
    if (a.closed[c]) {
      if (closed) return std::nullopt;
      closed = c;
    }
  if (!closed) return std::nullopt;
  const auto& members = a.classes[*closed];
  const auto k = static_cast<Eigen::Index>(members.size());
  Eigen::MatrixXd sub(k, k);
  for (Eigen::Index r = 0; r < k; ++r)
    for (Eigen::Index c = 0; c < k; ++c) sub(r, c) = p(members[r], members[c]);
  const Eigen::VectorXd pi_sub = detail::solve_stationary(sub);
  Eigen::VectorXd pi = Eigen::VectorXd::Zero(p.size());
  for (Eigen::Index r = 0; r < k; ++r) pi(members[r]) = pi_sub(r);
  return Distribution(std::move(pi), kDerivedRowTolerance);
}

// Expected steps to first reach `target` from every state. Entries are
// infinite for states from which some reachable state can never reach it.
inline Eigen::VectorXd hitting_times_to(const StochasticMatrix& p, State target) {
  require_state(p, target, "hitting_times_to: target");
  const int n = p.size();
  const auto can_reach = reaching(p, target);
  // A state has a finite hitting time iff every state it can reach can reach the target.
  std::vector<bool> finite(n, false);
  for (State i = 0; i < n; ++i) {
    const auto r = reachable_from(p, i);
    bool ok = true;
    for (State j = 0; j < n && ok; ++j)
      if (r[j] && !can_reach[j]) ok = false;
    finite[i] = ok;
  }
  std::vector<State> unknowns;
  std::vector<int> index(n, -1);
  for (State i = 0; i < n; ++i)
    if (finite[i] && i != target) {
      index[i] = static_cast<int>(unknowns.size());
      unknowns.push_back(i);
    }
  Eigen::VectorXd h = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  h(target) = 0.0;
  if (unknowns.empty()) return h;
  const auto k = static_cast<Eigen::Index>(unknowns.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(k, k);
  for (Eigen::Index r = 0; r < k; ++r)
    for (Eigen::Index c = 0; c < k; ++c) a(r, c) -= p(unknowns[r], unknowns[c]);
  const Eigen::VectorXd sol = a.partialPivLu().solve(Eigen::VectorXd::Ones(k));
  for (Eigen::Index r = 0; r < k; ++r) h(unknowns[r]) = sol(r);
  return h;
}

// Expected number of steps for a walk from u to first visit v.
inline double hitting_time(const StochasticMatrix& p, State u, State v) {
  require_state(p, u, "hitting_time: source");
  require_state(p, v, "hitting_time: target");
  if (u == v) return 0.0;
  const auto from_u = reachable_from(p, u);
  const auto to_v = reaching(p, v);
  std::string stranded;
  for (State j = 0; j < p.size(); ++j)
    if (from_u[j] && !to_v[j]) stranded += (stranded.empty() ? "" : ",") + std::to_string(j);
  if (!stranded.empty())
    throw ValidationError("hitting_time(" + std::to_string(u) + ", " + std::to_string(v) +
                          ") is infinite: states {" + stranded + "} are reachable from " +
                          std::to_string(u) + " but cannot reach " + std::to_string(v));
  return hitting_times_to(p, v)(u);
}

// Expected round trip u -> v -> u.
inline double commute_time(const StochasticMatrix& p, State u, State v) {
  return hitting_time(p, u, v) + hitting_time(p, v, u);
}

}  // namespace mctrack

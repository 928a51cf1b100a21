#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include "mctrack/error.hpp"
#include "mctrack/rng.hpp"
#include "mctrack/stochastic_matrix.hpp"

namespace mctrack {

inline constexpr double kDefaultTransientTolerance = 1e-9;

// Jump chain P run at the event epochs of a rate-lambda Poisson process.
struct UniformizedChain {
  StochasticMatrix jump;
  double rate = 1.0;

  UniformizedChain(StochasticMatrix p, double lambda) : jump(std::move(p)), rate(lambda) {
    if (!std::isfinite(rate) || rate <= 0.0)
      throw ValidationError("uniformization rate must be finite and > 0, got " + io::format_double(rate));
  }
};

// Infinitesimal generator: off-diagonals >= 0, rows summing to zero.
class GeneratorMatrix {
 public:
  explicit GeneratorMatrix(Eigen::MatrixXd q) : q_(std::move(q)) {
    if (q_.rows() != q_.cols()) throw ValidationError("generator must be square");
    for (Eigen::Index i = 0; i < q_.rows(); ++i) {
      for (Eigen::Index j = 0; j < q_.cols(); ++j)
        if (i != j && !(q_(i, j) >= 0.0))
          throw ValidationError("generator off-diagonal (" + std::to_string(i) + "," + std::to_string(j) +
                                ") is negative");
      if (std::abs(q_.row(i).sum()) > 1e-12)
        throw ValidationError("generator row " + std::to_string(i) + " does not sum to 0");
    }
  }

  int size() const { return static_cast<int>(q_.rows()); }
  double operator()(int i, int j) const { return q_(i, j); }
  const Eigen::MatrixXd& matrix() const { return q_; }

 private:
  Eigen::MatrixXd q_;
};

// Q = lambda (P - I). The diagonal is formed as minus the off-diagonal row
// sum, which equals lambda (P_ii - 1) up to rounding and keeps rows at zero.
inline GeneratorMatrix generator(const UniformizedChain& c) {
  const Eigen::MatrixXd& p = c.jump.matrix();
  const auto n = p.rows();
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double off = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      q(i, j) = c.rate * p(i, j);
      off += q(i, j);
    }
    q(i, i) = -off;
  }
  return GeneratorMatrix(std::move(q));
}

// Pr{N(t) = n} for a rate-lambda Poisson process, evaluated in log space.
inline double poisson_pmf(double rate, double t, int n) {
  if (!(rate > 0.0) || !(t >= 0.0) || n < 0)
    throw ValidationError("poisson_pmf: requires rate > 0, t >= 0, n >= 0");
  const double mean = rate * t;
  if (mean == 0.0) return n == 0 ? 1.0 : 0.0;
  return std::exp(n * std::log(mean) - mean - std::lgamma(n + 1.0));
}

// Pr{N > n} for a Poisson variable with the given mean.
inline double poisson_tail(double mean, int n) {
  if (mean == 0.0) return 0.0;
  // Pr{N <= n} = Q(n + 1, mean), so the tail is the lower regularized gamma.
  return boost::math::gamma_p(static_cast<double>(n) + 1.0, mean);
}

// Smallest N with Pr{N > N} < tol.
inline int truncation_point(double mean, double tol) {
  if (mean == 0.0) return 0;
  int hi = static_cast<int>(std::ceil(mean)) + 1;
  while (poisson_tail(mean, hi) >= tol) hi *= 2;
  int lo = 0;
  while (lo < hi) {
    const int mid = lo + (hi - lo) / 2;
    if (poisson_tail(mean, mid) < tol)
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo;
}

// P(t) = sum_{n=0}^{N} Pr{N(t) = n} P^n, with N chosen so the dropped
// Poisson mass is below tol. Row sums lie in [1 - tol, 1]; they are not
// renormalized.
inline StochasticMatrix transient(const UniformizedChain& c, double t,
                                  double tol = kDefaultTransientTolerance) {
  if (!(t >= 0.0)) throw ValidationError("transient: t must be >= 0");
  if (!(tol > 0.0 && tol <= 1e-6)) throw ValidationError("transient: tol must lie in (0, 1e-6]");
  const auto n = c.jump.size();
  const double mean = c.rate * t;
  const int last = truncation_point(mean, tol);
  Eigen::MatrixXd pn = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k <= last; ++k) {
    if (k > 0) pn = pn * c.jump.matrix();
    sum += poisson_pmf(c.rate, t, k) * pn;
  }
  return StochasticMatrix(std::move(sum), tol + 1e-12);
}

// Mean dwell per Poisson epoch, identical for every state.
inline double sojourn_mean(const UniformizedChain& c) { return 1.0 / c.rate; }

inline std::vector<double> sample_arrivals(double rate, double horizon, Rng& rng) {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw ValidationError("sample_arrivals: rate must be > 0");
  if (!(horizon >= 0.0)) throw ValidationError("sample_arrivals: horizon must be >= 0");
  std::vector<double> times;
  double t = 0.0;
  for (;;) {
    t += rng.exponential(rate);
    if (t > horizon) return times;
    times.push_back(t);
  }
}

// Poisson event epochs in (0, horizon], deterministic given the seed.
inline std::vector<double> sample_arrivals(double rate, double horizon, std::uint64_t seed) {
  Rng rng(seed);
  return sample_arrivals(rate, horizon, rng);
}

}  // namespace mctrack

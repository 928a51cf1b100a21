#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>

#include <Eigen/Dense>

namespace mctrack {

// Reproducible random source, algorithm "mt64-v1":
//   engine   std::mt19937_64 seeded with the 64-bit seed (its output sequence
//            is fixed by the C++ standard)
//   uniform  (x >> 11) * 2^-53 in [0, 1)
//   open     ((x >> 11) + 0.5) * 2^-53 in (0, 1)
//   exp(l)   -log(open) / l   (inverse CDF)
//   normal   Box-Muller on two open uniforms, both outputs used
//   discrete first j with cumulative row mass > uniform (last positive j on
//            round-off overflow)
// std:: distributions are avoided because their algorithms are
// implementation-defined.
class Rng {
 public:
  static constexpr const char* kAlgorithm = "mt64-v1";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform_open() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  double exponential(double rate) { return -std::log(uniform_open()) / rate; }

  std::pair<double, double> normal_pair() {
    const double u1 = uniform_open();
    const double u2 = uniform_open();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(a), r * std::sin(a)};
  }

  template <typename Row>
  int discrete(const Row& probs) {
    const double u = uniform();
    double acc = 0.0;
    int last_positive = -1;
    for (Eigen::Index j = 0; j < probs.size(); ++j) {
      if (probs(j) <= 0.0) continue;
      last_positive = static_cast<int>(j);
      acc += probs(j);
      if (u < acc) return last_positive;
    }
    return last_positive;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mctrack

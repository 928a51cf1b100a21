#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mctrack/error.hpp"
#include "mctrack/io.hpp"

namespace mctrack {

using State = int;

inline constexpr double kRowSumTolerance = 1e-12;

// Row-stochastic transition matrix. Rows sum to one within the tolerance
// given at construction; entries are nonnegative.
class StochasticMatrix {
 public:
  StochasticMatrix() = default;

  explicit StochasticMatrix(Eigen::MatrixXd m, double row_tol = kRowSumTolerance)
      : m_(std::move(m)) {
    if (m_.rows() != m_.cols())
      throw ValidationError("transition matrix must be square, got " + std::to_string(m_.rows()) +
                            "x" + std::to_string(m_.cols()));
    for (Eigen::Index i = 0; i < m_.rows(); ++i) {
      for (Eigen::Index j = 0; j < m_.cols(); ++j) {
        const double v = m_(i, j);
        if (!std::isfinite(v) || v < 0.0)
          throw ValidationError("transition entry (" + std::to_string(i) + "," + std::to_string(j) +
                                ") is negative or not finite");
      }
      const double s = m_.row(i).sum();
      if (std::abs(s - 1.0) > row_tol)
        throw ValidationError("row " + std::to_string(i) + " sums to " + io::format_double(s) +
                              ", not 1");
    }
  }

  static StochasticMatrix identity(int n) {
    return StochasticMatrix(Eigen::MatrixXd::Identity(n, n));
  }

  int size() const { return static_cast<int>(m_.rows()); }
  double operator()(State i, State j) const { return m_(i, j); }
  const Eigen::MatrixXd& matrix() const { return m_; }

  bool contains(State s) const { return s >= 0 && s < size(); }

 private:
  Eigen::MatrixXd m_;
};

// Probability vector over states.
class Distribution {
 public:
  Distribution() = default;

  explicit Distribution(Eigen::VectorXd p, double tol = kRowSumTolerance) : p_(std::move(p)) {
    for (Eigen::Index i = 0; i < p_.size(); ++i)
      if (!std::isfinite(p_(i)) || p_(i) < 0.0)
        throw ValidationError("distribution entry " + std::to_string(i) + " is negative or not finite");
    if (std::abs(p_.sum() - 1.0) > tol)
      throw ValidationError("distribution sums to " + io::format_double(p_.sum()) + ", not 1");
  }

  static Distribution uniform(int n) {
    return Distribution(Eigen::VectorXd::Constant(n, 1.0 / n), 1e-12);
  }
  static Distribution point_mass(int n, State s) {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
    p(s) = 1.0;
    return Distribution(std::move(p));
  }

  int size() const { return static_cast<int>(p_.size()); }
  double operator[](State s) const { return p_(s); }
  const Eigen::VectorXd& vector() const { return p_; }

 private:
  Eigen::VectorXd p_;
};

inline double total_variation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return 0.5 * (a - b).cwiseAbs().sum();
}

namespace csv {

inline std::string write_matrix(const Eigen::MatrixXd& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += io::format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

inline std::string write_distribution(const Eigen::VectorXd& p) {
  std::string out;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    out += io::format_double(p(i));
    out += '\n';
  }
  return out;
}

inline Eigen::MatrixXd read_matrix(const std::string& text) {
  std::vector<std::vector<double>> rows;
  int lineno = 0;
  for (const auto& line : io::lines(text)) {
    ++lineno;
    if (io::trim(line).empty()) continue;
    std::vector<double> row;
    for (auto cell : io::split(line, ','))
      row.push_back(io::parse_double(cell, "line " + std::to_string(lineno)));
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError("line " + std::to_string(lineno) + ": expected " +
                       std::to_string(rows.front().size()) + " columns, got " +
                       std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto m = n ? static_cast<Eigen::Index>(rows.front().size()) : 0;
  Eigen::MatrixXd out(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) out(i, j) = rows[i][j];
  return out;
}

inline Eigen::VectorXd read_distribution(const std::string& text) {
  const Eigen::MatrixXd m = read_matrix(text);
  if (m.cols() != 1 && m.rows() != 1)
    throw ParseError("distribution must be a single row or a single column");
  return m.cols() == 1 ? Eigen::VectorXd(m.col(0)) : Eigen::VectorXd(m.row(0).transpose());
}

}  // namespace csv

}  // namespace mctrack

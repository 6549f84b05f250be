#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "mdgp/log_density.hpp"

namespace mdgp::testing {

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols,
                                     std::mt19937_64 &rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd A(rows, cols);
  for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = normal(rng);
  return A;
}

inline Eigen::VectorXd random_vector(Eigen::Index n, std::mt19937_64 &rng) {
  return random_matrix(n, 1, rng);
}

/// A A^T for a C x rank Gaussian A.
inline Eigen::MatrixXd random_psd(Eigen::Index C, Eigen::Index rank,
                                  std::mt19937_64 &rng) {
  const Eigen::MatrixXd A = random_matrix(C, rank, rng);
  return A * A.transpose();
}

/// Central differences of the log density.
inline Eigen::VectorXd fd_gradient(const LogDensity &target,
                                   const Eigen::VectorXd &q, double h) {
  Eigen::VectorXd g(q.size()), scratch;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    Eigen::VectorXd up = q, down = q;
    up(i) += h;
    down(i) -= h;
    g(i) = (target.log_density(up, scratch) -
            target.log_density(down, scratch)) /
           (2.0 * h);
  }
  return g;
}

/// |a - b| / max(1, |a|, |b|).
inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

inline double max_rel_diff(const Eigen::VectorXd &a, const Eigen::VectorXd &b) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) m = std::max(m, rel_diff(a(i), b(i)));
  return m;
}

}  // namespace mdgp::testing

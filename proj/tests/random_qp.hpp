#pragma once

#include "fxtqp/qp.hpp"

#include <random>

namespace fxtqp::testing {

// Strictly convex QP with a known interior point.
inline QpProblem random_qp(std::mt19937_64& rng, int n, int m) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.05, 2.0);
  auto randn = [&](int r, int c) {
    Eigen::MatrixXd M(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) M(i, j) = nd(rng);
    return M;
  };
  QpProblem p;
  Eigen::MatrixXd B = randn(n, n);
  p.H = B.transpose() * B + 0.1 * Eigen::MatrixXd::Identity(n, n);
  p.F = 3.0 * randn(n, 1);
  p.A = randn(m, n);
  Eigen::VectorXd z0 = randn(n, 1);
  p.b.resize(m);
  for (int i = 0; i < m; ++i) p.b(i) = p.A.row(i).dot(z0) + ud(rng);
  return p;
}

}  // namespace fxtqp::testing

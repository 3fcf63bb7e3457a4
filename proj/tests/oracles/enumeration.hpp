#pragma once

// Brute-force reference solvers for small problems. These deliberately share
// no code with the simplex or branch-and-bound implementations.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

namespace spacelog::oracle {

struct SmallLp {
  Eigen::MatrixXd A;  // A x <= b
  Eigen::VectorXd b;
  Eigen::VectorXd c;  // minimize c'x
  std::vector<double> lower;  // finite
  std::vector<double> upper;  // finite
};

// Enumerates every basic solution (n active constraints out of rows + bounds)
// and returns the best feasible objective, or nullopt if none is feasible.
inline std::optional<double> vertex_enumeration(const SmallLp& lp, double tol = 1e-9) {
  const auto n = lp.A.cols();
  const auto m = lp.A.rows();
  // All constraints as g x <= h.
  std::vector<Eigen::VectorXd> g;
  std::vector<double> h;
  for (Eigen::Index i = 0; i < m; ++i) {
    g.push_back(lp.A.row(i).transpose());
    h.push_back(lp.b[i]);
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e[j] = 1.0;
    g.push_back(e);
    h.push_back(lp.upper[static_cast<std::size_t>(j)]);
    g.push_back(-e);
    h.push_back(-lp.lower[static_cast<std::size_t>(j)]);
  }
  const auto total = static_cast<Eigen::Index>(g.size());
  std::optional<double> best;
  std::vector<Eigen::Index> pick(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) pick[static_cast<std::size_t>(k)] = k;

  auto feasible = [&](const Eigen::VectorXd& x) {
    for (Eigen::Index i = 0; i < total; ++i)
      if (g[static_cast<std::size_t>(i)].dot(x) > h[static_cast<std::size_t>(i)] + tol * (1 + std::abs(h[static_cast<std::size_t>(i)])))
        return false;
    return true;
  };

  if (n == 0) return 0.0;
  while (true) {
    Eigen::MatrixXd M(n, n);
    Eigen::VectorXd r(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      M.row(k) = g[static_cast<std::size_t>(pick[static_cast<std::size_t>(k)])].transpose();
      r[k] = h[static_cast<std::size_t>(pick[static_cast<std::size_t>(k)])];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    if (lu.rank() == n) {
      const Eigen::VectorXd x = lu.solve(r);
      if (feasible(x)) {
        const double v = lp.c.dot(x);
        if (!best || v < *best) best = v;
      }
    }
    // Next combination.
    Eigen::Index k = n - 1;
    while (k >= 0 && pick[static_cast<std::size_t>(k)] == total - n + k) --k;
    if (k < 0) break;
    ++pick[static_cast<std::size_t>(k)];
    for (Eigen::Index t = k + 1; t < n; ++t) pick[static_cast<std::size_t>(t)] = pick[static_cast<std::size_t>(t - 1)] + 1;
  }
  return best;
}

struct SmallMilp {
  // Columns [0, num_binary) are binary; the rest continuous with finite bounds.
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  std::size_t num_binary = 0;
  std::vector<double> lower;  // continuous part only
  std::vector<double> upper;
};

// Tries all 2^k binary assignments; the continuous remainder (if any) is
// solved by vertex enumeration.
inline std::optional<double> exhaustive_enumeration(const SmallMilp& p) {
  const auto k = p.num_binary;
  const auto n = p.A.cols();
  const auto nc = n - static_cast<Eigen::Index>(k);
  std::optional<double> best;
  for (std::size_t mask = 0; mask < (std::size_t{1} << k); ++mask) {
    Eigen::VectorXd xb(static_cast<Eigen::Index>(k));
    for (std::size_t j = 0; j < k; ++j) xb[static_cast<Eigen::Index>(j)] = (mask >> j) & 1u ? 1.0 : 0.0;
    const Eigen::VectorXd fixed_act = p.A.leftCols(static_cast<Eigen::Index>(k)) * xb;
    const double fixed_obj = p.c.head(static_cast<Eigen::Index>(k)).dot(xb);
    std::optional<double> rest;
    if (nc == 0) {
      bool ok = true;
      for (Eigen::Index i = 0; i < p.A.rows(); ++i)
        if (fixed_act[i] > p.b[i] + 1e-9) ok = false;
      if (ok) rest = 0.0;
    } else {
      SmallLp lp{p.A.rightCols(nc), p.b - fixed_act, p.c.tail(nc), p.lower, p.upper};
      rest = vertex_enumeration(lp);
    }
    if (rest) {
      const double v = fixed_obj + *rest;
      if (!best || v < *best) best = v;
    }
  }
  return best;
}

}  // namespace spacelog::oracle

#pragma once

// Bounded-variable revised primal simplex for
//
//   min c'x  s.t.  A x <= b,  lower <= x <= upper
//
// A slack s_i >= 0 is appended to every row (A x + s = b), so the all-slack
// basis is always available as a starting point. Phase 1 minimizes the sum of
// bound violations of the basic variables, which lets the solver start from
// any basis, including a parent basis whose bounds were just tightened by
// branching. The basis inverse is kept as a dense LU factorization of the
// initial basis plus a product-form eta file, refactorized every
// `refactor_interval` pivots. Dantzig pricing with a Harris ratio test;
// switches to Bland's rule while the objective stalls.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "spacelog/error.hpp"
#include "spacelog/milp_model.hpp"

namespace spacelog {

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

inline std::string_view to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::IterationLimit: return "iteration-limit";
  }
  return "?";
}

enum class VarStatus : unsigned char { Basic, AtLower, AtUpper, Free, Fixed };

// Basis over the n structural columns followed by the m slack columns.
struct Basis {
  std::vector<int> basic;          // size m, column index per basis row
  std::vector<VarStatus> status;   // size n + m
  bool empty() const { return status.empty(); }
};

struct LpOptions {
  double primal_tol = 1e-9;
  double dual_tol = 1e-9;
  double pivot_tol = 1e-9;
  int refactor_interval = 50;
  int stall_limit = 40;
  std::size_t max_iterations = 0;  // 0: automatic
};

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Eigen::VectorXd x;       // structural values (size n)
  double objective = std::numeric_limits<double>::quiet_NaN();
  std::size_t iterations = 0;
  Eigen::VectorXd duals;   // row multipliers y, y <= 0 at optimality
  Basis basis;
};

namespace detail {

class RevisedSimplex {
 public:
  RevisedSimplex(const StandardForm& sf, std::span<const double> lower, std::span<const double> upper,
                 const LpOptions& opt)
      : sf_(sf), opt_(opt), m_(sf.A.rows()), n_(sf.A.cols()), total_(m_ + n_) {
    lo_.resize(total_);
    up_.resize(total_);
    cost_ = Eigen::VectorXd::Zero(total_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      lo_[j] = lower[static_cast<std::size_t>(j)];
      up_[j] = upper[static_cast<std::size_t>(j)];
      cost_[j] = sf.c[j];
    }
    for (Eigen::Index i = 0; i < m_; ++i) {
      lo_[n_ + i] = 0.0;
      up_[n_ + i] = kInf;
    }
    x_ = Eigen::VectorXd::Zero(total_);
    pos_.assign(static_cast<std::size_t>(total_), -1);
  }

  LpResult run(const Basis* warm) {
    LpResult res;
    for (Eigen::Index j = 0; j < total_; ++j)
      if (lo_[j] > up_[j] + opt_.primal_tol) {
        res.status = LpStatus::Infeasible;
        return res;
      }
    if (!(warm && install(*warm))) cold_start();
    if (!refactor()) {
      cold_start();
      if (!refactor()) throw NumericalError("slack basis failed to factorize");
    }

    const std::size_t limit = opt_.max_iterations ? opt_.max_iterations
                                                  : std::max<std::size_t>(20000, 50 * static_cast<std::size_t>(total_));
    int stall = 0;
    int recoveries = 0;
    // Progress is measured against the best value seen in the current phase,
    // so drift after a refactorization cannot keep resetting the stall count.
    double best_obj = kInf;
    bool best_phase1 = true;
    bool verified = false;
    LpStatus status = LpStatus::IterationLimit;

    while (iterations_ < limit) {
      if (etas_.size() >= static_cast<std::size_t>(opt_.refactor_interval)) {
        if (!refactor()) {
          if (++recoveries > 3) throw NumericalError("basis repeatedly singular");
          cold_start();
          refactor();
        }
      }

      const bool phase1 = compute_phase_costs();
      const double obj = phase_objective(phase1);
      if (phase1 != best_phase1) {
        best_phase1 = phase1;
        best_obj = kInf;
      }
      if (obj < best_obj - 1e-9 * (1.0 + std::abs(best_obj))) {
        best_obj = obj;
        stall = 0;
        bland_ = false;
      } else if (++stall > opt_.stall_limit) {
        bland_ = true;
      }

      const Eigen::VectorXd y = btran(phase_cost_);
      int dir = 0;
      const Eigen::Index q = price(y, phase1, dir);
      if (q < 0) {
        // Confirm on a fresh factorization before declaring a result.
        if (!verified && !etas_.empty()) {
          verified = true;
          if (!refactor()) {
            cold_start();
            refactor();
          }
          continue;
        }
        status = phase1 ? LpStatus::Infeasible : LpStatus::Optimal;
        break;
      }
      verified = false;

      const Eigen::VectorXd alpha = ftran(column(q));
      Eigen::Index leave_row = -1;
      bool leave_at_upper = false;
      double theta = kInf;
      ratio_test(alpha, q, dir, phase1, theta, leave_row, leave_at_upper);

      if (!std::isfinite(theta)) {
        if (!phase1) {
          status = LpStatus::Unbounded;
          break;
        }
        // Phase 1 cannot be unbounded; treat as numerical drift.
        if (++recoveries > 3) throw NumericalError("phase 1 ratio test found no blocking variable");
        refactor();
        continue;
      }

      ++iterations_;
      x_[q] += dir * theta;
      for (Eigen::Index i = 0; i < m_; ++i) x_[basic_[i]] -= dir * theta * alpha[i];

      if (leave_row < 0) {
        // Bound flip of the entering variable.
        status_[q] = dir > 0 ? VarStatus::AtUpper : VarStatus::AtLower;
        x_[q] = dir > 0 ? up_[q] : lo_[q];
        continue;
      }
      const int leaving = basic_[leave_row];
      status_[leaving] = leave_at_upper ? VarStatus::AtUpper : VarStatus::AtLower;
      if (lo_[leaving] == up_[leaving]) status_[leaving] = VarStatus::Fixed;
      x_[leaving] = leave_at_upper ? up_[leaving] : lo_[leaving];
      pos_[leaving] = -1;
      basic_[leave_row] = static_cast<int>(q);
      pos_[q] = static_cast<int>(leave_row);
      status_[q] = VarStatus::Basic;
      etas_.push_back(Eta{leave_row, alpha});
    }

    res.status = status;
    res.iterations = iterations_;
    res.x = x_.head(n_);
    res.objective = sf_.c.dot(res.x) + sf_.objective_offset;
    Eigen::VectorXd cb(m_);
    for (Eigen::Index i = 0; i < m_; ++i) cb[i] = cost_[basic_[i]];
    res.duals = btran(cb);
    res.basis.basic.assign(basic_.begin(), basic_.end());
    res.basis.status = status_;
    return res;
  }

 private:
  static constexpr double kMinRcond = 1e-13;

  struct Eta {
    Eigen::Index row;
    Eigen::VectorXd col;
  };

  Eigen::VectorXd column(Eigen::Index j) const {
    if (j < n_) return sf_.A.col(j);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(m_);
    e[j - n_] = 1.0;
    return e;
  }

  void place_nonbasic(Eigen::Index j) {
    if (lo_[j] == up_[j]) {
      status_[j] = VarStatus::Fixed;
      x_[j] = lo_[j];
    } else if (std::isfinite(lo_[j])) {
      status_[j] = VarStatus::AtLower;
      x_[j] = lo_[j];
    } else if (std::isfinite(up_[j])) {
      status_[j] = VarStatus::AtUpper;
      x_[j] = up_[j];
    } else {
      status_[j] = VarStatus::Free;
      x_[j] = 0.0;
    }
  }

  void cold_start() {
    status_.assign(static_cast<std::size_t>(total_), VarStatus::AtLower);
    basic_.resize(static_cast<std::size_t>(m_));
    std::fill(pos_.begin(), pos_.end(), -1);
    for (Eigen::Index j = 0; j < n_; ++j) place_nonbasic(j);
    for (Eigen::Index i = 0; i < m_; ++i) {
      basic_[i] = static_cast<int>(n_ + i);
      pos_[n_ + i] = static_cast<int>(i);
      status_[n_ + i] = VarStatus::Basic;
    }
  }

  bool install(const Basis& warm) {
    if (warm.status.size() != static_cast<std::size_t>(total_) || warm.basic.size() != static_cast<std::size_t>(m_))
      return false;
    status_ = warm.status;
    basic_ = warm.basic;
    std::fill(pos_.begin(), pos_.end(), -1);
    for (Eigen::Index i = 0; i < m_; ++i) {
      const int j = basic_[i];
      if (j < 0 || j >= total_ || pos_[j] >= 0 || status_[j] != VarStatus::Basic) return false;
      pos_[j] = static_cast<int>(i);
    }
    for (Eigen::Index j = 0; j < total_; ++j) {
      if (status_[j] == VarStatus::Basic) {
        if (pos_[j] < 0) return false;
        continue;
      }
      // Respect the previous side when it still exists under the new bounds.
      if (lo_[j] == up_[j]) {
        status_[j] = VarStatus::Fixed;
        x_[j] = lo_[j];
      } else if (status_[j] == VarStatus::AtUpper && std::isfinite(up_[j])) {
        x_[j] = up_[j];
      } else if (status_[j] == VarStatus::AtLower && std::isfinite(lo_[j])) {
        x_[j] = lo_[j];
      } else {
        place_nonbasic(j);
      }
    }
    return true;
  }

  Eigen::MatrixXd basis_matrix() const {
    Eigen::MatrixXd B(m_, m_);
    for (Eigen::Index i = 0; i < m_; ++i) B.col(i) = column(basic_[i]);
    return B;
  }

  // Swaps the columns that a rank-revealing LU finds dependent for the
  // slacks of the rows left without a pivot. The kept columns are
  // nonsingular on the pivot rows, so the result is block triangular with
  // an identity block and therefore nonsingular.
  void repair_basis(const Eigen::MatrixXd& B) {
    Eigen::FullPivLU<Eigen::MatrixXd> rr(B);
    rr.setThreshold(1e-10);
    const Eigen::Index r = rr.rank();
    const auto& P = rr.permutationP().indices();  // row i of B goes to P[i]
    const auto& Q = rr.permutationQ().indices();  // column k of B*Q is Q[k]
    std::vector<Eigen::Index> free_rows;
    for (Eigen::Index i = 0; i < m_; ++i)
      if (P[i] >= r) free_rows.push_back(i);
    for (Eigen::Index k = r; k < m_; ++k) {
      const Eigen::Index pos = Q[k];
      const int out = basic_[pos];
      pos_[out] = -1;
      place_nonbasic(out);
      const auto in = static_cast<int>(n_ + free_rows[static_cast<std::size_t>(k - r)]);
      basic_[pos] = in;
      pos_[in] = static_cast<int>(pos);
      status_[in] = VarStatus::Basic;
    }
  }

  // Factorizes the current basis (repairing it if singular) and recomputes
  // the basic values.
  bool refactor() {
    etas_.clear();
    if (m_ == 0) return true;
    lu_.compute(basis_matrix());
    if (!(lu_.rcond() > kMinRcond)) {
      repair_basis(basis_matrix());
      lu_.compute(basis_matrix());
      if (!(lu_.rcond() > kMinRcond)) return false;
    }
    Eigen::VectorXd rhs = sf_.b;
    for (Eigen::Index j = 0; j < total_; ++j) {
      if (status_[j] == VarStatus::Basic || x_[j] == 0.0) continue;
      if (j < n_) rhs -= sf_.A.col(j) * x_[j];
      else rhs[j - n_] -= x_[j];
    }
    const Eigen::VectorXd xb = lu_.solve(rhs);
    for (Eigen::Index i = 0; i < m_; ++i) x_[basic_[i]] = xb[i];
    return true;
  }

  Eigen::VectorXd ftran(Eigen::VectorXd a) const {
    if (m_ == 0) return a;
    Eigen::VectorXd w = lu_.solve(a);
    for (const auto& e : etas_) {
      const double wr = w[e.row] / e.col[e.row];
      w -= wr * e.col;
      w[e.row] = wr;
    }
    return w;
  }

  Eigen::VectorXd btran(Eigen::VectorXd z) const {
    if (m_ == 0) return z;
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      const double ar = it->col[it->row];
      const double dot = it->col.dot(z) - ar * z[it->row];
      z[it->row] = (z[it->row] - dot) / ar;
    }
    return lu_.transpose().solve(z);
  }

  double tol_at(double bound) const { return opt_.primal_tol * (1.0 + std::abs(bound)); }

  bool below(Eigen::Index j) const { return x_[j] < lo_[j] - tol_at(lo_[j]); }
  bool above(Eigen::Index j) const { return x_[j] > up_[j] + tol_at(up_[j]); }

  // Fills phase_cost_ (size m, costs of the basic variables) and reports
  // whether any basic variable violates its bounds.
  bool compute_phase_costs() {
    phase_cost_.resize(m_);
    bool infeasible = false;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const int j = basic_[i];
      if (below(j)) {
        phase_cost_[i] = -1.0;
        infeasible = true;
      } else if (above(j)) {
        phase_cost_[i] = 1.0;
        infeasible = true;
      } else {
        phase_cost_[i] = 0.0;
      }
    }
    if (!infeasible)
      for (Eigen::Index i = 0; i < m_; ++i) phase_cost_[i] = cost_[basic_[i]];
    return infeasible;
  }

  double phase_objective(bool phase1) const {
    double s = 0.0;
    if (phase1) {
      for (Eigen::Index i = 0; i < m_; ++i) {
        const int j = basic_[i];
        if (x_[j] < lo_[j]) s += lo_[j] - x_[j];
        else if (x_[j] > up_[j]) s += x_[j] - up_[j];
      }
      return s;
    }
    return cost_.dot(x_);
  }

  Eigen::Index price(const Eigen::VectorXd& y, bool phase1, int& dir) const {
    Eigen::Index best = -1;
    double best_score = 0.0;
    for (Eigen::Index j = 0; j < total_; ++j) {
      const VarStatus st = status_[j];
      if (st == VarStatus::Basic || st == VarStatus::Fixed) continue;
      const double cj = phase1 ? 0.0 : cost_[j];
      const double d = cj - (j < n_ ? sf_.A.col(j).dot(y) : y[j - n_]);
      int want = 0;
      if ((st == VarStatus::AtLower || st == VarStatus::Free) && d < -opt_.dual_tol) want = 1;
      else if ((st == VarStatus::AtUpper || st == VarStatus::Free) && d > opt_.dual_tol) want = -1;
      if (want == 0) continue;
      if (bland_) {
        dir = want;
        return j;
      }
      if (std::abs(d) > best_score) {
        best_score = std::abs(d);
        best = j;
        dir = want;
      }
    }
    return best;
  }

  void ratio_test(const Eigen::VectorXd& alpha, Eigen::Index q, int dir, bool phase1, double& theta,
                  Eigen::Index& leave_row, bool& leave_at_upper) const {
    // For each basic row: the bound it blocks at, if any.
    struct Candidate {
      Eigen::Index row;
      double exact;    // step at which the bound is reached
      double relaxed;  // same with Harris tolerance
      bool at_upper;
    };
    std::vector<Candidate> cands;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const double a = alpha[i];
      if (std::abs(a) <= opt_.pivot_tol) continue;
      const int j = basic_[i];
      const double rate = -dir * a;  // change of x_j per unit step
      const double xj = x_[j];
      if (rate < 0) {
        // Decreasing: blocks at the upper bound if currently above it,
        // otherwise at the lower bound; nothing if already below.
        if (phase1 && above(j)) {
          cands.push_back({i, (xj - up_[j]) / -rate, (xj - up_[j] + tol_at(up_[j])) / -rate, true});
        } else if (!below(j) && std::isfinite(lo_[j])) {
          cands.push_back({i, std::max(0.0, xj - lo_[j]) / -rate, (xj - lo_[j] + tol_at(lo_[j])) / -rate, false});
        }
      } else {
        if (phase1 && below(j)) {
          cands.push_back({i, (lo_[j] - xj) / rate, (lo_[j] - xj + tol_at(lo_[j])) / rate, false});
        } else if (!above(j) && std::isfinite(up_[j])) {
          cands.push_back({i, std::max(0.0, up_[j] - xj) / rate, (up_[j] - xj + tol_at(up_[j])) / rate, true});
        }
      }
    }

    const double flip = up_[q] - lo_[q];  // inf when either side is open
    leave_row = -1;
    theta = kInf;

    if (bland_) {
      // Textbook ratio test; ties go to the smallest variable index.
      int best_var = std::numeric_limits<int>::max();
      for (const auto& c : cands) {
        const int j = basic_[c.row];
        if (c.exact < theta - 1e-12 || (c.exact <= theta + 1e-12 && j < best_var)) {
          theta = std::min(theta, c.exact);
          leave_row = c.row;
          leave_at_upper = c.at_upper;
          best_var = j;
        }
      }
    } else {
      double relaxed_min = kInf;
      for (const auto& c : cands) relaxed_min = std::min(relaxed_min, c.relaxed);
      double best_pivot = 0.0;
      for (const auto& c : cands) {
        if (c.exact > relaxed_min) continue;
        const double p = std::abs(alpha[c.row]);
        if (p > best_pivot) {
          best_pivot = p;
          leave_row = c.row;
          leave_at_upper = c.at_upper;
          theta = c.exact;
        }
      }
    }

    if (std::isfinite(flip) && flip <= theta) {
      theta = flip;
      leave_row = -1;
    }
  }

  const StandardForm& sf_;
  LpOptions opt_;
  Eigen::Index m_;
  Eigen::Index n_;
  Eigen::Index total_;
  Eigen::VectorXd lo_, up_, cost_, x_;
  Eigen::VectorXd phase_cost_;
  std::vector<VarStatus> status_;
  std::vector<int> basic_;
  std::vector<int> pos_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  std::vector<Eta> etas_;
  std::size_t iterations_ = 0;
  bool bland_ = false;
};

}  // namespace detail

// Solves the LP relaxation of `sf` under the given column bounds, optionally
// warm-started from a previous basis of the same standard form.
inline LpResult solve_lp(const StandardForm& sf, std::span<const double> lower, std::span<const double> upper,
                         const LpOptions& options = {}, const Basis* warm = nullptr) {
  if (lower.size() != static_cast<std::size_t>(sf.cols()) || upper.size() != static_cast<std::size_t>(sf.cols()))
    throw DomainError("bound vectors do not match the number of columns");
  detail::RevisedSimplex simplex(sf, lower, upper, options);
  return simplex.run(warm);
}

inline LpResult solve_lp(const StandardForm& sf, const LpOptions& options = {}) {
  return solve_lp(sf, sf.lower, sf.upper, options);
}

// Lower bound on the LP optimum implied by row multipliers `y` (clamped to
// the dual-feasible sign): b'y + sum_j min over [l_j, u_j] of d_j x_j.
inline double dual_bound(const StandardForm& sf, std::span<const double> lower, std::span<const double> upper,
                         const Eigen::VectorXd& duals) {
  const Eigen::VectorXd y = duals.cwiseMin(0.0);
  const Eigen::VectorXd d = sf.c - sf.A.transpose() * y;
  double bound = sf.b.dot(y) + sf.objective_offset;
  for (Eigen::Index j = 0; j < d.size(); ++j) {
    const double l = lower[static_cast<std::size_t>(j)];
    const double u = upper[static_cast<std::size_t>(j)];
    if (d[j] > 0) bound += std::isfinite(l) ? d[j] * l : -kInf;
    else if (d[j] < 0) bound += std::isfinite(u) ? d[j] * u : -kInf;
  }
  return bound;
}

}  // namespace spacelog

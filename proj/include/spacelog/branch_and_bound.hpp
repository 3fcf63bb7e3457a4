#pragma once

// Best-bound branch-and-bound over the integer columns of a MilpModel, with
// simplex LP relaxations warm-started from the parent basis.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <ostream>
#include <queue>
#include <vector>

#include "spacelog/milp_model.hpp"
#include "spacelog/simplex.hpp"

namespace spacelog {

enum class BranchingRule { MostFractional, PseudoCost };

struct NodeLogEntry {
  std::size_t node_id = 0;
  std::size_t depth = 0;
  double lp_objective = 0.0;
  double best_bound = 0.0;
  double incumbent = 0.0;
  double gap = 0.0;
};

struct BnbConfig {
  double integrality_tol = kIntegralityTol;
  double relative_gap = 1e-6;
  double absolute_gap = 1e-9;
  std::size_t node_limit = 1'000'000;
  double time_limit_s = 600.0;
  BranchingRule branching = BranchingRule::MostFractional;
  // Re-solve the LP with integers fixed at their rounded values whenever an
  // integral relaxation is found, so incumbents are exactly integral.
  bool polish_incumbents = true;
  LpOptions lp;
  std::function<void(const NodeLogEntry&)> node_log;
};

// Writes one CSV line per node: node_id,depth,lp_obj,best_bound,incumbent,gap.
inline std::function<void(const NodeLogEntry&)> csv_node_log(std::ostream& out) {
  out << "node_id,depth,lp_obj,best_bound,incumbent,gap\n";
  return [&out](const NodeLogEntry& e) {
    out << e.node_id << ',' << e.depth << ',' << e.lp_objective << ',' << e.best_bound << ',' << e.incumbent << ','
        << e.gap << '\n';
  };
}

namespace detail {

struct BnbNode {
  std::size_t id = 0;
  std::size_t depth = 0;
  double bound = -kInf;
  std::vector<double> lower;
  std::vector<double> upper;
  std::shared_ptr<const Basis> warm;
  // Branching record for pseudo-cost updates.
  int branch_var = -1;
  int branch_dir = 0;  // -1 down, +1 up
  double branch_frac = 0.0;
};

struct NodeOrder {
  // Smallest bound first; among equal bounds prefer the deeper, newer node.
  bool operator()(const std::shared_ptr<BnbNode>& a, const std::shared_ptr<BnbNode>& b) const {
    if (a->bound != b->bound) return a->bound > b->bound;
    if (a->depth != b->depth) return a->depth < b->depth;
    return a->id < b->id;
  }
};

class PseudoCosts {
 public:
  explicit PseudoCosts(std::size_t n) : sum_(2 * n, 0.0), count_(2 * n, 0) {}

  void record(int var, int dir, double gain_per_unit) {
    const auto k = slot(var, dir);
    sum_[k] += gain_per_unit;
    ++count_[k];
  }

  double estimate(int var, int dir) const {
    const auto k = slot(var, dir);
    if (count_[k] > 0) return sum_[k] / count_[k];
    double s = 0.0;
    std::size_t c = 0;
    for (std::size_t i = (dir < 0 ? 0 : 1); i < sum_.size(); i += 2)
      if (count_[i]) {
        s += sum_[i] / count_[i];
        ++c;
      }
    return c ? s / c : 1.0;
  }

 private:
  static std::size_t slot(int var, int dir) { return 2 * static_cast<std::size_t>(var) + (dir < 0 ? 0 : 1); }
  std::vector<double> sum_;
  std::vector<std::size_t> count_;
};

}  // namespace detail

inline Solution solve_milp(const MilpModel& model, const BnbConfig& cfg = {}) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  const StandardForm sf = to_standard_form(model);
  const auto n = static_cast<std::size_t>(sf.cols());

  Solution sol;
  sol.status = SolveStatus::Infeasible;
  double incumbent = kInf;
  std::vector<double> best_x;
  detail::PseudoCosts pseudo(n);

  auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - start).count(); };
  auto dominated = [&](double bound) {
    return std::isfinite(incumbent) &&
           bound >= incumbent - std::max(cfg.absolute_gap, cfg.relative_gap * std::abs(incumbent));
  };
  auto gap_of = [&](double inc, double bound) {
    if (!std::isfinite(inc)) return kInf;
    if (!std::isfinite(bound)) return kInf;
    return (inc - bound) / std::max(std::abs(inc), 1e-10);
  };

  std::priority_queue<std::shared_ptr<detail::BnbNode>, std::vector<std::shared_ptr<detail::BnbNode>>,
                      detail::NodeOrder>
      open;
  auto root = std::make_shared<detail::BnbNode>();
  root->lower = sf.lower;
  root->upper = sf.upper;
  open.push(root);
  std::size_t next_id = 1;
  bool hit_limit = false;
  double best_bound = -kInf;

  auto try_incumbent = [&](const LpResult& lp, const detail::BnbNode& node) {
    std::vector<double> x(lp.x.data(), lp.x.data() + lp.x.size());
    double obj = lp.objective;
    if (cfg.polish_incumbents) {
      std::vector<double> lo = node.lower, up = node.upper;
      for (std::size_t j = 0; j < n; ++j)
        if (sf.integer[j]) lo[j] = up[j] = std::round(x[j]);
      const LpResult fixed = solve_lp(sf, lo, up, cfg.lp, &lp.basis);
      sol.stats.simplex_iterations += fixed.iterations;
      if (fixed.status == LpStatus::Optimal) {
        x.assign(fixed.x.data(), fixed.x.data() + fixed.x.size());
        obj = fixed.objective;
      }
    }
    if (obj < incumbent) {
      incumbent = obj;
      best_x = std::move(x);
    }
  };

  while (!open.empty()) {
    auto node = open.top();
    if (dominated(node->bound)) break;  // everything left is dominated
    best_bound = std::max(best_bound, std::min(node->bound, incumbent));
    if (sol.stats.nodes >= cfg.node_limit || elapsed() > cfg.time_limit_s) {
      hit_limit = true;
      break;
    }
    open.pop();

    const LpResult lp = solve_lp(sf, node->lower, node->upper, cfg.lp, node->warm.get());
    ++sol.stats.nodes;
    sol.stats.simplex_iterations += lp.iterations;

    if (lp.status == LpStatus::IterationLimit) throw NumericalError("LP relaxation hit the iteration limit");
    if (lp.status == LpStatus::Unbounded) {
      if (node->depth == 0) {
        sol.status = SolveStatus::Unbounded;
        sol.stats.seconds = elapsed();
        return sol;
      }
      throw NumericalError("unbounded LP below a bounded root relaxation");
    }

    double lp_obj = kInf;
    if (lp.status == LpStatus::Optimal) {
      lp_obj = std::max(lp.objective, node->bound);
      if (node->branch_var >= 0 && std::isfinite(node->bound) && node->branch_frac > 0)
        pseudo.record(node->branch_var, node->branch_dir, (lp.objective - node->bound) / node->branch_frac);
    }

    if (lp.status == LpStatus::Optimal && !dominated(lp_obj)) {
      // Branching candidate.
      int var = -1;
      double best_score = -1.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (!sf.integer[j]) continue;
        const double v = lp.x[static_cast<Eigen::Index>(j)];
        const double frac = v - std::floor(v);
        const double dist = std::min(frac, 1.0 - frac);
        if (dist <= cfg.integrality_tol) continue;
        double score = dist;
        if (cfg.branching == BranchingRule::PseudoCost) {
          const double down = pseudo.estimate(static_cast<int>(j), -1) * frac;
          const double up = pseudo.estimate(static_cast<int>(j), +1) * (1.0 - frac);
          score = std::max(down, 1e-6) * std::max(up, 1e-6);
        }
        if (score > best_score + 1e-12) {
          best_score = score;
          var = static_cast<int>(j);
        }
      }

      if (var < 0) {
        try_incumbent(lp, *node);
      } else {
        const double v = lp.x[var];
        auto basis = std::make_shared<const Basis>(lp.basis);
        auto down = std::make_shared<detail::BnbNode>();
        down->id = next_id++;
        down->depth = node->depth + 1;
        down->bound = lp_obj;
        down->lower = node->lower;
        down->upper = node->upper;
        down->upper[static_cast<std::size_t>(var)] = std::floor(v);
        down->warm = basis;
        down->branch_var = var;
        down->branch_dir = -1;
        down->branch_frac = v - std::floor(v);

        auto up = std::make_shared<detail::BnbNode>(*down);
        up->id = next_id++;
        up->upper[static_cast<std::size_t>(var)] = node->upper[static_cast<std::size_t>(var)];
        up->lower[static_cast<std::size_t>(var)] = std::ceil(v);
        up->branch_dir = +1;
        up->branch_frac = std::ceil(v) - v;
        open.push(std::move(down));
        open.push(std::move(up));
      }
    }

    if (cfg.node_log) {
      const double bound = open.empty() ? incumbent : std::min(open.top()->bound, incumbent);
      cfg.node_log(NodeLogEntry{node->id, node->depth, lp.status == LpStatus::Optimal ? lp.objective : kInf,
                                std::max(best_bound, bound), incumbent, gap_of(incumbent, std::max(best_bound, bound))});
    }
  }

  if (!open.empty()) best_bound = std::max(best_bound, std::min(open.top()->bound, incumbent));
  else if (std::isfinite(incumbent)) best_bound = incumbent;

  sol.stats.seconds = elapsed();
  sol.stats.best_bound = best_bound;
  if (std::isfinite(incumbent)) {
    sol.values = std::move(best_x);
    sol.objective = model.objective_value(sol.values);
    sol.stats.gap = std::max(0.0, gap_of(incumbent, best_bound));
    sol.status = hit_limit ? SolveStatus::Limit : SolveStatus::Optimal;
  } else {
    sol.status = hit_limit ? SolveStatus::Limit : SolveStatus::Infeasible;
  }
  return sol;
}

}  // namespace spacelog

#pragma once

// Intermediate representation for mixed-integer linear programs. Every
// formulation and embedding pass appends variables and rows to one MilpModel;
// solvers consume its StandardForm.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spacelog/common.hpp"
#include "spacelog/error.hpp"

namespace spacelog {

inline constexpr double kFeasibilityTol = 1e-6;
inline constexpr double kIntegralityTol = 1e-6;

struct VarId {
  std::uint32_t index = 0;
  auto operator<=>(const VarId&) const = default;
};

struct ConstraintId {
  std::uint32_t index = 0;
  auto operator<=>(const ConstraintId&) const = default;
};

enum class VarDomain { Continuous, Integer, Binary };
enum class Sense { LessEqual, Equal, GreaterEqual };

inline std::string_view to_string(Sense s) {
  switch (s) {
    case Sense::LessEqual: return "<=";
    case Sense::Equal: return "=";
    case Sense::GreaterEqual: return ">=";
  }
  return "?";
}

struct Variable {
  std::string name;
  VarDomain domain = VarDomain::Continuous;
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
  bool is_integral() const { return domain != VarDomain::Continuous; }
};

struct Term {
  VarId var;
  double coef = 0.0;
};

struct LinearConstraint {
  std::vector<Term> terms;
  Sense sense = Sense::LessEqual;
  double rhs = 0.0;
  std::string tag;

  double activity(std::span<const double> x) const {
    double s = 0.0;
    for (const auto& t : terms) s += t.coef * x[t.var.index];
    return s;
  }
};

class MilpModel {
 public:
  explicit MilpModel(std::string name = "model") : name_(std::move(name)) {}

  const std::string& name() const { return name_; }
  std::size_t num_variables() const { return vars_.size(); }
  std::size_t num_constraints() const { return rows_.size(); }
  const std::vector<Variable>& variables() const { return vars_; }
  const std::vector<LinearConstraint>& constraints() const { return rows_; }
  const Variable& variable(VarId v) const { return vars_.at(v.index); }
  const LinearConstraint& constraint(ConstraintId c) const { return rows_.at(c.index); }
  const std::vector<Term>& objective() const { return objective_; }
  double objective_offset() const { return objective_offset_; }
  bool frozen() const { return frozen_; }

  VarId add_variable(std::string name, VarDomain domain, double lower, double upper) {
    check_mutable();
    if (domain == VarDomain::Binary) {
      lower = std::max(lower, 0.0);
      upper = std::min(upper, 1.0);
    }
    if (std::isnan(lower) || std::isnan(upper) || lower > upper)
      throw DomainError("variable '" + name + "': lower bound " + std::to_string(lower) +
                        " exceeds upper bound " + std::to_string(upper));
    vars_.push_back(Variable{std::move(name), domain, lower, upper});
    return VarId{static_cast<std::uint32_t>(vars_.size() - 1)};
  }

  VarId add_continuous(std::string name, double lower = 0.0,
                       double upper = std::numeric_limits<double>::infinity()) {
    return add_variable(std::move(name), VarDomain::Continuous, lower, upper);
  }
  VarId add_binary(std::string name) { return add_variable(std::move(name), VarDomain::Binary, 0.0, 1.0); }

  // Duplicate variables within `terms` are merged; zero coefficients dropped.
  ConstraintId add_constraint(std::vector<Term> terms, Sense sense, double rhs, std::string tag) {
    check_mutable();
    LinearConstraint row{merge_terms(std::move(terms)), sense, rhs, std::move(tag)};
    rows_.push_back(std::move(row));
    return ConstraintId{static_cast<std::uint32_t>(rows_.size() - 1)};
  }

  void set_bounds(VarId v, double lower, double upper) {
    check_mutable();
    check_var(v);
    if (lower > upper) throw DomainError("variable '" + vars_[v.index].name + "': lower bound exceeds upper bound");
    vars_[v.index].lower = lower;
    vars_[v.index].upper = upper;
  }

  void add_objective_term(VarId v, double coef) {
    check_mutable();
    check_var(v);
    if (coef == 0.0) return;
    objective_.push_back(Term{v, coef});
    objective_ = merge_terms(std::move(objective_));
  }
  void set_objective_offset(double c) { objective_offset_ = c; }

  void freeze() { frozen_ = true; }

  double objective_value(std::span<const double> x) const {
    double s = objective_offset_;
    for (const auto& t : objective_) s += t.coef * x[t.var.index];
    return s;
  }

 private:
  void check_mutable() const {
    if (frozen_) throw Error("model '" + name_ + "' is frozen");
  }
  void check_var(VarId v) const {
    if (v.index >= vars_.size()) throw ReferenceError(std::to_string(v.index), "unknown variable id " + std::to_string(v.index));
  }

  std::vector<Term> merge_terms(std::vector<Term> terms) const {
    for (const auto& t : terms) check_var(t.var);
    std::stable_sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.var < b.var; });
    std::vector<Term> out;
    for (const auto& t : terms) {
      if (!out.empty() && out.back().var == t.var) out.back().coef += t.coef;
      else out.push_back(t);
    }
    std::erase_if(out, [](const Term& t) { return t.coef == 0.0; });
    return out;
  }

  std::string name_;
  std::vector<Variable> vars_;
  std::vector<LinearConstraint> rows_;
  std::vector<Term> objective_;
  double objective_offset_ = 0.0;
  bool frozen_ = false;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, Limit };

inline std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::Limit: return "limit";
  }
  return "?";
}

struct SolveStats {
  std::size_t nodes = 0;
  std::size_t simplex_iterations = 0;
  double seconds = 0.0;
  double best_bound = -std::numeric_limits<double>::infinity();
  double gap = std::numeric_limits<double>::infinity();
};

struct Solution {
  SolveStatus status = SolveStatus::Infeasible;
  std::vector<double> values;
  double objective = std::numeric_limits<double>::quiet_NaN();
  SolveStats stats;

  bool has_values() const { return !values.empty(); }
  double operator[](VarId v) const { return values.at(v.index); }
};

// ---------------------------------------------------------------------------
// Evaluation

struct Violation {
  std::string tag;  // constraint tag, or "bound:<var>" / "integrality:<var>"
  std::size_t index = 0;
  double amount = 0.0;  // signed; positive means the point is on the wrong side
};

// Lists every constraint, bound, and integrality requirement that `x` misses
// by more than `tol`. An empty result means `x` is feasible.
inline std::vector<Violation> evaluate(const MilpModel& model, std::span<const double> x,
                                       double tol = kFeasibilityTol) {
  if (x.size() != model.num_variables())
    throw DomainError("assignment has " + std::to_string(x.size()) + " values, model has " +
                      std::to_string(model.num_variables()) + " variables");
  std::vector<Violation> out;
  const auto& rows = model.constraints();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double lhs = rows[i].activity(x);
    double v = 0.0;
    switch (rows[i].sense) {
      case Sense::LessEqual: v = lhs - rows[i].rhs; break;
      case Sense::GreaterEqual: v = rows[i].rhs - lhs; break;
      case Sense::Equal: v = lhs - rows[i].rhs; break;
    }
    const bool bad = rows[i].sense == Sense::Equal ? std::abs(v) > tol : v > tol;
    if (bad || std::isnan(v)) out.push_back(Violation{rows[i].tag, i, v});
  }
  const auto& vars = model.variables();
  for (std::size_t j = 0; j < vars.size(); ++j) {
    if (x[j] < vars[j].lower - tol) out.push_back(Violation{"bound:" + vars[j].name, j, vars[j].lower - x[j]});
    if (x[j] > vars[j].upper + tol) out.push_back(Violation{"bound:" + vars[j].name, j, x[j] - vars[j].upper});
    if (vars[j].is_integral()) {
      const double frac = std::abs(x[j] - std::round(x[j]));
      if (frac > kIntegralityTol) out.push_back(Violation{"integrality:" + vars[j].name, j, frac});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Standard form: min c'x + offset  s.t.  A x <= b,  lower <= x <= upper.

struct RowOrigin {
  std::size_t constraint = 0;
  double sign = 1.0;  // standard row = sign * (original row)
};

struct StandardForm {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<bool> integer;
  double objective_offset = 0.0;
  std::vector<RowOrigin> origin;

  Eigen::Index rows() const { return A.rows(); }
  Eigen::Index cols() const { return A.cols(); }

  bool feasible(std::span<const double> x, double tol = kFeasibilityTol) const {
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::VectorXd r = A * xv - b;
    for (Eigen::Index i = 0; i < r.size(); ++i)
      if (!(r[i] <= tol)) return false;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (x[j] < lower[j] - tol || x[j] > upper[j] + tol) return false;
      if (integer[j] && std::abs(x[j] - std::round(x[j])) > kIntegralityTol) return false;
    }
    return true;
  }
};

inline StandardForm to_standard_form(const MilpModel& model) {
  const auto& rows = model.constraints();
  std::size_t m = 0;
  for (const auto& r : rows) m += r.sense == Sense::Equal ? 2 : 1;
  const auto n = model.num_variables();

  StandardForm sf;
  sf.A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  sf.b.resize(static_cast<Eigen::Index>(m));
  sf.c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  sf.objective_offset = model.objective_offset();
  for (const auto& t : model.objective()) sf.c[t.var.index] += t.coef;

  Eigen::Index r = 0;
  auto emit = [&](std::size_t src, double sign) {
    for (const auto& t : rows[src].terms) sf.A(r, t.var.index) = sign * t.coef;
    sf.b[r] = sign * rows[src].rhs;
    sf.origin.push_back(RowOrigin{src, sign});
    ++r;
  };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    switch (rows[i].sense) {
      case Sense::LessEqual: emit(i, 1.0); break;
      case Sense::GreaterEqual: emit(i, -1.0); break;
      case Sense::Equal:
        emit(i, 1.0);
        emit(i, -1.0);
        break;
    }
  }
  for (const auto& v : model.variables()) {
    sf.lower.push_back(v.lower);
    sf.upper.push_back(v.upper);
    sf.integer.push_back(v.is_integral());
  }
  return sf;
}

// Human-readable dump in the spirit of the CPLEX LP format. Meant for
// debugging, not for round-tripping.
inline void write_lp_text(const MilpModel& model, std::ostream& out) {
  const auto& vars = model.variables();
  auto write_terms = [&](const std::vector<Term>& terms) {
    if (terms.empty()) out << " 0";
    for (const auto& t : terms) out << (t.coef < 0 ? " - " : " + ") << std::abs(t.coef) << ' ' << vars[t.var.index].name;
  };
  out << "\\ " << model.name() << "\nMinimize\n obj:";
  write_terms(model.objective());
  if (model.objective_offset() != 0.0) out << " + " << model.objective_offset();
  out << "\nSubject To\n";
  for (const auto& r : model.constraints()) {
    out << ' ' << r.tag << ':';
    write_terms(r.terms);
    out << ' ' << to_string(r.sense) << ' ' << r.rhs << '\n';
  }
  out << "Bounds\n";
  for (const auto& v : vars) out << ' ' << v.lower << " <= " << v.name << " <= " << v.upper << '\n';
  out << "Generals\n";
  for (const auto& v : vars)
    if (v.domain == VarDomain::Integer) out << ' ' << v.name << '\n';
  out << "Binaries\n";
  for (const auto& v : vars)
    if (v.domain == VarDomain::Binary) out << ' ' << v.name << '\n';
  out << "End\n";
}

}  // namespace spacelog

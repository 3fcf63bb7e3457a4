#pragma once

// Nonlinear spacecraft sizing for a single-stage LOX/kerosene vehicle and the
// exact fixed-point solution of a single-vehicle delivery chain.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "spacelog/error.hpp"
#include "spacelog/scenario.hpp"

namespace spacelog {

struct SizingParams {
  double alpha = 0.045;          // structural fraction of the tank term
  double isp_s = 330.0;
  double g0 = 9.8;               // m/s^2
  double burn_time_s = 120.0;
  double m_ub_kg = 500000.0;     // propellant tank capacity upper bound
  double payload_coeff = 2.3931;
};

inline SizingParams sizing_params(const VehicleSpec& v) {
  SizingParams p;
  p.alpha = v.alpha;
  p.isp_s = v.isp_s;
  p.burn_time_s = v.burn_time_s;
  p.m_ub_kg = v.m_ub_kg;
  return p;
}

// Structure mass as a function of payload capacity and propellant capacity.
inline double evaluate_sizing(const SizingParams& p, double m_p, double m_f) {
  if (m_p < 0 || m_f < 0) throw DomainError("evaluate_sizing: masses must be non-negative");
  const double tank = p.alpha * m_f * (1.0 - 0.2 * m_f / p.m_ub_kg);
  const double engine = 0.4189 * std::pow(m_f * p.isp_s * p.g0 / p.burn_time_s, 0.7764) / p.g0;
  return p.payload_coeff * m_p + tank + engine;
}

// The propellant-dependent part of the sizing relation: what the learned
// surrogate replaces, with the linear payload term kept explicit.
inline double surrogate_target(const SizingParams& p, double m_f) { return evaluate_sizing(p, 0.0, m_f); }

struct DataPoint {
  double input = 0.0;
  double target = 0.0;
};

// Inclusive grid lo, lo+step, ..., hi.
inline std::vector<DataPoint> generate_dataset(const SizingParams& p, double lo = 0.0, double hi = 50000.0,
                                               double step = 1000.0) {
  if (!(lo <= hi) || !(step > 0)) throw DomainError("generate_dataset: need lo <= hi and step > 0");
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<DataPoint> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double x = lo + static_cast<double>(i) * step;
    out.push_back(DataPoint{x, surrogate_target(p, x)});
  }
  return out;
}

// Fraction of departing wet mass burned for a given delta-v.
inline double propellant_fraction(double delta_v_mps, double isp_s, double g0) {
  if (delta_v_mps < 0) throw DomainError("propellant_fraction: negative delta-v");
  if (!(isp_s > 0)) throw DomainError("propellant_fraction: isp must be positive");
  return -std::expm1(-delta_v_mps / (isp_s * g0));
}

struct OracleResult {
  double imleo = 0.0;
  double m_d = 0.0;
  double m_p = 0.0;
  double m_f = 0.0;
  double residual = 0.0;
  std::size_t iterations = 0;
};

// Residuals of the two coupled equations at (m_d, m_p, m_f): the sizing
// relation and the combined rocket equation over `total_dv`.
inline std::pair<double, double> oracle_residuals(const SizingParams& p, double total_dv, double m_d, double m_p,
                                                  double m_f) {
  const double phi = propellant_fraction(total_dv, p.isp_s, p.g0);
  return {m_d - evaluate_sizing(p, m_p, m_f), m_f - (m_d + m_p + m_f) * phi};
}

// Solves m_d = sizing(m_p, m_f), m_f = (m_d + m_p + m_f)(1 - exp(-sum dv / (Isp g0)))
// with m_p = payload. Damped fixed-point iteration on m_f starting from zero
// (so the smallest non-negative fixed point is found), with a bisection
// fallback when the iteration stops contracting.
inline OracleResult solve_exact_oracle(const SizingParams& p, double payload, std::span<const double> delta_vs,
                                       double tol = 1e-10, std::size_t max_iterations = 10000) {
  if (payload < 0) throw DomainError("solve_exact_oracle: payload must be non-negative");
  if (delta_vs.empty()) throw DomainError("solve_exact_oracle: need at least one delta-v");
  const double total_dv = std::accumulate(delta_vs.begin(), delta_vs.end(), 0.0);
  const double phi = propellant_fraction(total_dv, p.isp_s, p.g0);
  const double ratio = phi / (1.0 - phi);
  // Fixed point of g: m_f = ratio * (m_p + sizing(m_p, m_f)).
  auto g = [&](double m_f) { return ratio * (payload + evaluate_sizing(p, payload, m_f)); };

  OracleResult r;
  r.m_p = payload;
  // The sizing relation is only meaningful up to the tank capacity bound.
  const double cap = p.m_ub_kg;
  double m_f = 0.0;
  double prev_gap = kInf;
  bool converged = false;
  for (r.iterations = 1; r.iterations <= max_iterations; ++r.iterations) {
    const double gap = g(m_f) - m_f;
    if (std::abs(gap) <= tol) {
      converged = true;
      break;
    }
    if (r.iterations > 50 && std::abs(gap) > prev_gap) break;  // not contracting
    prev_gap = std::abs(gap);
    m_f += 0.5 * gap;
    if (m_f > cap) break;
  }

  if (!converged) {
    // h = g - id is positive at 0 for a positive payload; bracket a root below the cap.
    auto h = [&](double x) { return g(x) - x; };
    double lo = 0.0, hi = cap;
    if (h(hi) > 0) throw NumericalError("solve_exact_oracle: no fixed point within the tank capacity");
    for (std::size_t k = 0; k < 200 && hi - lo > 1e-12 * hi; ++k, ++r.iterations) {
      const double mid = 0.5 * (lo + hi);
      (h(mid) > 0 ? lo : hi) = mid;
    }
    m_f = 0.5 * (lo + hi);
    if (r.iterations > max_iterations) throw NumericalError("solve_exact_oracle: did not converge");
  }

  r.m_f = m_f;
  r.m_d = evaluate_sizing(p, payload, m_f);
  r.imleo = r.m_d + r.m_p + r.m_f;
  const auto [res_sizing, res_rocket] = oracle_residuals(p, total_dv, r.m_d, r.m_p, r.m_f);
  r.residual = std::max(std::abs(res_sizing), std::abs(res_rocket));
  return r;
}

}  // namespace spacelog

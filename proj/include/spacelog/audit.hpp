#pragma once

// Post-solve checks on an assembled campaign: linearized products match the
// bilinear terms they stand for, no cargo moves without a vehicle, and every
// node conserves mass.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "spacelog/formulation.hpp"

namespace spacelog {

struct BigMAudit {
  double max_product_error = 0.0;   // max |z - m y| over all arcs and z kinds
  double max_flow_without_vehicle = 0.0;  // max x+ on flown-arc candidates with y = 0
  std::string worst;                // variable name of the worst product error
};

inline BigMAudit audit_big_m(const AssembledModel& am, const Solution& sol) {
  BigMAudit r;
  auto check = [&](VarId z, VarId m, VarId y) {
    const double e = std::abs(sol[z] - sol[m] * sol[y]);
    if (e > r.max_product_error) {
      r.max_product_error = e;
      r.worst = am.model.variable(z).name;
    }
  };
  for (const auto& a : am.arcs) {
    const auto& d = am.design[a.vehicle];
    check(a.z_struct, d.m_d, a.y);
    if (a.z_payload) check(*a.z_payload, d.m_p, a.y);
    if (a.z_propellant) check(*a.z_propellant, d.m_f, a.y);
    if (a.arc.kind != ArcKind::Holdover && sol[a.y] < 0.5)
      for (const auto x : a.x_plus) r.max_flow_without_vehicle = std::max(r.max_flow_without_vehicle, sol[x]);
  }
  return r;
}

struct BalanceEntry {
  std::string node;
  int time = 0;
  std::string commodity;
  double net_outflow = 0.0;  // outflow - inflow
  double demand = 0.0;       // right-hand side (supply > 0, demand < 0); +inf when unbounded
};

struct MassBalanceAudit {
  std::vector<BalanceEntry> entries;  // every (node, time, commodity)
  double max_violation = 0.0;         // max (net_outflow - demand)+
  // Commodity entries with slack where no supply was declared.
  std::vector<BalanceEntry> unexpected_slack;

  double delivered(const std::string& node, int time, const std::string& commodity) const {
    for (const auto& e : entries)
      if (e.node == node && e.time == time && e.commodity == commodity) return -e.net_outflow;
    return 0.0;
  }
};

// Recomputes every balance from the flow values, independent of the rows.
inline MassBalanceAudit audit_mass_balance(const AssembledModel& am, const Solution& sol, double tol = 1e-6) {
  const auto& s = am.scenario;
  const int H = am.network.horizon;
  const std::size_t C = s.commodities.size();
  std::vector<double> net(s.nodes.size() * static_cast<std::size_t>(H) * C, 0.0);
  auto at = [&](std::size_t n, int t, std::size_t c) -> double& {
    return net[(n * static_cast<std::size_t>(H) + static_cast<std::size_t>(t)) * C + c];
  };
  for (const auto& a : am.arcs)
    for (std::size_t c = 0; c < C; ++c) {
      at(a.arc.from, a.arc.depart, c) += sol[a.x_plus[c]];
      at(a.arc.to, a.arc.arrive, c) -= sol[a.x_minus[c]];
    }

  MassBalanceAudit r;
  for (std::size_t n = 0; n < s.nodes.size(); ++n)
    for (int t = 0; t < H; ++t)
      for (std::size_t c = 0; c < C; ++c) {
        BalanceEntry e{s.nodes[n].id, t, s.commodities[c].id, at(n, t, c), 0.0};
        bool supplied = false;
        for (const auto& d : s.demands)
          if (d.commodity == e.commodity && d.node == e.node && d.time == t) {
            e.demand += d.amount;
            supplied = supplied || d.amount > 0;
          }
        if (std::isfinite(e.demand)) {
          r.max_violation = std::max(r.max_violation, e.net_outflow - e.demand);
          if (!supplied && e.demand - e.net_outflow > tol) r.unexpected_slack.push_back(e);
        }
        r.entries.push_back(std::move(e));
      }
  return r;
}

// Propellant burned over transport arcs.
inline double propellant_burned(const AssembledModel& am, const Solution& sol) {
  double b = 0.0;
  for (const auto& a : am.arcs) b += sol[a.x_plus[am.propellant]] - sol[a.x_minus[am.propellant]];
  return b;
}

}  // namespace spacelog

#pragma once

// Multi-commodity network-flow MILP on a time-expanded network.
//
// Per vehicle v and expanded arc a the model carries outflow x+ and inflow x-
// per commodity, a binary flight variable y, and the linearized products
// z_struct = m_d y, z_payload = m_p y, z_propellant = m_f y. Rows:
//   mass balance   per (node, time) and commodity, plus structure and vehicle rows
//   transformation x- = Q x+ (rocket equation on transport arcs, identity elsewhere)
//   concurrency    payload-type flow <= z_payload, propellant flow <= z_propellant
//   big-M          z <= M y, z <= m, z >= m - M (1 - y)
//   sizing         one closure per vehicle linking m_d to m_p and m_f
// Departures outside an arc's window keep their variables, fixed to zero.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "spacelog/embedding.hpp"
#include "spacelog/error.hpp"
#include "spacelog/linear_regression.hpp"
#include "spacelog/milp_model.hpp"
#include "spacelog/relu_network.hpp"
#include "spacelog/scenario.hpp"
#include "spacelog/spacecraft.hpp"

namespace spacelog {

inline double compute_propellant_fraction(double delta_v_mps, double isp_s, double g0 = 9.8) {
  return propellant_fraction(delta_v_mps, isp_s, g0);
}

// m_d = eps (m_d + m_p)
struct LinearEpsilonSizing {
  double epsilon = 0.08;
};

// m_d = c m_p + NN(m_f)
struct NeuralSizing {
  ReluNetwork net;
};

// m_d = c m_p + beta m_f + beta0
struct RegressionSizing {
  LinearSurrogate fit;
};

using SizingClosure = std::variant<LinearEpsilonSizing, NeuralSizing, RegressionSizing>;

struct ArcVariables {
  std::size_t vehicle = 0;
  ExpandedArc arc;
  bool closed = false;  // outside the departure window: every variable fixed to 0
  std::string label;
  std::vector<VarId> x_plus;   // per commodity
  std::vector<VarId> x_minus;  // per commodity
  VarId y;
  VarId z_struct;
  std::optional<VarId> z_payload;     // transport and launch arcs only
  std::optional<VarId> z_propellant;  // transport and launch arcs only
  double phi = 0.0;
};

struct DesignVariables {
  VarId m_p;
  VarId m_f;
  VarId m_d;
  std::optional<VarId> surrogate_out;
  EmbeddingInfo embedding;
};

struct AssembledModel {
  MilpModel model;
  Scenario scenario;
  TimeExpandedNetwork network;
  std::vector<ArcVariables> arcs;
  std::vector<DesignVariables> design;
  std::size_t propellant = 0;  // commodity index
};

namespace detail {

inline std::string structure_row_name(const VehicleSpec& v) { return "structure." + v.id; }
inline std::string vehicle_row_name(const VehicleSpec& v) { return "vehicle." + v.id; }

// Sum of finite demand entries per key; nullopt when any entry is unbounded.
using DemandKey = std::tuple<std::string, std::size_t, int>;  // (commodity or vehicle, node, time)

inline std::map<DemandKey, std::optional<double>> collect_demands(const Scenario& s) {
  std::map<DemandKey, std::optional<double>> out;
  for (const auto& d : s.demands) {
    const DemandKey key{d.commodity, *s.node_index(d.node), d.time};
    auto it = out.find(key);
    if (it == out.end()) it = out.emplace(key, 0.0).first;
    if (!it->second) continue;
    if (d.unbounded()) it->second = std::nullopt;
    else *it->second += d.amount;
  }
  return out;
}

inline Range intersect(Range a, Range b) { return Range{std::max(a.lo, b.lo), std::min(a.hi, b.hi)}; }

}  // namespace detail

// Creates the flow variables for every (vehicle, expanded arc), including the
// closed window departures with zero bounds.
inline std::vector<ArcVariables> create_flow_variables(MilpModel& model, const Scenario& s,
                                                        const TimeExpandedNetwork& net) {
  std::vector<ArcVariables> out;
  auto add = [&](std::size_t v, const ExpandedArc& a, bool closed) {
    ArcVariables av;
    av.vehicle = v;
    av.arc = a;
    av.arc.vehicle = v;
    av.closed = closed;
    av.label = arc_label(s, a);
    const auto& veh = s.vehicles[v];
    const std::string key = veh.id + ":" + av.label;
    const double ub = closed ? 0.0 : kInf;
    for (const auto& c : s.commodities) {
      const auto dom = c.domain == CommodityDomain::Discrete ? VarDomain::Integer : VarDomain::Continuous;
      av.x_plus.push_back(model.add_variable("xp:" + key + ":" + c.id, dom, 0.0, ub));
    }
    for (const auto& c : s.commodities) {
      const auto dom = c.domain == CommodityDomain::Discrete ? VarDomain::Integer : VarDomain::Continuous;
      av.x_minus.push_back(model.add_variable("xm:" + key + ":" + c.id, dom, 0.0, ub));
    }
    av.y = model.add_variable("y:" + key, VarDomain::Binary, 0.0, closed ? 0.0 : 1.0);
    av.z_struct = model.add_continuous("zs:" + key, 0.0, ub);
    if (a.kind != ArcKind::Holdover) {
      av.z_payload = model.add_continuous("zp:" + key, 0.0, ub);
      av.z_propellant = model.add_continuous("zf:" + key, 0.0, ub);
    }
    if (a.kind == ArcKind::Transport) av.phi = compute_propellant_fraction(a.delta_v_mps, veh.isp_s);
    out.push_back(std::move(av));
  };
  for (std::size_t v = 0; v < s.vehicles.size(); ++v) {
    for (const auto& a : net.arcs) {
      if (a.kind == ArcKind::Holdover) add(v, a, false);
      else if (a.vehicle == v) add(v, a, false);
    }
    for (const auto& a : net.closed_arcs)
      if (a.vehicle == v) add(v, a, true);
  }
  return out;
}

// Design variables with bounds from the vehicle spec; m_d's upper bound is
// set later by the closure.
inline std::vector<DesignVariables> create_design_variables(MilpModel& model, const Scenario& s) {
  std::vector<DesignVariables> out;
  for (const auto& v : s.vehicles) {
    if (!std::isfinite(v.payload_capacity.hi) || !std::isfinite(v.propellant_capacity.hi))
      throw DomainError("vehicle '" + v.id + "': design bounds need finite upper limits for big-M");
    DesignVariables d;
    d.m_p = model.add_continuous("mp:" + v.id, v.payload_capacity.lo, v.payload_capacity.hi);
    d.m_f = model.add_continuous("mf:" + v.id, v.propellant_capacity.lo, v.propellant_capacity.hi);
    d.m_d = model.add_continuous("md:" + v.id, 0.0, kInf);
    out.push_back(d);
  }
  return out;
}

inline void build_mass_balance(MilpModel& model, const Scenario& s, const std::vector<ArcVariables>& arcs,
                               const std::vector<DesignVariables>& design, int horizon) {
  const auto demands = detail::collect_demands(s);
  auto demand_of = [&](const std::string& what, std::size_t node, int t) -> std::optional<double> {
    const auto it = demands.find({what, node, t});
    return it == demands.end() ? std::optional<double>(0.0) : it->second;
  };
  for (const auto& vspec : s.vehicles) {
    double total = 0.0;
    for (const auto& d : s.demands)
      if (d.commodity == vspec.id) total += d.amount;
    if (total > 1.0) throw DomainError("vehicle '" + vspec.id + "': at most one unit may be supplied");
  }

  // Index arcs by departure and arrival (node, time).
  std::map<std::pair<std::size_t, int>, std::vector<const ArcVariables*>> out_of, into;
  for (const auto& a : arcs) {
    out_of[{a.arc.from, a.arc.depart}].push_back(&a);
    into[{a.arc.to, a.arc.arrive}].push_back(&a);
  }
  static const std::vector<const ArcVariables*> none;
  auto list = [&](auto& m, std::size_t n, int t) -> const std::vector<const ArcVariables*>& {
    const auto it = m.find({n, t});
    return it == m.end() ? none : it->second;
  };

  for (std::size_t n = 0; n < s.nodes.size(); ++n) {
    for (int t = 0; t < horizon; ++t) {
      const auto& outs = list(out_of, n, t);
      const auto& ins = list(into, n, t);
      const std::string where = "balance:" + s.nodes[n].id + ":" + std::to_string(t) + ":";
      for (std::size_t c = 0; c < s.commodities.size(); ++c) {
        const auto d = demand_of(s.commodities[c].id, n, t);
        if (!d) continue;
        std::vector<Term> terms;
        for (const auto* a : outs) terms.push_back({a->x_plus[c], 1.0});
        for (const auto* a : ins) terms.push_back({a->x_minus[c], -1.0});
        model.add_constraint(std::move(terms), Sense::LessEqual, *d, where + s.commodities[c].id);
      }
      for (std::size_t v = 0; v < s.vehicles.size(); ++v) {
        const auto d = demand_of(s.vehicles[v].id, n, t);
        if (!d) continue;
        std::vector<Term> zs, ys;
        for (const auto* a : outs)
          if (a->vehicle == v) {
            zs.push_back({a->z_struct, 1.0});
            ys.push_back({a->y, 1.0});
          }
        for (const auto* a : ins)
          if (a->vehicle == v) {
            zs.push_back({a->z_struct, -1.0});
            ys.push_back({a->y, -1.0});
          }
        zs.push_back({design[v].m_d, -*d});
        model.add_constraint(std::move(zs), Sense::LessEqual, 0.0, where + detail::structure_row_name(s.vehicles[v]));
        model.add_constraint(std::move(ys), Sense::LessEqual, *d, where + detail::vehicle_row_name(s.vehicles[v]));
      }
    }
  }
}

inline void build_transformation(MilpModel& model, const Scenario& s, const std::vector<ArcVariables>& arcs,
                                 std::size_t propellant) {
  for (const auto& a : arcs) {
    if (a.phi >= 1.0) throw DomainError("arc " + a.label + ": delta-v burns all departing mass");
    const std::string tag = "transform:" + s.vehicles[a.vehicle].id + ":" + a.label + ":";
    for (std::size_t c = 0; c < s.commodities.size(); ++c) {
      std::vector<Term> terms{{a.x_minus[c], 1.0}, {a.x_plus[c], -1.0}};
      if (c == propellant && a.phi > 0.0) {
        for (std::size_t k = 0; k < s.commodities.size(); ++k) terms.push_back({a.x_plus[k], a.phi});
        terms.push_back({a.z_struct, a.phi});
      }
      model.add_constraint(std::move(terms), Sense::Equal, 0.0, tag + s.commodities[c].id);
    }
  }
}

inline void build_concurrency(MilpModel& model, const Scenario& s, const std::vector<ArcVariables>& arcs,
                              const std::vector<DesignVariables>& design, std::size_t propellant) {
  auto big_m = [&](VarId z, VarId m, VarId y, double M) {
    const std::string tag = "bigM:" + model.variable(z).name + ":";
    model.add_constraint({{z, 1.0}, {y, -M}}, Sense::LessEqual, 0.0, tag + "0");
    model.add_constraint({{z, 1.0}, {m, -1.0}}, Sense::LessEqual, 0.0, tag + "1");
    model.add_constraint({{z, 1.0}, {m, -1.0}, {y, -M}}, Sense::GreaterEqual, -M, tag + "2");
  };
  for (const auto& a : arcs) {
    const auto& d = design[a.vehicle];
    const std::string key = s.vehicles[a.vehicle].id + ":" + a.label;
    big_m(a.z_struct, d.m_d, a.y, model.variable(d.m_d).upper);
    if (!a.z_payload) continue;
    std::vector<Term> payload{{*a.z_payload, -1.0}};
    for (std::size_t c = 0; c < s.commodities.size(); ++c)
      if (c != propellant) payload.push_back({a.x_plus[c], 1.0});
    model.add_constraint(std::move(payload), Sense::LessEqual, 0.0, "payload_cap:" + key);
    model.add_constraint({{a.x_plus[propellant], 1.0}, {*a.z_propellant, -1.0}}, Sense::LessEqual, 0.0,
                         "propellant_cap:" + key);
    big_m(*a.z_payload, d.m_p, a.y, model.variable(d.m_p).upper);
    big_m(*a.z_propellant, d.m_f, a.y, model.variable(d.m_f).upper);
  }
}

// Adds the sizing rows for vehicle v and sets a finite upper bound on m_d.
inline void build_sizing(MilpModel& model, const VehicleSpec& v, DesignVariables& d, const SizingClosure& closure) {
  const double c = sizing_params(v).payload_coeff;
  const double mp_ub = model.variable(d.m_p).upper;
  const std::string tag = "sizing:" + v.id;
  std::visit(
      [&](const auto& cl) {
        using T = std::decay_t<decltype(cl)>;
        if constexpr (std::is_same_v<T, LinearEpsilonSizing>) {
          if (!(cl.epsilon > 0.0 && cl.epsilon < 1.0)) throw DomainError("structural coefficient must be in (0, 1)");
          model.add_constraint({{d.m_d, 1.0 - cl.epsilon}, {d.m_p, -cl.epsilon}}, Sense::Equal, 0.0, tag);
          model.set_bounds(d.m_d, 0.0, cl.epsilon / (1.0 - cl.epsilon) * mp_ub);
        } else if constexpr (std::is_same_v<T, RegressionSizing>) {
          if (cl.fit.beta.size() != 1) throw DomainError("sizing regression must have one input");
          const double beta = cl.fit.beta[0];
          const auto& mf = model.variable(d.m_f);
          model.add_constraint({{d.m_d, 1.0}, {d.m_p, -c}, {d.m_f, -beta}}, Sense::Equal, cl.fit.intercept, tag);
          const double hi = c * mp_ub + std::max(beta * mf.lower, beta * mf.upper) + cl.fit.intercept;
          model.set_bounds(d.m_d, 0.0, std::max(hi, 0.0));
        } else {
          const ReluNetwork& net = cl.net;
          if (net.input_size() != 1 || net.output_size() != 1 || net.input_box.size() != 1)
            throw DomainError("sizing network must map one input with a declared box to one output");
          // Restrict m_f to the region the network was fitted on.
          const auto& mf = model.variable(d.m_f);
          const Range r = detail::intersect({mf.lower, mf.upper}, {net.input_box[0].lo, net.input_box[0].hi});
          if (r.lo > r.hi) throw DomainError("vehicle '" + v.id + "': propellant bounds miss the network input box");
          model.set_bounds(d.m_f, r.lo, r.hi);
          const NeuronBounds nb = propagate_bounds(net, {{r.lo, r.hi}});
          const double out_lo = net.clamp_output ? std::max(0.0, nb.output[0].lo) : nb.output[0].lo;
          const double out_hi = net.clamp_output ? std::max(0.0, nb.output[0].hi) : nb.output[0].hi;
          const VarId out = model.add_continuous("nn:" + v.id, out_lo, out_hi);
          d.surrogate_out = out;
          d.embedding = embed_network(model, net, nb, d.m_f, out, v.id);
          model.add_constraint({{d.m_d, 1.0}, {d.m_p, -c}, {out, -1.0}}, Sense::Equal, 0.0, tag);
          model.set_bounds(d.m_d, 0.0, std::max(c * mp_ub + out_hi, 0.0));
        }
      },
      closure);
}

inline void build_objective(MilpModel& model, const Scenario& s, const std::vector<ArcVariables>& arcs) {
  for (const auto& a : arcs) {
    if (!a.arc.family) continue;  // holdover arcs are free
    const ArcCost cost = s.cost_for(s.arcs[*a.arc.family]);
    for (const auto x : a.x_plus) model.add_objective_term(x, cost.commodity_cost);
    model.add_objective_term(a.z_struct, cost.structure_cost);
  }
}

inline std::size_t propellant_index(const Scenario& s) {
  const auto p = s.commodity_index(kPropellant);
  if (!p) throw ReferenceError(std::string(kPropellant), "scenario has no propellant commodity");
  return *p;
}

inline AssembledModel assemble_model(const Scenario& scenario, const SizingClosure& closure) {
  AssembledModel am;
  am.scenario = scenario;
  am.model = MilpModel(scenario.name.empty() ? "campaign" : scenario.name);
  am.network = expand_time_network(scenario);
  am.propellant = propellant_index(scenario);
  am.design = create_design_variables(am.model, scenario);
  // Sizing first so m_d has its final upper bound before the big-M rows read it.
  for (std::size_t v = 0; v < scenario.vehicles.size(); ++v)
    build_sizing(am.model, scenario.vehicles[v], am.design[v], closure);
  am.arcs = create_flow_variables(am.model, scenario, am.network);
  build_mass_balance(am.model, scenario, am.arcs, am.design, am.network.horizon);
  build_transformation(am.model, scenario, am.arcs, am.propellant);
  build_concurrency(am.model, scenario, am.arcs, am.design, am.propellant);
  build_objective(am.model, scenario, am.arcs);
  am.model.freeze();
  return am;
}

struct FlowRecord {
  std::string vehicle;
  std::string from;
  std::string to;
  int depart = 0;
  std::string commodity;
  double amount_kg = 0.0;
  bool operator==(const FlowRecord&) const = default;
};

// Non-zero departing flows on transport and launch arcs, including the
// vehicle structure (commodity "structure").
inline std::vector<FlowRecord> extract_flows(const AssembledModel& am, const Solution& sol, double tol = 1e-6) {
  std::vector<FlowRecord> out;
  const auto& s = am.scenario;
  for (const auto& a : am.arcs) {
    if (a.arc.kind == ArcKind::Holdover || a.closed) continue;
    const std::string& veh = s.vehicles[a.vehicle].id;
    const std::string& from = s.nodes[a.arc.from].id;
    const std::string& to = s.nodes[a.arc.to].id;
    for (std::size_t c = 0; c < s.commodities.size(); ++c) {
      const double x = sol[a.x_plus[c]];
      if (x > tol) out.push_back({veh, from, to, a.arc.depart, s.commodities[c].id, x});
    }
    if (sol[a.z_struct] > tol) out.push_back({veh, from, to, a.arc.depart, "structure", sol[a.z_struct]});
  }
  return out;
}

}  // namespace spacelog

#include "spacelog/formulation.hpp"

#include <gtest/gtest.h>

#include <regex>

#include "spacelog/audit.hpp"
#include "spacelog/branch_and_bound.hpp"
#include "spacelog/simplex.hpp"
#include "spacelog/training.hpp"

using namespace spacelog;

namespace {

Scenario lunar() { return load_scenario_file(std::string(SPACELOG_SOURCE_DIR) + "/scenarios/lunar_campaign.json"); }

const LinearSurrogate& lunar_regression() {
  static const LinearSurrogate fit = fit_linear_regression(generate_dataset(SizingParams{}));
  return fit;
}

const ReluNetwork& lunar_network() {
  static const ReluNetwork net = [] {
    TrainConfig cfg;
    cfg.seed = 0;
    return train_relu_network(generate_dataset(SizingParams{}), cfg);
  }();
  return net;
}

const LinearConstraint* find_row(const MilpModel& m, const std::string& tag) {
  for (const auto& r : m.constraints())
    if (r.tag == tag) return &r;
  return nullptr;
}

double coef(const LinearConstraint& r, VarId v) {
  for (const auto& t : r.terms)
    if (t.var == v) return t.coef;
  return 0.0;
}

const ArcVariables& arc_named(const AssembledModel& am, const std::string& label) {
  for (const auto& a : am.arcs)
    if (a.label == label) return a;
  throw std::runtime_error("no arc " + label);
}

// One node, one vehicle parked there, payload supplied at t=0 and demanded at t=2.
std::string holdover_chain(double supply, double demand) {
  return R"({"horizon_days": 3, "nodes": [{"id": "A", "kind": "orbit"}], "arcs": [],
    "vehicles": [{"id": "v", "isp_s": 300, "burn_time_s": 100, "alpha": 0.05, "m_ub_kg": 1000}],
    "demands": [{"commodity": "v", "node": "A", "time": 0, "amount": 1},
                {"commodity": "payload", "node": "A", "time": 0, "amount": )" +
         std::to_string(supply) + R"(},
                {"commodity": "payload", "node": "A", "time": 2, "amount": )" +
         std::to_string(-demand) + "}]}";
}

}  // namespace

TEST(Formulation, PropellantFraction) {
  EXPECT_EQ(compute_propellant_fraction(0, 330, 9.8), 0.0);
  EXPECT_NEAR(compute_propellant_fraction(4040, 330, 9.8), 0.71327, 1e-5);
  EXPECT_NEAR(compute_propellant_fraction(1870, 330, 9.8), 0.43911, 1e-5);
  EXPECT_THROW(compute_propellant_fraction(-5, 330, 9.8), DomainError);
}

TEST(Formulation, DemandRowAtLunarSurface) {
  const auto am = assemble_model(lunar(), LinearEpsilonSizing{0.08});
  const auto* row = find_row(am.model, "balance:LS:5:payload");
  ASSERT_NE(row, nullptr);
  EXPECT_EQ(row->sense, Sense::LessEqual);
  EXPECT_EQ(row->rhs, -1000.0);
  // Unbounded supplies produce no row.
  EXPECT_EQ(find_row(am.model, "balance:Earth:0:payload"), nullptr);
  EXPECT_EQ(find_row(am.model, "balance:Earth:0:propellant"), nullptr);
  // The vehicle supply enters the structure row as d * m_d.
  const auto* st = find_row(am.model, "balance:Earth:0:structure.sc1");
  ASSERT_NE(st, nullptr);
  EXPECT_EQ(coef(*st, am.design[0].m_d), -1.0);
  const auto* vr = find_row(am.model, "balance:Earth:0:vehicle.sc1");
  ASSERT_NE(vr, nullptr);
  EXPECT_EQ(vr->rhs, 1.0);
}

TEST(Formulation, IsolatedNodeRowIsTrivial) {
  const auto s = load_scenario(R"({"horizon_days": 1, "nodes": [{"id": "A", "kind": "orbit"}], "arcs": []})");
  const auto am = assemble_model(s, LinearEpsilonSizing{0.08});
  const auto* row = find_row(am.model, "balance:A:0:payload");
  ASSERT_NE(row, nullptr);
  EXPECT_TRUE(row->terms.empty());
  EXPECT_EQ(row->rhs, 0.0);
}

TEST(Formulation, HoldoverChainCarriesPayload) {
  const auto am = assemble_model(load_scenario(holdover_chain(5, 5)), LinearEpsilonSizing{0.08});
  const auto sol = solve_milp(am.model);
  ASSERT_EQ(sol.status, SolveStatus::Optimal);
  const std::size_t pay = *am.scenario.commodity_index("payload");
  EXPECT_NEAR(sol[arc_named(am, "A-A@0").x_plus[pay]], 5.0, 1e-9);
  EXPECT_NEAR(sol[arc_named(am, "A-A@1").x_plus[pay]], 5.0, 1e-9);

  const auto short_supply = assemble_model(load_scenario(holdover_chain(5, 6)), LinearEpsilonSizing{0.08});
  EXPECT_EQ(solve_milp(short_supply.model).status, SolveStatus::Infeasible);
}

TEST(Formulation, HoldoverTransformationIsIdentity) {
  const auto am = assemble_model(lunar(), LinearEpsilonSizing{0.08});
  const auto& a = arc_named(am, "LEO-LEO@2");
  for (std::size_t c = 0; c < am.scenario.commodities.size(); ++c) {
    const auto* row = find_row(am.model, "transform:sc1:LEO-LEO@2:" + am.scenario.commodities[c].id);
    ASSERT_NE(row, nullptr);
    EXPECT_EQ(row->terms.size(), 2u);
    EXPECT_EQ(coef(*row, a.x_minus[c]), 1.0);
    EXPECT_EQ(coef(*row, a.x_plus[c]), -1.0);
  }
}

TEST(Formulation, RocketEquationOnTransportArc) {
  const auto am = assemble_model(lunar(), LinearEpsilonSizing{0.08});
  const auto& a = arc_named(am, "LEO-LLO@1");
  const auto* row = find_row(am.model, "transform:sc1:LEO-LLO@1:propellant");
  ASSERT_NE(row, nullptr);
  const double phi = 1.0 - std::exp(-4040.0 / (330.0 * 9.8));
  EXPECT_NEAR(coef(*row, a.z_struct), phi, 1e-15);
  EXPECT_NEAR(coef(*row, a.x_plus[*am.scenario.commodity_index("payload")]), phi, 1e-15);
  EXPECT_NEAR(coef(*row, a.x_plus[am.propellant]), phi - 1.0, 1e-15);
  // Departing wet mass on the reference trajectory burns this much propellant.
  EXPECT_NEAR(phi * 42811.088, 30536.02, 0.5);
}

TEST(Formulation, ZeroDeltaVArcIsIdentity) {
  const auto s = load_scenario(R"({"horizon_days": 2, "nodes": [{"id": "A", "kind": "orbit"}, {"id": "B", "kind": "orbit"}],
    "arcs": [{"from": "A", "to": "B", "delta_v_mps": 0, "tof_days": 1}],
    "vehicles": [{"id": "v", "isp_s": 300, "burn_time_s": 100, "alpha": 0.05, "m_ub_kg": 1000}]})");
  const auto am = assemble_model(s, LinearEpsilonSizing{0.08});
  const auto* row = find_row(am.model, "transform:v:A-B@0:propellant");
  ASSERT_NE(row, nullptr);
  EXPECT_EQ(row->terms.size(), 2u);
}

TEST(Formulation, WindowZeroing) {
  const auto am = assemble_model(lunar(), LinearEpsilonSizing{0.08});
  std::size_t closed = 0;
  for (const auto& a : am.arcs) {
    if (!a.closed) continue;
    ++closed;
    std::vector<VarId> vars = a.x_plus;
    vars.insert(vars.end(), a.x_minus.begin(), a.x_minus.end());
    vars.push_back(a.y);
    vars.push_back(a.z_struct);
    for (const auto v : vars) {
      EXPECT_EQ(am.model.variable(v).lower, 0.0);
      EXPECT_EQ(am.model.variable(v).upper, 0.0) << am.model.variable(v).name;
    }
  }
  // Earth-LEO departs 1..4, LEO-LLO 0 and 2, LLO-LS 0..3 are inside the horizon but closed.
  EXPECT_EQ(closed, 10u);
}

TEST(Formulation, TagsFollowGrammar) {
  const auto am = assemble_model(lunar(), NeuralSizing{lunar_network()});
  const std::regex grammar(
      R"(^(balance:[^:]+:\d+:[^:]+|transform:[^:]+:[^:]+@\d+:[^:]+|(payload|propellant)_cap:[^:]+:[^:]+@\d+|bigM:.+:[012]|sizing:[^:]+|relu:.+)$)");
  for (const auto& r : am.model.constraints()) EXPECT_TRUE(std::regex_match(r.tag, grammar)) << r.tag;
}

TEST(Formulation, BigMUsesDesignUpperBounds) {
  const auto am = assemble_model(lunar(), LinearEpsilonSizing{0.08});
  const auto& a = arc_named(am, "Earth-LEO@0");
  const auto* row = find_row(am.model, "bigM:" + am.model.variable(*a.z_payload).name + ":0");
  ASSERT_NE(row, nullptr);
  EXPECT_EQ(coef(*row, a.y), -50000.0);
  // m_d's bound comes from the closure: eps / (1 - eps) * m_p upper.
  EXPECT_NEAR(am.model.variable(am.design[0].m_d).upper, 0.08 / 0.92 * 50000.0, 1e-9);
}

TEST(Formulation, RelaxationIsWeakerThanInteger) {
  const auto am = assemble_model(lunar(), LinearEpsilonSizing{0.08});
  const auto sf = to_standard_form(am.model);
  const auto lp = solve_lp(sf);
  ASSERT_EQ(lp.status, LpStatus::Optimal);
  const auto sol = solve_milp(am.model);
  ASSERT_EQ(sol.status, SolveStatus::Optimal);
  EXPECT_LE(lp.objective, sol.objective + 1e-6);
  // With M = 50000 and m_p = 1000, the relaxation can fly a fraction of the vehicle.
  const auto& a = arc_named(am, "Earth-LEO@0");
  const double y = lp.x(a.y.index);
  const double zp = lp.x(a.z_payload->index);
  EXPECT_LT(y, 1.0 - 1e-6);
  EXPECT_LE(zp, 50000.0 * y + 1e-6);
}

TEST(Formulation, LinearEpsilonBaseline) {
  const auto am = assemble_model(lunar(), LinearEpsilonSizing{0.08});
  const auto sol = solve_milp(am.model);
  ASSERT_EQ(sol.status, SolveStatus::Optimal);
  EXPECT_TRUE(evaluate(am.model, sol.values).empty());
  const auto audit = audit_mass_balance(am, sol);
  EXPECT_GE(audit.delivered("LS", 5, "payload"), 1000.0 - 1e-6);
  // Regression baseline from the in-repo solve.
  EXPECT_NEAR(sol.objective, 6758.763, 1e-2);
}

TEST(Formulation, RegressionClosureNearReference) {
  const auto am = assemble_model(lunar(), RegressionSizing{lunar_regression()});
  const auto sol = solve_milp(am.model);
  ASSERT_EQ(sol.status, SolveStatus::Optimal);
  EXPECT_NEAR(sol.objective, 42703.819, 0.01 * 42703.819);
  EXPECT_NEAR(sol[am.design[0].m_p], 1000.0, 1e-6);
}

TEST(Formulation, RegressionOnExclusiveGridReproducesReferenceExactly) {
  // Fitting on 0..49000 (50 points) gives the published linear-regression solution.
  const auto fit = fit_linear_regression(generate_dataset(SizingParams{}, 0, 49000, 1000));
  const auto am = assemble_model(lunar(), RegressionSizing{fit});
  const auto sol = solve_milp(am.model);
  ASSERT_EQ(sol.status, SolveStatus::Optimal);
  EXPECT_NEAR(sol.objective, 42703.819, 1e-3);
  EXPECT_NEAR(sol[am.design[0].m_d], 5867.706, 1e-3);
  EXPECT_NEAR(sol[am.design[0].m_f], 35836.113, 1e-3);
}

TEST(Formulation, NeuralClosureNearOracle) {
  const auto am = assemble_model(lunar(), NeuralSizing{lunar_network()});
  EXPECT_EQ(am.design[0].embedding.binaries.size() + am.design[0].embedding.fixed_active +
                am.design[0].embedding.fixed_inactive,
            11u);  // 10 hidden neurons plus the clamp stage
  const auto sol = solve_milp(am.model);
  ASSERT_EQ(sol.status, SolveStatus::Optimal);
  EXPECT_TRUE(evaluate(am.model, sol.values).empty());
  // m_d agrees with the embedded network evaluated at the chosen m_f.
  const double md = 2.3931 * sol[am.design[0].m_p] + forward(lunar_network(), sol[am.design[0].m_f]);
  EXPECT_NEAR(sol[am.design[0].m_d], md, 1e-6);
  EXPECT_NEAR(sol.objective, 42811.088, 0.03 * 42811.088);
}

TEST(Formulation, BilinearProductsExactAndConservation) {
  for (const SizingClosure& cl : std::vector<SizingClosure>{LinearEpsilonSizing{0.08}, RegressionSizing{lunar_regression()},
                                                            NeuralSizing{lunar_network()}}) {
    const auto am = assemble_model(lunar(), cl);
    const auto sol = solve_milp(am.model);
    ASSERT_EQ(sol.status, SolveStatus::Optimal);
    const auto bm = audit_big_m(am, sol);
    EXPECT_LE(bm.max_product_error, 1e-6) << bm.worst;
    EXPECT_LE(bm.max_flow_without_vehicle, 1e-6);
    const auto mb = audit_mass_balance(am, sol);
    EXPECT_LE(mb.max_violation, 1e-6);
    EXPECT_TRUE(mb.unexpected_slack.empty());
    // Supplies drawn at Earth minus what the network keeps equals the burn.
    double created = 0.0;
    for (const auto& e : mb.entries) created += e.net_outflow;
    EXPECT_NEAR(created, propellant_burned(am, sol), 1e-6);
  }
}

TEST(Formulation, UnreachableDemandIsInfeasible) {
  auto s = lunar();
  s.nodes.push_back({"Mars", NodeKind::BodySurface});
  s.demands.push_back({"payload", "Mars", 5, -10.0});
  const auto am = assemble_model(s, LinearEpsilonSizing{0.08});
  EXPECT_EQ(solve_milp(am.model).status, SolveStatus::Infeasible);
}

TEST(Formulation, UnboundedDesignRejected) {
  auto s = lunar();
  s.vehicles[0].payload_capacity.hi = kInf;
  EXPECT_THROW(assemble_model(s, LinearEpsilonSizing{0.08}), DomainError);
  auto fleet = lunar();
  fleet.demands.push_back({"sc1", "Earth", 0, 1.0});
  EXPECT_THROW(assemble_model(fleet, LinearEpsilonSizing{0.08}), DomainError);
  EXPECT_THROW(assemble_model(lunar(), LinearEpsilonSizing{1.5}), DomainError);
}

TEST(Formulation, NetworkInputRangeRestrictsPropellant) {
  ReluNetwork net = lunar_network();
  net.input_box = {{0.0, 40000.0}};
  const auto am = assemble_model(lunar(), NeuralSizing{net});
  EXPECT_EQ(am.model.variable(am.design[0].m_f).upper, 40000.0);
  net.input_box = {{60000.0, 70000.0}};
  EXPECT_THROW(assemble_model(lunar(), NeuralSizing{net}), DomainError);
}

TEST(Formulation, FlowTable) {
  const auto am = assemble_model(lunar(), RegressionSizing{lunar_regression()});
  const auto sol = solve_milp(am.model);
  const auto flows = extract_flows(am, sol);
  bool launch_payload = false;
  for (const auto& f : flows) {
    EXPECT_EQ(f.vehicle, "sc1");
    if (f.from == "Earth" && f.to == "LEO" && f.commodity == "payload") {
      launch_payload = true;
      EXPECT_NEAR(f.amount_kg, 1000.0, 1e-6);
      EXPECT_EQ(f.depart, 0);
    }
  }
  EXPECT_TRUE(launch_payload);
}

// The exact nonlinear design, flown along the only route, satisfies every
// linear row of the network model; only the surrogate rows are skipped since
// the network approximates the sizing relation.
TEST(Formulation, OracleTrajectoryIsFeasible) {
  const auto s = lunar();
  const auto am = assemble_model(s, NeuralSizing{lunar_network()});
  const std::vector<double> dv{4040.0, 1870.0};
  const auto o = solve_exact_oracle(SizingParams{}, 1000.0, dv);

  std::vector<double> x(am.model.num_variables(), 0.0);
  const auto& d = am.design[0];
  x[d.m_p.index] = o.m_p;
  x[d.m_f.index] = o.m_f;
  x[d.m_d.index] = o.m_d;
  const std::size_t payload = *s.commodity_index("payload");
  double prop = o.m_f;
  int flown = 0;
  for (const auto& a : am.arcs) {
    if (a.arc.kind == ArcKind::Holdover || a.closed) continue;
    ++flown;
    x[a.y.index] = 1.0;
    x[a.z_struct.index] = o.m_d;
    x[a.z_payload->index] = o.m_p;
    x[a.z_propellant->index] = o.m_f;
    x[a.x_plus[payload].index] = x[a.x_minus[payload].index] = 1000.0;
    x[a.x_plus[am.propellant].index] = prop;
    prop -= a.phi * (1000.0 + prop + o.m_d);
    x[a.x_minus[am.propellant].index] = prop;
  }
  ASSERT_EQ(flown, 3);
  EXPECT_NEAR(prop, 0.0, 1e-3);

  for (const auto& v : evaluate(am.model, x, 1e-3)) {
    const bool surrogate = v.tag.starts_with("relu:") || v.tag.starts_with("sizing:") ||
                           v.tag.starts_with("bound:sc1:") || v.tag.starts_with("bound:nn:");
    EXPECT_TRUE(surrogate) << v.tag << " violated by " << v.amount;
  }
}

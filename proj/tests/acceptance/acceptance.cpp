// End-to-end acceptance checks. Prints one PASS/FAIL/SKIP line per criterion
// and exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <thread>
#include <vector>

#include "oracles/enumeration.hpp"
#include "oracles/random_instances.hpp"
#include "spacelog/embedding.hpp"
#include "spacelog/pipeline.hpp"

using namespace spacelog;

namespace {

const std::string kSource = SPACELOG_SOURCE_DIR;
const std::string kLunar = kSource + "/scenarios/lunar_campaign.json";

int failures = 0;

void verdict(int id, const std::string& what, const char* status, const std::string& detail) {
  std::cout << status << "  criterion " << id << " (" << what << "): " << detail << std::endl;
  if (std::string(status) == "FAIL") ++failures;
}

void check(int id, const std::string& what, bool ok, const std::string& detail) {
  verdict(id, what, ok ? "PASS" : "FAIL", detail);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits = 3) {
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(digits);
  o << v;
  return o.str();
}

std::string stable_json(const RunReport& r) {
  auto j = to_json(r);
  j["milp"].erase("seconds");
  return j.dump();
}

void oracle_reproduction() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<double> dv{4040.0, 1870.0};
  const auto r = solve_exact_oracle(SizingParams{}, 1000.0, dv);
  const double secs = seconds_since(t0);
  const bool ok = std::abs(r.imleo - 42811.088) <= 0.5 && std::abs(r.m_d - 5884.957) <= 0.5 &&
                  std::abs(r.m_f - 35926.131) <= 0.5 && secs < 1.0;
  check(1, "exact oracle", ok,
        "IMLEO " + fmt(r.imleo) + ", m_d " + fmt(r.m_d) + ", m_f " + fmt(r.m_f) + " in " + fmt(secs, 4) + " s");
}

RunReport regression_pipeline(const Scenario& s) {
  PipelineOptions opt;
  opt.surrogate = SurrogateKind::Regression;
  const auto t0 = std::chrono::steady_clock::now();
  const auto a = run_pipeline(s, opt);
  const double secs = seconds_since(t0);
  const auto b = run_pipeline(s, opt);
  const bool deterministic = stable_json(a) == stable_json(b);
  const bool ok = a.status == SolveStatus::Optimal && std::abs(a.objective - 42703.819) <= 0.01 * 42703.819 &&
                  deterministic && secs < 30.0;
  check(2, "linear-regression pipeline", ok,
        "objective " + fmt(a.objective) + " kg (" + fmt((a.objective / 42703.819 - 1.0) * 100.0, 3) +
            " % from 42703.819), repeat identical: " + (deterministic ? "yes" : "no") + ", " + fmt(secs, 2) + " s");
  return a;
}

SeedStudySummary nn_seed_study(const Scenario& s) {
  PipelineOptions opt;
  opt.seed = 0;
  const std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  const auto t0 = std::chrono::steady_clock::now();
  const auto study = run_seed_study(s, opt, 20, jobs, 0.98);
  const double secs = seconds_since(t0);
  const bool ok = study.gaps.size() > 0 && study.median_gap <= 2.0 && study.mean_gap <= 6.0 && secs < 600.0;
  check(3, "20-trial ReLU seed study", ok,
        "median gap " + fmt(study.median_gap) + " %, mean gap " + fmt(study.mean_gap) + " % over " +
            std::to_string(study.gaps.size()) + " trials; excluded (held-out R^2 < 0.98) " +
            std::to_string(study.exclusions) + ", failed " + std::to_string(study.failures) +
            "; all solved trials: median " + fmt(study.median_gap_all) + " %, mean " + fmt(study.mean_gap_all) +
            " %; " + fmt(secs, 1) + " s");
  return study;
}

void surrogate_fit(const Scenario& s) {
  const SizingParams p = sizing_params(s.vehicles[0]);
  const auto data = generate_dataset(p);
  std::size_t good = 0;
  std::ostringstream values;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    TrainConfig cfg;
    cfg.seed = seed;
    const auto net = train_relu_network(data, cfg);
    const double r2 = held_out_r2(
        net, [&p](double m) { return surrogate_target(p, m); }, 0.0, 50000.0, 100, detail::held_out_seed(seed));
    good += r2 >= 0.98;
    values << (seed ? " " : "") << fmt(r2, 4);
  }
  check(4, "surrogate fit", good >= 14,
        std::to_string(good) + "/20 seeds with held-out R^2 >= 0.98 [" + values.str() + "]");
}

void encoding_exactness(const Scenario& s) {
  const SizingParams p = sizing_params(s.vehicles[0]);
  const auto data = generate_dataset(p);
  BnbConfig cfg = testing_instances::exact_config();
  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> u(0.0, 50000.0);
  double worst = 0.0;
  std::size_t solves = 0, bad_status = 0;
  for (std::uint64_t k = 0; k < 10; ++k) {
    TrainConfig tc;
    tc.seed = 100 + k;
    const auto net = train_relu_network(data, tc);
    const auto bounds = propagate_bounds(net);
    for (int i = 0; i < 50; ++i) {
      const double x = u(rng);
      const double expected = forward(net, x);
      for (double sense : {1.0, -1.0}) {
        MilpModel m;
        const VarId in = m.add_continuous("in", x, x);
        const VarId out = m.add_continuous("out", -kInf, kInf);
        embed_network(m, net, bounds, in, out, "net");
        m.add_objective_term(out, sense);
        const auto sol = solve_milp(m, cfg);
        ++solves;
        if (sol.status != SolveStatus::Optimal) {
          ++bad_status;
          continue;
        }
        worst = std::max(worst, std::abs(sol[out] - expected));
      }
    }
  }
  check(5, "ReLU encoding exactness", bad_status == 0 && worst <= 1e-6,
        std::to_string(solves) + " min/max solves over 10 nets x 50 inputs, max |milp - forward| = " +
            [&] { std::ostringstream o; o << worst; return o.str(); }() +
            (bad_status ? ", non-optimal solves " + std::to_string(bad_status) : ""));
}

void solver_equivalence() {
  std::mt19937_64 rng(60606);
  int lp_ok = 0, lp_feasible = 0;
  for (int t = 0; t < 20; ++t) {
    const auto lp = testing_instances::random_lp(rng);
    const auto expected = oracle::vertex_enumeration(lp);
    StandardForm sf;
    sf.A = lp.A;
    sf.b = lp.b;
    sf.c = lp.c;
    sf.lower = lp.lower;
    sf.upper = lp.upper;
    sf.integer.assign(static_cast<std::size_t>(lp.A.cols()), false);
    const auto r = solve_lp(sf);
    if (!expected) {
      lp_ok += r.status == LpStatus::Infeasible;
      continue;
    }
    ++lp_feasible;
    lp_ok += r.status == LpStatus::Optimal && std::abs(r.objective - *expected) <= 1e-8;
  }
  int milp_ok = 0, milp_feasible = 0;
  for (int t = 0; t < 20; ++t) {
    auto p = testing_instances::random_milp(rng);
    const auto expected = oracle::exhaustive_enumeration(p.raw);
    const auto sol = solve_milp(p.model, testing_instances::exact_config());
    if (!expected) {
      milp_ok += sol.status == SolveStatus::Infeasible;
      continue;
    }
    ++milp_feasible;
    milp_ok += sol.status == SolveStatus::Optimal && std::abs(sol.objective - *expected) <= 1e-9;
  }
  check(6, "solver vs enumeration", lp_ok == 20 && milp_ok == 20,
        "LP " + std::to_string(lp_ok) + "/20 agree (" + std::to_string(lp_feasible) + " feasible, tol 1e-8); MILP " +
            std::to_string(milp_ok) + "/20 agree (" + std::to_string(milp_feasible) + " feasible, tol 1e-9)");
}

std::vector<const RunReport*> solved(const RunReport& linreg, const SeedStudySummary& study) {
  std::vector<const RunReport*> out;
  if (linreg.audit) out.push_back(&linreg);
  for (const auto& t : study.trials)
    if (t.report && t.report->audit) out.push_back(&*t.report);
  return out;
}

void big_m_exactness(const std::vector<const RunReport*>& runs) {
  double product = 0.0, stray = 0.0;
  for (const auto* r : runs) {
    product = std::max(product, r->audit->max_product_error);
    stray = std::max(stray, r->audit->max_flow_without_vehicle);
  }
  std::ostringstream o;
  o << runs.size() << " solved instances, max |z - m y| = " << product << ", max cargo on unflown arcs = " << stray;
  check(7, "big-M products", !runs.empty() && product <= 1e-6 && stray <= 1e-6, o.str());
}

void mass_balance(const std::vector<const RunReport*>& runs) {
  double violation = 0.0, min_delivered = kInf;
  std::size_t slack = 0;
  for (const auto* r : runs) {
    violation = std::max(violation, r->audit->max_balance_violation);
    slack += r->audit->unexpected_slack;
    for (const auto& d : r->audit->demands)
      if (d.node == "LS" && d.time == 5 && d.commodity == "payload") min_delivered = std::min(min_delivered, d.delivered);
  }
  std::ostringstream o;
  o << runs.size() << " solved instances, max conservation excess " << violation << ", slack outside supply nodes "
    << slack << ", min payload delivered at LS t=5 " << fmt(min_delivered) << " kg";
  check(8, "mass balance", !runs.empty() && violation <= 1e-6 && slack == 0 && min_delivered >= 1000.0 - 1e-6,
        o.str());
}

struct External {
  int code = -1;
  std::string status;
  double objective = kNaN;
};

External solve_externally(const std::filesystem::path& mps) {
  const std::string cmd = "python3 " + kSource + "/tests/acceptance/solve_mps.py " + mps.string() + " 2>/dev/null";
  External e;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return e;
  std::string text;
  char buf[256];
  while (fgets(buf, sizeof buf, pipe)) text += buf;
  const int raw = pclose(pipe);
  e.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::istringstream in(text);
  for (std::string key; in >> key;) {
    if (key == "status") in >> e.status;
    else if (key == "objective") in >> e.objective;
  }
  return e;
}

void cross_solver(const Scenario& s) {
  const auto dir = std::filesystem::temp_directory_path();
  std::vector<std::pair<std::string, SizingClosure>> cases;
  cases.emplace_back("linreg", RegressionSizing{fit_linear_regression(generate_dataset(sizing_params(s.vehicles[0])))});
  TrainConfig tc;
  tc.seed = 0;
  cases.emplace_back("nn seed 0", NeuralSizing{train_relu_network(generate_dataset(sizing_params(s.vehicles[0])), tc)});

  std::ostringstream detail;
  bool ok = true;
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const auto am = assemble_model(s, cases[k].second);
    const auto path = dir / ("spacelog_acceptance_" + std::to_string(k) + ".mps");
    export_mps(am.model, path);
    const auto ours = solve_milp(am.model);
    const auto theirs = solve_externally(path);
    std::filesystem::remove(path);
    std::filesystem::remove(path.string() + ".names");
    if (theirs.code == 3 || theirs.code == 127) {
      verdict(9, "MPS cross-check", "SKIP", "external solver not available (needs python3 with highspy)");
      return;
    }
    const double rel = std::abs(ours.objective - theirs.objective) / std::max(1.0, std::abs(ours.objective));
    const bool agree = theirs.code == 0 && theirs.status == "Optimal" && rel <= 1e-4;
    ok = ok && agree;
    detail << (k ? "; " : "") << cases[k].first << ": ours " << fmt(ours.objective) << ", HiGHS "
           << (std::isfinite(theirs.objective) ? fmt(theirs.objective) : theirs.status) << " (rel diff "
           << rel << ")";
  }
  check(9, "MPS cross-check", ok, detail.str());
}

}  // namespace

int main() {
  try {
    const Scenario lunar = load_scenario_file(kLunar);
    oracle_reproduction();
    const auto linreg = regression_pipeline(lunar);
    const auto study = nn_seed_study(lunar);
    surrogate_fit(lunar);
    encoding_exactness(lunar);
    solver_equivalence();
    const auto runs = solved(linreg, study);
    big_m_exactness(runs);
    mass_balance(runs);
    cross_solver(lunar);
  } catch (const std::exception& e) {
    std::cout << "FAIL  acceptance run aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << (failures ? "acceptance: " + std::to_string(failures) + " criteria failed" : "acceptance: all criteria met")
            << std::endl;
  return failures ? 1 : 0;
}

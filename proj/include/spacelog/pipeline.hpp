#pragma once

// End-to-end driver: fit or load a sizing surrogate, assemble the campaign
// model, solve it, and compare against the exact nonlinear design when the
// scenario is a single-vehicle, single-destination mission.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "spacelog/audit.hpp"
#include "spacelog/branch_and_bound.hpp"
#include "spacelog/formulation.hpp"
#include "spacelog/linear_regression.hpp"
#include "spacelog/mps.hpp"
#include "spacelog/relu_network.hpp"
#include "spacelog/scenario.hpp"
#include "spacelog/spacecraft.hpp"
#include "spacelog/training.hpp"

namespace spacelog {

enum class SurrogateKind { Neural, Regression };

inline std::string_view to_string(SurrogateKind k) { return k == SurrogateKind::Neural ? "nn" : "linreg"; }

struct TrainRange {
  double lo = 0.0;
  double hi = 50000.0;
  double step = 1000.0;
};

struct PipelineOptions {
  std::filesystem::path scenario;
  SurrogateKind surrogate = SurrogateKind::Neural;
  std::optional<std::filesystem::path> model;       // load instead of training
  std::optional<std::filesystem::path> save_model;  // write the trained network
  std::optional<std::filesystem::path> export_mps;
  std::uint64_t seed = 0;
  TrainRange train_range;
  bool clamp_output = true;
  double time_limit_s = 600.0;
  std::size_t held_out_points = 100;
};

struct OracleComparison {
  double imleo = 0.0;
  double m_d = 0.0;
  double m_p = 0.0;
  double m_f = 0.0;
  std::vector<double> delta_vs;  // burns along the minimum delta-v route
};

struct DesignMasses {
  std::string vehicle;
  double m_p = 0.0;
  double m_f = 0.0;
  double m_d = 0.0;
};

struct DemandCheck {
  std::string commodity;
  std::string node;
  int time = 0;
  double required = 0.0;   // magnitude of the declared demand
  double delivered = 0.0;  // net inflow in the solution
};

// Post-solve checks recomputed from the solution values.
struct SolutionAudit {
  double max_product_error = 0.0;         // |z - m y| over all linearized products
  double max_flow_without_vehicle = 0.0;  // cargo on arcs whose vehicle is not flown
  double max_balance_violation = 0.0;     // conservation excess at any node and day
  std::size_t unexpected_slack = 0;       // surplus at nodes without a declared supply
  std::vector<DemandCheck> demands;
};

struct RunReport {
  std::string scenario;
  SurrogateKind surrogate = SurrogateKind::Neural;
  std::optional<std::uint64_t> seed;  // training seed; absent for regression
  double test_r2 = kNaN;
  SolveStatus status = SolveStatus::Infeasible;
  double objective = kNaN;
  std::size_t nodes = 0;
  double seconds = 0.0;
  std::optional<OracleComparison> oracle;
  std::optional<double> gap_pct;
  std::vector<FlowRecord> flows;
  std::vector<DesignMasses> design;
  std::size_t binaries = 0;
  std::optional<SolutionAudit> audit;
};

inline SolutionAudit audit_solution(const AssembledModel& am, const Solution& sol) {
  SolutionAudit a;
  const auto big_m = audit_big_m(am, sol);
  a.max_product_error = big_m.max_product_error;
  a.max_flow_without_vehicle = big_m.max_flow_without_vehicle;
  const auto balance = audit_mass_balance(am, sol);
  a.max_balance_violation = balance.max_violation;
  a.unexpected_slack = balance.unexpected_slack.size();
  for (const auto& d : am.scenario.demands)
    if (d.amount < 0 && am.scenario.commodity_index(d.commodity))
      a.demands.push_back({d.commodity, d.node, d.time, -d.amount, balance.delivered(d.node, d.time, d.commodity)});
  return a;
}

inline double gap_percent(double milp, double oracle) { return std::abs(milp - oracle) / oracle * 100.0; }

namespace detail {

// Held-out R^2 uses its own stream so it never overlaps the training draws.
inline std::uint64_t held_out_seed(std::uint64_t seed) { return seed ^ 0x9e3779b97f4a7c15ULL; }

// Minimum delta-v route between two nodes of the static network. Launch arcs
// burn nothing in the model, so they count as zero.
inline std::optional<std::vector<double>> min_delta_v_route(const Scenario& s, std::size_t from, std::size_t to) {
  const std::size_t n = s.nodes.size();
  std::vector<double> dist(n, kInf);
  std::vector<std::optional<std::size_t>> via(n);  // arc family used to enter
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[from] = 0.0;
  pq.emplace(0.0, from);
  while (!pq.empty()) {
    const auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    for (std::size_t f = 0; f < s.arcs.size(); ++f) {
      const auto& arc = s.arcs[f];
      if (*s.node_index(arc.from) != u) continue;
      const auto v = *s.node_index(arc.to);
      const double w = arc.is_launch ? 0.0 : arc.delta_v_mps;
      if (d + w < dist[v]) {
        dist[v] = d + w;
        via[v] = f;
        pq.emplace(dist[v], v);
      }
    }
  }
  if (std::isinf(dist[to])) return std::nullopt;
  std::vector<double> burns;
  for (std::size_t v = to; v != from;) {
    const auto& arc = s.arcs[*via[v]];
    if (!arc.is_launch && arc.delta_v_mps > 0) burns.push_back(arc.delta_v_mps);
    v = *s.node_index(arc.from);
  }
  std::reverse(burns.begin(), burns.end());
  if (burns.empty()) burns.push_back(0.0);
  return burns;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

inline nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

}  // namespace detail

// The exact design applies to one vehicle carrying one delivered commodity
// from its supply node; anything else gets no comparison.
inline std::optional<OracleComparison> oracle_for(const Scenario& s) {
  if (s.vehicles.size() != 1) return std::nullopt;
  const auto& vehicle = s.vehicles[0];
  const DemandEntry* sink = nullptr;
  const DemandEntry* source = nullptr;
  for (const auto& d : s.demands) {
    if (d.commodity == vehicle.id) {
      if (d.amount > 0) source = &d;
      continue;
    }
    if (d.amount < 0) {
      if (sink) return std::nullopt;
      sink = &d;
    }
  }
  if (!sink || !source) return std::nullopt;
  auto burns = detail::min_delta_v_route(s, *s.node_index(source->node), *s.node_index(sink->node));
  if (!burns) return std::nullopt;
  const auto r = solve_exact_oracle(sizing_params(vehicle), -sink->amount, *burns);
  return OracleComparison{r.imleo, r.m_d, r.m_p, r.m_f, std::move(*burns)};
}

struct FittedSurrogate {
  SizingClosure closure;
  std::optional<std::uint64_t> seed;
  double test_r2 = kNaN;
};

inline FittedSurrogate fit_surrogate(const Scenario& s, const PipelineOptions& opt) {
  if (s.vehicles.empty()) throw DomainError("scenario declares no vehicle to size");
  // Every vehicle shares one surrogate, fitted to the first vehicle's sizing relation.
  const SizingParams p = sizing_params(s.vehicles[0]);
  const auto& r = opt.train_range;
  auto target = [&p](double m_f) { return surrogate_target(p, m_f); };

  if (opt.surrogate == SurrogateKind::Regression) {
    if (opt.model) throw DomainError("--model loads a ReLU network; it cannot be combined with linreg");
    const auto fit = fit_linear_regression(generate_dataset(p, r.lo, r.hi, r.step));
    const double r2 = held_out_r2([&fit](double x) { return fit.predict(x); }, target, r.lo, r.hi,
                                  opt.held_out_points, detail::held_out_seed(0));
    return FittedSurrogate{RegressionSizing{fit}, std::nullopt, r2};
  }

  ReluNetwork net;
  if (opt.model) {
    net = load_relu_network(*opt.model);
  } else {
    TrainConfig cfg;
    cfg.seed = opt.seed;
    cfg.clamp_output = opt.clamp_output;
    net = train_relu_network(generate_dataset(p, r.lo, r.hi, r.step), cfg);
  }
  if (std::isnan(net.test_r2)) {
    const double lo = net.input_box.empty() ? r.lo : net.input_box[0].lo;
    const double hi = net.input_box.empty() ? r.hi : net.input_box[0].hi;
    net.test_r2 = held_out_r2(net, target, lo, hi, opt.held_out_points, detail::held_out_seed(net.seed));
  }
  if (opt.save_model) save_relu_network(net, *opt.save_model);
  const auto seed = net.seed;
  const double r2 = net.test_r2;
  return FittedSurrogate{NeuralSizing{std::move(net)}, seed, r2};
}

inline RunReport run_pipeline(const Scenario& s, const PipelineOptions& opt) {
  RunReport rep;
  rep.scenario = s.name;
  rep.surrogate = opt.surrogate;

  auto fitted = fit_surrogate(s, opt);
  rep.seed = fitted.seed;
  rep.test_r2 = fitted.test_r2;

  const auto am = assemble_model(s, fitted.closure);
  if (opt.export_mps) export_mps(am.model, *opt.export_mps);
  for (const auto& d : am.design) rep.binaries += d.embedding.binaries.size();

  BnbConfig cfg;
  cfg.time_limit_s = opt.time_limit_s;
  const auto sol = solve_milp(am.model, cfg);
  rep.status = sol.status;
  rep.nodes = sol.stats.nodes;
  rep.seconds = sol.stats.seconds;
  if (sol.has_values()) {
    rep.objective = sol.objective;
    rep.flows = extract_flows(am, sol);
    rep.audit = audit_solution(am, sol);
    for (std::size_t v = 0; v < am.design.size(); ++v)
      rep.design.push_back(DesignMasses{s.vehicles[v].id, sol[am.design[v].m_p], sol[am.design[v].m_f],
                                        sol[am.design[v].m_d]});
  }

  rep.oracle = oracle_for(s);
  if (rep.oracle && std::isfinite(rep.objective)) rep.gap_pct = gap_percent(rep.objective, rep.oracle->imleo);
  return rep;
}

inline RunReport run_pipeline(const PipelineOptions& opt) { return run_pipeline(load_scenario_file(opt.scenario), opt); }

// ---------------------------------------------------------------------------
// Seed study

struct TrialResult {
  std::uint64_t seed = 0;
  std::optional<RunReport> report;  // empty when the trial failed
  std::string error;
  bool excluded = false;  // held-out R^2 below the threshold
};

struct SeedStudySummary {
  std::vector<TrialResult> trials;  // sorted by seed
  std::size_t failures = 0;
  std::size_t exclusions = 0;
  double min_r2 = 0.98;
  std::vector<double> gaps;  // successful, non-excluded trials
  double mean_gap = kNaN;
  double median_gap = kNaN;
  double mean_gap_all = kNaN;  // including excluded trials
  double median_gap_all = kNaN;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline SeedStudySummary summarize(std::vector<TrialResult> trials, double min_r2) {
  std::sort(trials.begin(), trials.end(), [](const auto& a, const auto& b) { return a.seed < b.seed; });
  SeedStudySummary sum;
  sum.min_r2 = min_r2;
  std::vector<double> all;
  for (auto& t : trials) {
    const bool ok = t.report && t.report->status == SolveStatus::Optimal && t.report->gap_pct;
    if (!ok) {
      ++sum.failures;
      continue;
    }
    all.push_back(*t.report->gap_pct);
    t.excluded = !(t.report->test_r2 >= min_r2);
    if (t.excluded) ++sum.exclusions;
    else sum.gaps.push_back(*t.report->gap_pct);
  }
  sum.trials = std::move(trials);
  sum.mean_gap = mean(sum.gaps);
  sum.median_gap = median(sum.gaps);
  sum.mean_gap_all = mean(all);
  sum.median_gap_all = median(all);
  return sum;
}

// Trials use seeds base .. base + n - 1 and run on up to `jobs` threads.
inline SeedStudySummary run_seed_study(const Scenario& s, PipelineOptions opt, std::size_t n, std::size_t jobs = 1,
                                       double min_r2 = 0.98) {
  if (n < 1) throw DomainError("seed study needs at least one trial");
  opt.surrogate = SurrogateKind::Neural;
  opt.model.reset();
  opt.save_model.reset();
  opt.export_mps.reset();
  const std::uint64_t base = opt.seed;

  std::vector<TrialResult> trials(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < n;) {
      PipelineOptions o = opt;
      o.seed = base + k;
      trials[k].seed = o.seed;
      try {
        trials[k].report = run_pipeline(s, o);
      } catch (const Error& e) {
        trials[k].error = e.what();
      }
    }
  };
  jobs = std::clamp<std::size_t>(jobs, 1, n);
  std::vector<std::jthread> pool;
  for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  pool.clear();
  return summarize(std::move(trials), min_r2);
}

// ---------------------------------------------------------------------------
// Reports

inline nlohmann::json to_json(const RunReport& r) {
  using nlohmann::json;
  json j;
  j["scenario"] = r.scenario;
  j["surrogate"] = {{"kind", to_string(r.surrogate)},
                    {"seed", r.seed ? json(*r.seed) : json()},
                    {"test_r2", detail::number_or_null(r.test_r2)}};
  j["milp"] = {{"objective_kg", detail::number_or_null(r.objective)},
               {"status", to_string(r.status)},
               {"nodes", r.nodes},
               {"seconds", r.seconds},
               {"binaries", r.binaries}};
  if (r.oracle)
    j["oracle"] = {{"imleo_kg", r.oracle->imleo}, {"m_d", r.oracle->m_d}, {"m_p", r.oracle->m_p}, {"m_f", r.oracle->m_f}};
  else
    j["oracle"] = nullptr;
  j["gap_pct"] = r.gap_pct ? json(*r.gap_pct) : json();
  if (r.audit) {
    json demands = json::array();
    for (const auto& d : r.audit->demands)
      demands.push_back({{"commodity", d.commodity},
                         {"node", d.node},
                         {"time", d.time},
                         {"required_kg", d.required},
                         {"delivered_kg", d.delivered}});
    j["audit"] = {{"max_product_error", r.audit->max_product_error},
                  {"max_flow_without_vehicle", r.audit->max_flow_without_vehicle},
                  {"max_balance_violation", r.audit->max_balance_violation},
                  {"unexpected_slack", r.audit->unexpected_slack},
                  {"demands", demands}};
  } else {
    j["audit"] = nullptr;
  }
  j["design"] = json::array();
  for (const auto& d : r.design) j["design"].push_back({{"vehicle", d.vehicle}, {"m_p", d.m_p}, {"m_f", d.m_f}, {"m_d", d.m_d}});
  j["flows"] = json::array();
  for (const auto& f : r.flows)
    j["flows"].push_back({{"vehicle", f.vehicle},
                          {"from", f.from},
                          {"to", f.to},
                          {"depart", f.depart},
                          {"commodity", f.commodity},
                          {"amount_kg", f.amount_kg}});
  return j;
}

inline void write_json_report(const RunReport& r, std::ostream& out) {
  auto j = to_json(r);
  j["generated_at"] = detail::utc_timestamp();
  out << j.dump(2) << '\n';
}

namespace detail {

inline std::string fixed(double v, int digits = 3) {
  if (!std::isfinite(v)) return "n/a";
  std::ostringstream o;
  o << std::fixed << std::setprecision(digits) << v;
  return o.str();
}

inline void csv_row(std::ostream& out, std::uint64_t seed, const std::optional<RunReport>& r) {
  out << seed << ',';
  if (!r) {
    out << ",,,failed\n";
    return;
  }
  auto num = [](double v) { return std::isfinite(v) ? fixed(v, 6) : std::string(); };
  out << num(r->test_r2) << ',' << num(r->objective) << ',' << (r->gap_pct ? num(*r->gap_pct) : "") << ','
      << to_string(r->status) << '\n';
}

}  // namespace detail

inline constexpr std::string_view kCsvHeader = "seed,test_r2,objective_kg,gap_pct,status";

inline void write_csv_report(const RunReport& r, std::ostream& out) {
  out << kCsvHeader << '\n';
  detail::csv_row(out, r.seed.value_or(0), r);
}

inline void write_text_report(const RunReport& r, std::ostream& out) {
  using detail::fixed;
  out << "scenario        " << r.scenario << '\n';
  out << "surrogate       " << to_string(r.surrogate);
  if (r.seed) out << " (seed " << *r.seed << ')';
  out << ", held-out R^2 " << fixed(r.test_r2, 4) << '\n';
  out << "status          " << to_string(r.status) << ", " << r.nodes << " nodes, " << r.binaries
      << " ReLU binaries, " << fixed(r.seconds, 2) << " s\n";
  out << "objective       " << fixed(r.objective) << " kg\n";
  for (const auto& d : r.design)
    out << "design " << d.vehicle << "  m_p " << fixed(d.m_p) << "  m_f " << fixed(d.m_f) << "  m_d " << fixed(d.m_d)
        << '\n';
  if (r.oracle) {
    out << "exact design    IMLEO " << fixed(r.oracle->imleo) << "  m_p " << fixed(r.oracle->m_p) << "  m_f "
        << fixed(r.oracle->m_f) << "  m_d " << fixed(r.oracle->m_d) << '\n';
    if (r.gap_pct) out << "gap             " << fixed(*r.gap_pct, 3) << " %\n";
  } else {
    out << "exact design    not applicable\n";
  }
  if (r.audit) {
    out << "audit           product error " << r.audit->max_product_error << ", cargo without vehicle "
        << r.audit->max_flow_without_vehicle << ", balance violation " << r.audit->max_balance_violation
        << ", unexpected slack " << r.audit->unexpected_slack << '\n';
    for (const auto& d : r.audit->demands)
      out << "delivered       " << d.commodity << " at " << d.node << " t=" << d.time << ": " << fixed(d.delivered)
          << " of " << fixed(d.required) << " kg\n";
  }
  if (!r.flows.empty()) {
    out << "flows\n";
    for (const auto& f : r.flows)
      out << "  " << std::left << std::setw(6) << f.vehicle << std::setw(8) << f.from << "-> " << std::setw(8) << f.to
          << "t=" << std::setw(3) << f.depart << std::setw(12) << f.commodity << std::right << std::setw(12)
          << fixed(f.amount_kg) << " kg\n";
  }
}

inline void write_csv_report(const SeedStudySummary& s, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const auto& t : s.trials) detail::csv_row(out, t.seed, t.report);
}

inline nlohmann::json to_json(const SeedStudySummary& s) {
  using nlohmann::json;
  json trials = json::array();
  for (const auto& t : s.trials) {
    json row = t.report ? to_json(*t.report) : json{{"error", t.error}};
    row["seed"] = t.seed;
    row["excluded"] = t.excluded;
    trials.push_back(std::move(row));
  }
  return {{"trials", trials},
          {"summary",
           {{"trials", s.trials.size()},
            {"failures", s.failures},
            {"exclusions", s.exclusions},
            {"min_test_r2", s.min_r2},
            {"mean_gap_pct", detail::number_or_null(s.mean_gap)},
            {"median_gap_pct", detail::number_or_null(s.median_gap)},
            {"mean_gap_pct_all", detail::number_or_null(s.mean_gap_all)},
            {"median_gap_pct_all", detail::number_or_null(s.median_gap_all)}}}};
}

inline void write_json_report(const SeedStudySummary& s, std::ostream& out) {
  auto j = to_json(s);
  j["generated_at"] = detail::utc_timestamp();
  out << j.dump(2) << '\n';
}

inline void write_text_report(const SeedStudySummary& s, std::ostream& out) {
  using detail::fixed;
  out << "seed   R^2      objective_kg   gap_%    status\n";
  for (const auto& t : s.trials) {
    out << std::left << std::setw(7) << t.seed << std::right;
    if (!t.report) {
      out << "failed: " << t.error << '\n';
      continue;
    }
    const auto& r = *t.report;
    out << std::setw(7) << fixed(r.test_r2, 4) << std::setw(15) << fixed(r.objective) << std::setw(9)
        << (r.gap_pct ? fixed(*r.gap_pct) : "n/a") << "    " << to_string(r.status) << (t.excluded ? " (excluded)" : "")
        << '\n';
  }
  out << "trials " << s.trials.size() << ", failures " << s.failures << ", excluded (R^2 < " << s.min_r2 << ") "
      << s.exclusions << '\n';
  out << "gap mean " << fixed(s.mean_gap) << " %, median " << fixed(s.median_gap) << " %\n";
  out << "gap over all solved trials: mean " << fixed(s.mean_gap_all) << " %, median " << fixed(s.median_gap_all)
      << " %\n";
}

}  // namespace spacelog

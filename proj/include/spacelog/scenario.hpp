#pragma once

// Campaign scenarios: nodes, arc families, commodities, vehicles, and
// demand/supply entries, loaded from a JSON document and expanded into a
// time-expanded network of transport, launch, and holdover arcs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "spacelog/common.hpp"
#include "spacelog/error.hpp"

namespace spacelog {

inline constexpr std::string_view kPayload = "payload";
inline constexpr std::string_view kPropellant = "propellant";

enum class NodeKind { BodySurface, Orbit };
enum class CommodityDomain { Continuous, Discrete };

struct Node {
  std::string id;
  NodeKind kind = NodeKind::Orbit;
  bool operator==(const Node&) const = default;
};

// One arc family of the static network. `window` lists the allowed departure
// days; a document that omits it gets every day of the horizon.
struct Arc {
  std::string from;
  std::string to;
  double delta_v_mps = 0.0;
  int tof_days = 0;
  std::vector<int> window;
  bool is_launch = false;
  bool operator==(const Arc&) const = default;
};

struct Commodity {
  std::string id;
  CommodityDomain domain = CommodityDomain::Continuous;
  bool operator==(const Commodity&) const = default;
};

struct Range {
  double lo = 0.0;
  double hi = kInf;
  bool operator==(const Range&) const = default;
};

struct VehicleSpec {
  std::string id;
  double isp_s = 0.0;
  double burn_time_s = 0.0;
  double alpha = 0.0;
  double m_ub_kg = 0.0;
  Range payload_capacity{0.0, 50000.0};
  Range propellant_capacity{0.0, 50000.0};
  bool operator==(const VehicleSpec&) const = default;
};

// Positive amounts are supplies, negative amounts demands. An unbounded
// supply is stored as +infinity and never turned into a finite number.
// `commodity` names either a commodity or a vehicle (vehicle count supply).
struct DemandEntry {
  std::string commodity;
  std::string node;
  int time = 0;
  double amount = 0.0;
  bool unbounded() const { return std::isinf(amount) && amount > 0; }
  bool operator==(const DemandEntry&) const = default;
};

struct ArcCost {
  std::string from;
  std::string to;
  double commodity_cost = 0.0;
  double structure_cost = 0.0;
  bool operator==(const ArcCost&) const = default;
};

// Empty `arc_costs` means "minimize initial mass after launch": unit cost on
// every commodity and on the vehicle structure carried by launch arcs.
struct ObjectiveSpec {
  std::vector<ArcCost> arc_costs;
  bool operator==(const ObjectiveSpec&) const = default;
};

struct Scenario {
  std::string name;
  int horizon_days = 1;
  std::vector<Node> nodes;
  std::vector<Arc> arcs;
  std::vector<Commodity> commodities;
  std::vector<VehicleSpec> vehicles;
  std::vector<DemandEntry> demands;
  ObjectiveSpec objective;

  bool operator==(const Scenario&) const = default;

  std::optional<std::size_t> node_index(std::string_view id) const {
    return find_id(nodes, id);
  }
  std::optional<std::size_t> commodity_index(std::string_view id) const {
    return find_id(commodities, id);
  }
  std::optional<std::size_t> vehicle_index(std::string_view id) const {
    return find_id(vehicles, id);
  }

  // Cost weights for one arc family; falls back to the launch-mass default.
  ArcCost cost_for(const Arc& arc) const {
    if (objective.arc_costs.empty()) {
      const double w = arc.is_launch ? 1.0 : 0.0;
      return ArcCost{arc.from, arc.to, w, w};
    }
    for (const auto& c : objective.arc_costs)
      if (c.from == arc.from && c.to == arc.to) return c;
    return ArcCost{arc.from, arc.to, 0.0, 0.0};
  }

 private:
  template <typename T>
  static std::optional<std::size_t> find_id(const std::vector<T>& items, std::string_view id) {
    for (std::size_t i = 0; i < items.size(); ++i)
      if (items[i].id == id) return i;
    return std::nullopt;
  }
};

namespace detail {

using nlohmann::json;

inline std::string field_path(const std::string& base, std::string_view key) {
  return base.empty() ? std::string(key) : base + "." + std::string(key);
}

inline std::string index_path(std::string_view base, std::size_t i) {
  return std::string(base) + "[" + std::to_string(i) + "]";
}

inline const json& require(const json& obj, const std::string& base, std::string_view key) {
  if (!obj.is_object()) throw ParseError(base, "expected an object");
  auto it = obj.find(std::string(key));
  if (it == obj.end()) throw ParseError(field_path(base, key), "missing required field");
  return *it;
}

inline double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ParseError(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ParseError(path, "expected a finite number");
  return d;
}

inline int as_whole(const json& v, const std::string& path) {
  const double d = as_number(v, path);
  if (std::floor(d) != d) throw DomainError(path + ": fractional value " + v.dump() + " (whole days required)");
  return static_cast<int>(d);
}

inline std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw ParseError(path, "expected a string");
  return v.get<std::string>();
}

inline bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) throw ParseError(path, "expected a boolean");
  return v.get<bool>();
}

inline const json& array_field(const json& obj, std::string_view key, const json& empty) {
  auto it = obj.find(std::string(key));
  if (it == obj.end() || it->is_null()) return empty;
  if (!it->is_array()) throw ParseError(std::string(key), "expected an array");
  return *it;
}

inline std::size_t line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + byte, '\n'));
}

inline void validate(Scenario& s) {
  if (s.horizon_days < 1) throw DomainError("horizon_days: must be >= 1");
  const int last = s.horizon_days - 1;

  auto check_unique = [](const auto& items, std::string_view what) {
    for (std::size_t i = 0; i < items.size(); ++i)
      for (std::size_t j = i + 1; j < items.size(); ++j)
        if (items[i].id == items[j].id)
          throw DomainError("duplicate " + std::string(what) + " id '" + items[i].id + "'");
  };
  check_unique(s.nodes, "node");

  // Built-in continuous commodities are always present.
  for (std::string_view builtin : {kPayload, kPropellant}) {
    if (auto i = s.commodity_index(builtin)) {
      if (s.commodities[*i].domain != CommodityDomain::Continuous)
        throw DomainError("commodity '" + std::string(builtin) + "' must be continuous");
    } else {
      s.commodities.push_back(Commodity{std::string(builtin), CommodityDomain::Continuous});
    }
  }
  check_unique(s.commodities, "commodity");
  check_unique(s.vehicles, "vehicle");
  for (const auto& v : s.vehicles)
    if (s.commodity_index(v.id))
      throw DomainError("vehicle id '" + v.id + "' collides with a commodity id");

  for (std::size_t a = 0; a < s.arcs.size(); ++a) {
    auto& arc = s.arcs[a];
    const auto path = index_path("arcs", a);
    if (!s.node_index(arc.from))
      throw ReferenceError(arc.from, path + ".from: unknown node '" + arc.from + "'");
    if (!s.node_index(arc.to))
      throw ReferenceError(arc.to, path + ".to: unknown node '" + arc.to + "'");
    if (arc.delta_v_mps < 0) throw DomainError(path + ".delta_v_mps: negative delta-v");
    if (arc.tof_days < 0) throw DomainError(path + ".tof_days: negative time of flight");
    for (int t : arc.window)
      if (t < 0 || t > last)
        throw DomainError(path + ".window: day " + std::to_string(t) + " outside horizon");
    std::sort(arc.window.begin(), arc.window.end());
    arc.window.erase(std::unique(arc.window.begin(), arc.window.end()), arc.window.end());
  }

  for (std::size_t i = 0; i < s.vehicles.size(); ++i) {
    const auto& v = s.vehicles[i];
    const auto path = index_path("vehicles", i);
    if (!(v.isp_s > 0)) throw DomainError(path + ".isp_s: must be > 0");
    if (!(v.burn_time_s > 0)) throw DomainError(path + ".burn_time_s: must be > 0");
    if (!(v.alpha > 0 && v.alpha < 1)) throw DomainError(path + ".alpha: must lie in (0, 1)");
    if (!(v.m_ub_kg > 0)) throw DomainError(path + ".m_ub_kg: must be > 0");
    for (const Range* r : {&v.payload_capacity, &v.propellant_capacity})
      if (r->lo < 0 || r->lo > r->hi) throw DomainError(path + ": invalid design bounds");
  }

  for (std::size_t i = 0; i < s.demands.size(); ++i) {
    const auto& d = s.demands[i];
    const auto path = index_path("demands", i);
    if (!s.commodity_index(d.commodity) && !s.vehicle_index(d.commodity))
      throw ReferenceError(d.commodity, path + ".commodity: unknown commodity or vehicle '" + d.commodity + "'");
    if (!s.node_index(d.node))
      throw ReferenceError(d.node, path + ".node: unknown node '" + d.node + "'");
    if (d.time < 0 || d.time > last)
      throw DomainError(path + ".time: day " + std::to_string(d.time) + " outside horizon");
    if (std::isinf(d.amount) && d.amount < 0)
      throw DomainError(path + ".amount: unbounded demand is not allowed");
  }

  for (std::size_t i = 0; i < s.objective.arc_costs.size(); ++i) {
    const auto& c = s.objective.arc_costs[i];
    const bool found = std::any_of(s.arcs.begin(), s.arcs.end(),
                                   [&](const Arc& a) { return a.from == c.from && a.to == c.to; });
    if (!found)
      throw ReferenceError(c.from + "->" + c.to,
                           "objective.arc_costs[" + std::to_string(i) + "]: no arc " + c.from + "->" + c.to);
    if (!std::isfinite(c.commodity_cost) || !std::isfinite(c.structure_cost))
      throw DomainError("objective.arc_costs[" + std::to_string(i) + "]: costs must be finite");
  }
}

inline Range parse_range(const json& obj, std::string_view key, Range fallback, const std::string& base) {
  auto it = obj.find(std::string(key));
  if (it == obj.end() || it->is_null()) return fallback;
  const auto path = field_path(base, key);
  if (it->is_number()) return Range{0.0, as_number(*it, path)};
  if (!it->is_array() || it->size() != 2) throw ParseError(path, "expected [lo, hi] or a number");
  return Range{as_number((*it)[0], path + "[0]"), as_number((*it)[1], path + "[1]")};
}

}  // namespace detail

// Parses and validates a scenario document. Throws ParseError (with line or
// field path), ReferenceError (naming the dangling id), or DomainError.
inline Scenario load_scenario(std::string_view text) {
  using detail::json;
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError("line " + std::to_string(detail::line_of(text, e.byte)), e.what());
  }
  if (!doc.is_object()) throw ParseError("", "scenario document must be a JSON object");

  Scenario s;
  if (auto it = doc.find("name"); it != doc.end()) s.name = detail::as_string(*it, "name");
  s.horizon_days = detail::as_whole(detail::require(doc, "", "horizon_days"), "horizon_days");
  if (s.horizon_days < 1) throw DomainError("horizon_days: must be >= 1");

  const json empty = json::array();
  const auto& nodes = detail::array_field(doc, "nodes", empty);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto base = detail::index_path("nodes", i);
    Node n;
    n.id = detail::as_string(detail::require(nodes[i], base, "id"), base + ".id");
    std::string kind = "orbit";
    if (auto it = nodes[i].find("kind"); it != nodes[i].end()) kind = detail::as_string(*it, base + ".kind");
    if (kind == "orbit") n.kind = NodeKind::Orbit;
    else if (kind == "body-surface") n.kind = NodeKind::BodySurface;
    else throw ParseError(base + ".kind", "expected 'orbit' or 'body-surface'");
    s.nodes.push_back(std::move(n));
  }

  const auto& arcs = detail::array_field(doc, "arcs", empty);
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    const auto base = detail::index_path("arcs", i);
    const auto& a = arcs[i];
    Arc arc;
    arc.from = detail::as_string(detail::require(a, base, "from"), base + ".from");
    arc.to = detail::as_string(detail::require(a, base, "to"), base + ".to");
    arc.delta_v_mps = detail::as_number(detail::require(a, base, "delta_v_mps"), base + ".delta_v_mps");
    arc.tof_days = detail::as_whole(detail::require(a, base, "tof_days"), base + ".tof_days");
    if (auto it = a.find("is_launch"); it != a.end()) arc.is_launch = detail::as_bool(*it, base + ".is_launch");
    if (auto it = a.find("window"); it != a.end() && !it->is_null()) {
      if (!it->is_array()) throw ParseError(base + ".window", "expected an array of days");
      for (std::size_t k = 0; k < it->size(); ++k)
        arc.window.push_back(detail::as_whole((*it)[k], detail::index_path(base + ".window", k)));
    } else {
      for (int t = 0; t < s.horizon_days; ++t) arc.window.push_back(t);
    }
    s.arcs.push_back(std::move(arc));
  }

  const auto& commodities = detail::array_field(doc, "commodities", empty);
  for (std::size_t i = 0; i < commodities.size(); ++i) {
    const auto base = detail::index_path("commodities", i);
    Commodity c;
    if (commodities[i].is_string()) {
      c.id = commodities[i].get<std::string>();
    } else {
      c.id = detail::as_string(detail::require(commodities[i], base, "id"), base + ".id");
      if (auto it = commodities[i].find("domain"); it != commodities[i].end()) {
        const auto d = detail::as_string(*it, base + ".domain");
        if (d == "continuous") c.domain = CommodityDomain::Continuous;
        else if (d == "discrete") c.domain = CommodityDomain::Discrete;
        else throw ParseError(base + ".domain", "expected 'continuous' or 'discrete'");
      }
    }
    s.commodities.push_back(std::move(c));
  }

  const auto& vehicles = detail::array_field(doc, "vehicles", empty);
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    const auto base = detail::index_path("vehicles", i);
    const auto& v = vehicles[i];
    VehicleSpec spec;
    spec.id = detail::as_string(detail::require(v, base, "id"), base + ".id");
    spec.isp_s = detail::as_number(detail::require(v, base, "isp_s"), base + ".isp_s");
    spec.burn_time_s = detail::as_number(detail::require(v, base, "burn_time_s"), base + ".burn_time_s");
    spec.alpha = detail::as_number(detail::require(v, base, "alpha"), base + ".alpha");
    spec.m_ub_kg = detail::as_number(detail::require(v, base, "m_ub_kg"), base + ".m_ub_kg");
    spec.payload_capacity = detail::parse_range(v, "payload_capacity_kg", spec.payload_capacity, base);
    spec.propellant_capacity = detail::parse_range(v, "propellant_capacity_kg", spec.propellant_capacity, base);
    s.vehicles.push_back(std::move(spec));
  }

  const auto& demands = detail::array_field(doc, "demands", empty);
  for (std::size_t i = 0; i < demands.size(); ++i) {
    const auto base = detail::index_path("demands", i);
    const auto& d = demands[i];
    DemandEntry e;
    e.commodity = detail::as_string(detail::require(d, base, "commodity"), base + ".commodity");
    e.node = detail::as_string(detail::require(d, base, "node"), base + ".node");
    e.time = detail::as_whole(detail::require(d, base, "time"), base + ".time");
    const auto& amount = detail::require(d, base, "amount");
    if (amount.is_string()) {
      if (amount.get<std::string>() != "inf") throw ParseError(base + ".amount", "expected a number or \"inf\"");
      e.amount = kInf;
    } else {
      e.amount = detail::as_number(amount, base + ".amount");
    }
    s.demands.push_back(std::move(e));
  }

  if (auto it = doc.find("objective"); it != doc.end() && !it->is_null()) {
    const auto& costs = detail::array_field(*it, "arc_costs", empty);
    for (std::size_t i = 0; i < costs.size(); ++i) {
      const auto base = detail::index_path("objective.arc_costs", i);
      ArcCost c;
      c.from = detail::as_string(detail::require(costs[i], base, "from"), base + ".from");
      c.to = detail::as_string(detail::require(costs[i], base, "to"), base + ".to");
      if (auto f = costs[i].find("commodity_cost"); f != costs[i].end())
        c.commodity_cost = detail::as_number(*f, base + ".commodity_cost");
      if (auto f = costs[i].find("structure_cost"); f != costs[i].end())
        c.structure_cost = detail::as_number(*f, base + ".structure_cost");
      s.objective.arc_costs.push_back(std::move(c));
    }
  }

  detail::validate(s);
  return s;
}

inline Scenario load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("scenario not found: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return load_scenario(buf.str());
}

inline std::string dump_scenario(const Scenario& s) {
  using detail::json;
  json doc;
  doc["name"] = s.name;
  doc["horizon_days"] = s.horizon_days;
  doc["nodes"] = json::array();
  for (const auto& n : s.nodes)
    doc["nodes"].push_back({{"id", n.id}, {"kind", n.kind == NodeKind::Orbit ? "orbit" : "body-surface"}});
  doc["arcs"] = json::array();
  for (const auto& a : s.arcs)
    doc["arcs"].push_back({{"from", a.from},
                           {"to", a.to},
                           {"delta_v_mps", a.delta_v_mps},
                           {"tof_days", a.tof_days},
                           {"window", a.window},
                           {"is_launch", a.is_launch}});
  doc["commodities"] = json::array();
  for (const auto& c : s.commodities)
    doc["commodities"].push_back(
        {{"id", c.id}, {"domain", c.domain == CommodityDomain::Continuous ? "continuous" : "discrete"}});
  doc["vehicles"] = json::array();
  for (const auto& v : s.vehicles)
    doc["vehicles"].push_back({{"id", v.id},
                               {"isp_s", v.isp_s},
                               {"burn_time_s", v.burn_time_s},
                               {"alpha", v.alpha},
                               {"m_ub_kg", v.m_ub_kg},
                               {"payload_capacity_kg", {v.payload_capacity.lo, v.payload_capacity.hi}},
                               {"propellant_capacity_kg", {v.propellant_capacity.lo, v.propellant_capacity.hi}}});
  doc["demands"] = json::array();
  for (const auto& d : s.demands) {
    json amount = d.unbounded() ? json("inf") : json(d.amount);
    doc["demands"].push_back({{"commodity", d.commodity}, {"node", d.node}, {"time", d.time}, {"amount", amount}});
  }
  json costs = json::array();
  for (const auto& c : s.objective.arc_costs)
    costs.push_back({{"from", c.from},
                     {"to", c.to},
                     {"commodity_cost", c.commodity_cost},
                     {"structure_cost", c.structure_cost}});
  doc["objective"] = {{"arc_costs", costs}};
  return doc.dump(2);
}

// ---------------------------------------------------------------------------
// Time expansion

enum class ArcKind { Transport, Launch, Holdover };

inline std::string_view to_string(ArcKind k) {
  switch (k) {
    case ArcKind::Transport: return "transport";
    case ArcKind::Launch: return "launch";
    case ArcKind::Holdover: return "holdover";
  }
  return "?";
}

// Holdover arcs are shared by all vehicles (`vehicle` empty); transport and
// launch arcs exist once per vehicle.
struct ExpandedArc {
  std::optional<std::size_t> vehicle;
  std::size_t from = 0;  // node index
  std::size_t to = 0;
  int depart = 0;
  int arrive = 0;
  ArcKind kind = ArcKind::Holdover;
  std::optional<std::size_t> family;  // index into Scenario::arcs
  double delta_v_mps = 0.0;
};

struct TimeExpandedNetwork {
  int horizon = 0;
  std::vector<ExpandedArc> arcs;
  // Departures inside the horizon that the window forbids; the formulation
  // keeps their flow variables and fixes them to zero.
  std::vector<ExpandedArc> closed_arcs;
  // Window departures dropped because the arrival falls past the horizon.
  std::size_t excluded_beyond_horizon = 0;

  std::size_t count(ArcKind k) const {
    return static_cast<std::size_t>(
        std::count_if(arcs.begin(), arcs.end(), [k](const ExpandedArc& a) { return a.kind == k; }));
  }
};

inline std::string arc_label(const Scenario& s, const ExpandedArc& a) {
  return s.nodes[a.from].id + "-" + s.nodes[a.to].id + "@" + std::to_string(a.depart);
}

inline TimeExpandedNetwork expand_time_network(const Scenario& s) {
  TimeExpandedNetwork net;
  net.horizon = s.horizon_days;
  const int last = s.horizon_days - 1;

  for (std::size_t n = 0; n < s.nodes.size(); ++n)
    for (int t = 0; t < last; ++t)
      net.arcs.push_back(ExpandedArc{std::nullopt, n, n, t, t + 1, ArcKind::Holdover, std::nullopt, 0.0});

  for (std::size_t v = 0; v < s.vehicles.size(); ++v) {
    for (std::size_t f = 0; f < s.arcs.size(); ++f) {
      const Arc& arc = s.arcs[f];
      const auto from = *s.node_index(arc.from);
      const auto to = *s.node_index(arc.to);
      const auto kind = arc.is_launch ? ArcKind::Launch : ArcKind::Transport;
      for (int t = 0; t <= last; ++t) {
        const bool open = std::binary_search(arc.window.begin(), arc.window.end(), t);
        ExpandedArc e{v, from, to, t, t + arc.tof_days, kind, f, arc.delta_v_mps};
        if (e.arrive > last) {
          if (open) ++net.excluded_beyond_horizon;
          continue;
        }
        (open ? net.arcs : net.closed_arcs).push_back(e);
      }
    }
  }
  return net;
}

}  // namespace spacelog

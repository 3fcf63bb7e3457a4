#pragma once

// Fixed-format MPS export plus a small reader used to round-trip exports.
//
// Names are limited to eight characters; long names are truncated and made
// unique with a `~<n>` suffix, and the short->long map is written next to the
// MPS file (`<file>.names`). Numbers are written in shortest round-trip form,
// so a value may run past column 36; entries are one per line so later fields
// never shift.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "spacelog/error.hpp"
#include "spacelog/milp_model.hpp"

namespace spacelog {

namespace detail {

inline std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("number formatting failed");
  return std::string(buf, end);
}

inline std::string to_base36(std::size_t n) {
  static constexpr char digits[] = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ";
  std::string s;
  do {
    s.insert(s.begin(), digits[n % 36]);
    n /= 36;
  } while (n);
  return s;
}

// Truncates to eight printable, space-free characters and resolves
// collisions with a numeric suffix. Names already in `taken` are never produced.
inline std::vector<std::string> short_names(const std::vector<std::string>& names,
                                            std::unordered_set<std::string>& taken) {
  std::vector<std::string> out;
  out.reserve(names.size());
  std::size_t counter = 0;
  for (const auto& raw : names) {
    std::string base;
    for (char ch : raw) base.push_back((ch == ' ' || ch == '\t' || ch == '$') ? '_' : ch);
    if (base.empty()) base = "_";
    std::string candidate = base.substr(0, 8);
    while (taken.count(candidate)) {
      const std::string suffix = "~" + to_base36(counter++);
      candidate = base.substr(0, 8 - suffix.size()) + suffix;
    }
    taken.insert(candidate);
    out.push_back(std::move(candidate));
  }
  return out;
}

inline std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

// Columns 2-3, 5-12, 15-22, 25-...
inline std::string mps_line(const std::string& f1, const std::string& f2, const std::string& f3,
                            const std::string& f4) {
  std::string line = " " + pad(f1, 2) + " " + pad(f2, 8);
  if (!f3.empty() || !f4.empty()) line += "  " + pad(f3, 8);
  if (!f4.empty()) line += "  " + f4;
  while (!line.empty() && line.back() == ' ') line.pop_back();
  return line;
}

}  // namespace detail

struct MpsNames {
  std::vector<std::string> columns;
  std::vector<std::string> rows;
};

inline MpsNames write_mps(const MilpModel& model, std::ostream& out) {
  using detail::format_number;
  using detail::mps_line;
  const auto& vars = model.variables();
  const auto& rows = model.constraints();

  std::unordered_set<std::string> taken{"OBJ", "RHS", "BND", "MARKER"};
  std::vector<std::string> long_rows;
  for (const auto& r : rows) long_rows.push_back(r.tag);
  MpsNames names;
  names.rows = detail::short_names(long_rows, taken);
  std::vector<std::string> long_cols;
  for (const auto& v : vars) long_cols.push_back(v.name);
  std::unordered_set<std::string> col_taken{"OBJ", "RHS", "BND", "MARKER"};
  names.columns = detail::short_names(long_cols, col_taken);

  // Column-major view of the rows.
  std::vector<std::vector<std::pair<std::size_t, double>>> entries(vars.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (const auto& t : rows[i].terms) entries[t.var.index].emplace_back(i, t.coef);
  std::vector<double> obj(vars.size(), 0.0);
  for (const auto& t : model.objective()) obj[t.var.index] += t.coef;

  std::string name = model.name();
  for (char& ch : name)
    if (ch == ' ') ch = '_';
  out << "NAME          " << name << "\n";
  out << "ROWS\n" << mps_line("N", "OBJ", "", "") << "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const char* type = rows[i].sense == Sense::LessEqual ? "L" : rows[i].sense == Sense::GreaterEqual ? "G" : "E";
    out << mps_line(type, names.rows[i], "", "") << "\n";
  }

  out << "COLUMNS\n";
  bool in_int = false;
  std::size_t marker = 0;
  auto emit_marker = [&](const char* kind) {
    out << "    " << detail::pad("M" + std::to_string(marker++), 8) << "  'MARKER'                 '" << kind << "'\n";
  };
  for (std::size_t j = 0; j < vars.size(); ++j) {
    const bool integral = vars[j].is_integral();
    if (integral != in_int) {
      emit_marker(integral ? "INTORG" : "INTEND");
      in_int = integral;
    }
    bool wrote = false;
    if (obj[j] != 0.0) {
      out << mps_line("", names.columns[j], "OBJ", format_number(obj[j])) << "\n";
      wrote = true;
    }
    for (const auto& [row, coef] : entries[j]) {
      out << mps_line("", names.columns[j], names.rows[row], format_number(coef)) << "\n";
      wrote = true;
    }
    if (!wrote) out << mps_line("", names.columns[j], "OBJ", "0") << "\n";
  }
  if (in_int) emit_marker("INTEND");

  out << "RHS\n";
  if (model.objective_offset() != 0.0)
    out << mps_line("", "RHS", "OBJ", format_number(-model.objective_offset())) << "\n";
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].rhs != 0.0) out << mps_line("", "RHS", names.rows[i], format_number(rows[i].rhs)) << "\n";

  out << "BOUNDS\n";
  for (std::size_t j = 0; j < vars.size(); ++j) {
    const auto& v = vars[j];
    const auto& nm = names.columns[j];
    const bool lo_inf = std::isinf(v.lower);
    const bool up_inf = std::isinf(v.upper);
    if (v.lower == v.upper) {
      out << mps_line("FX", "BND", nm, format_number(v.lower)) << "\n";
      continue;
    }
    if (lo_inf && up_inf) {
      out << mps_line("FR", "BND", nm, "") << "\n";
      continue;
    }
    if (lo_inf) out << mps_line("MI", "BND", nm, "") << "\n";
    else if (v.lower != 0.0 || v.is_integral()) out << mps_line("LO", "BND", nm, format_number(v.lower)) << "\n";
    if (!up_inf) out << mps_line("UP", "BND", nm, format_number(v.upper)) << "\n";
    else if (v.is_integral()) out << mps_line("PL", "BND", nm, "") << "\n";
  }
  out << "ENDATA\n";
  return names;
}

// Writes `path` and the name map `path.names`.
inline MpsNames export_mps(const MilpModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  const auto names = write_mps(model, out);
  if (!out) throw IoError("write to '" + path.string() + "' failed");

  auto map_path = path;
  map_path += ".names";
  std::ofstream map(map_path);
  if (!map) throw IoError("cannot open '" + map_path.string() + "' for writing");
  for (std::size_t j = 0; j < names.columns.size(); ++j)
    map << "C " << names.columns[j] << ' ' << model.variables()[j].name << '\n';
  for (std::size_t i = 0; i < names.rows.size(); ++i)
    map << "R " << names.rows[i] << ' ' << model.constraints()[i].tag << '\n';
  return names;
}

// Reads the subset of MPS that write_mps produces (whitespace-separated
// fields; N/L/G/E rows; MARKER integer blocks; LO/UP/FX/FR/MI/PL/BV bounds).
// Variables and rows keep their short names.
inline MilpModel read_mps(std::istream& in) {
  enum class Section { None, Rows, Columns, Rhs, Bounds, Done };
  Section section = Section::None;
  std::string model_name = "model";

  struct RowInfo {
    Sense sense;
    std::vector<Term> terms;
    double rhs = 0.0;
    std::string name;
  };
  std::vector<RowInfo> rows;
  std::unordered_map<std::string, std::size_t> row_index;
  std::string objective_row;
  double objective_offset = 0.0;

  struct ColInfo {
    std::string name;
    bool integer = false;
    double lower = 0.0;
    double upper = std::numeric_limits<double>::infinity();
  };
  std::vector<ColInfo> cols;
  std::unordered_map<std::string, std::size_t> col_index;
  std::vector<std::pair<std::size_t, double>> objective;
  bool in_int = false;

  auto parse_number = [](const std::string& s, std::size_t line) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      throw ParseError("line " + std::to_string(line), "bad number '" + s + "'");
    return v;
  };
  auto column = [&](const std::string& name) -> std::size_t {
    auto it = col_index.find(name);
    if (it != col_index.end()) return it->second;
    cols.push_back(ColInfo{name, in_int});
    col_index.emplace(name, cols.size() - 1);
    return cols.size() - 1;
  };

  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (raw.empty() || raw[0] == '*') continue;
    std::istringstream ls(raw);
    std::vector<std::string> f;
    for (std::string tok; ls >> tok;) f.push_back(tok);
    if (f.empty()) continue;
    const std::string where = "line " + std::to_string(lineno);

    if (raw[0] != ' ' && raw[0] != '\t') {
      if (f[0] == "NAME") model_name = f.size() > 1 ? f[1] : "model";
      else if (f[0] == "ROWS") section = Section::Rows;
      else if (f[0] == "COLUMNS") section = Section::Columns;
      else if (f[0] == "RHS") section = Section::Rhs;
      else if (f[0] == "BOUNDS") section = Section::Bounds;
      else if (f[0] == "ENDATA") section = Section::Done;
      else throw ParseError(where, "unsupported section '" + f[0] + "'");
      continue;
    }

    switch (section) {
      case Section::Rows: {
        if (f.size() != 2) throw ParseError(where, "expected row type and name");
        if (f[0] == "N") {
          if (objective_row.empty()) objective_row = f[1];
          break;
        }
        Sense s = f[0] == "L" ? Sense::LessEqual : f[0] == "G" ? Sense::GreaterEqual : Sense::Equal;
        if (f[0] != "L" && f[0] != "G" && f[0] != "E") throw ParseError(where, "bad row type '" + f[0] + "'");
        row_index.emplace(f[1], rows.size());
        rows.push_back(RowInfo{s, {}, 0.0, f[1]});
        break;
      }
      case Section::Columns: {
        if (f.size() >= 3 && f[1] == "'MARKER'") {
          if (f[2] == "'INTORG'") in_int = true;
          else if (f[2] == "'INTEND'") in_int = false;
          break;
        }
        if (f.size() != 3 && f.size() != 5) throw ParseError(where, "malformed COLUMNS entry");
        const auto j = column(f[0]);
        for (std::size_t k = 1; k + 1 < f.size(); k += 2) {
          const double v = parse_number(f[k + 1], lineno);
          if (f[k] == objective_row) {
            objective.emplace_back(j, v);
          } else {
            auto it = row_index.find(f[k]);
            if (it == row_index.end()) throw ReferenceError(f[k], where + ": unknown row '" + f[k] + "'");
            rows[it->second].terms.push_back(Term{VarId{static_cast<std::uint32_t>(j)}, v});
          }
        }
        break;
      }
      case Section::Rhs: {
        if (f.size() != 3 && f.size() != 5) throw ParseError(where, "malformed RHS entry");
        for (std::size_t k = 1; k + 1 < f.size(); k += 2) {
          const double v = parse_number(f[k + 1], lineno);
          if (f[k] == objective_row) {
            objective_offset = -v;
            continue;
          }
          auto it = row_index.find(f[k]);
          if (it == row_index.end()) throw ReferenceError(f[k], where + ": unknown row '" + f[k] + "'");
          rows[it->second].rhs = v;
        }
        break;
      }
      case Section::Bounds: {
        if (f.size() < 3) throw ParseError(where, "malformed BOUNDS entry");
        auto it = col_index.find(f[2]);
        if (it == col_index.end()) throw ReferenceError(f[2], where + ": unknown column '" + f[2] + "'");
        auto& c = cols[it->second];
        const std::string& type = f[0];
        auto value = [&] {
          if (f.size() < 4) throw ParseError(where, "bound value missing");
          return parse_number(f[3], lineno);
        };
        if (type == "UP") c.upper = value();
        else if (type == "LO") c.lower = value();
        else if (type == "FX") { c.lower = c.upper = value(); }
        else if (type == "FR") { c.lower = -kInf; c.upper = kInf; }
        else if (type == "MI") c.lower = -kInf;
        else if (type == "PL") c.upper = kInf;
        else if (type == "BV") { c.integer = true; c.lower = 0.0; c.upper = 1.0; }
        else throw ParseError(where, "unsupported bound type '" + type + "'");
        break;
      }
      default:
        throw ParseError(where, "data outside a section");
    }
  }
  if (section != Section::Done) throw ParseError("line " + std::to_string(lineno), "missing ENDATA");

  MilpModel model(model_name);
  for (const auto& c : cols) {
    VarDomain d = VarDomain::Continuous;
    if (c.integer) d = (c.lower == 0.0 && c.upper == 1.0) ? VarDomain::Binary : VarDomain::Integer;
    model.add_variable(c.name, d, c.lower, c.upper);
  }
  for (auto& r : rows) model.add_constraint(std::move(r.terms), r.sense, r.rhs, r.name);
  for (const auto& [j, v] : objective) model.add_objective_term(VarId{static_cast<std::uint32_t>(j)}, v);
  model.set_objective_offset(objective_offset);
  return model;
}

}  // namespace spacelog

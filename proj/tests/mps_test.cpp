#include "spacelog/mps.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "spacelog/branch_and_bound.hpp"
#include "spacelog/formulation.hpp"

using namespace spacelog;

namespace {

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

MilpModel round_trip(const MilpModel& m) {
  std::stringstream buf;
  write_mps(m, buf);
  return read_mps(buf);
}

void expect_same_structure(const MilpModel& a, const MilpModel& b) {
  ASSERT_EQ(a.num_variables(), b.num_variables());
  ASSERT_EQ(a.num_constraints(), b.num_constraints());
  for (std::size_t j = 0; j < a.num_variables(); ++j) {
    const auto& va = a.variables()[j];
    const auto& vb = b.variables()[j];
    EXPECT_EQ(va.lower, vb.lower) << j;
    EXPECT_EQ(va.upper, vb.upper) << j;
    EXPECT_EQ(va.is_integral(), vb.is_integral()) << j;
  }
  for (std::size_t i = 0; i < a.num_constraints(); ++i) {
    const auto& ra = a.constraints()[i];
    const auto& rb = b.constraints()[i];
    EXPECT_EQ(ra.sense, rb.sense) << i;
    EXPECT_EQ(ra.rhs, rb.rhs) << i;
    ASSERT_EQ(ra.terms.size(), rb.terms.size()) << i;
    for (std::size_t k = 0; k < ra.terms.size(); ++k) {
      EXPECT_EQ(ra.terms[k].var, rb.terms[k].var);
      EXPECT_EQ(ra.terms[k].coef, rb.terms[k].coef);
    }
  }
  const auto sa = to_standard_form(a), sb = to_standard_form(b);
  EXPECT_EQ(sa.c, sb.c);
  EXPECT_EQ(a.objective_offset(), b.objective_offset());
}

}  // namespace

TEST(Mps, EmptyModel) {
  std::ostringstream out;
  write_mps(MilpModel("empty"), out);
  const auto s = out.str();
  for (const char* section : {"NAME", "ROWS", "COLUMNS", "RHS", "ENDATA"})
    EXPECT_NE(s.find(section), std::string::npos) << section;
  EXPECT_EQ(count(s, " N  OBJ"), 1u);
  EXPECT_EQ(count(s, " L  "), 0u);
}

TEST(Mps, IntegerMarkers) {
  MilpModel m;
  const VarId y = m.add_binary("y");
  m.add_constraint({{y, 1}}, Sense::LessEqual, 1, "c");
  std::ostringstream out;
  write_mps(m, out);
  EXPECT_EQ(count(out.str(), "'INTORG'"), 1u);
  EXPECT_EQ(count(out.str(), "'INTEND'"), 1u);
}

TEST(Mps, ShortNamesAreUniqueAndMapped) {
  MilpModel m;
  for (int k = 0; k < 50; ++k) m.add_continuous("a_very_long_variable_name_" + std::to_string(k));
  std::ostringstream out;
  const auto names = write_mps(m, out);
  std::set<std::string> seen(names.columns.begin(), names.columns.end());
  EXPECT_EQ(seen.size(), 50u);
  for (const auto& n : names.columns) EXPECT_LE(n.size(), 8u);

  const auto path = std::filesystem::temp_directory_path() / "spacelog_names_test.mps";
  export_mps(m, path);
  std::ifstream map(path.string() + ".names");
  std::string kind, shortname, longname;
  map >> kind >> shortname >> longname;
  EXPECT_EQ(kind, "C");
  EXPECT_EQ(shortname, names.columns[0]);
  EXPECT_EQ(longname, "a_very_long_variable_name_0");
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".names");
}

TEST(Mps, RandomModelsRoundTripExactly) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1e4, 1e4);
  std::uniform_int_distribution<int> kind(0, 5), sense(0, 2);
  for (int trial = 0; trial < 100; ++trial) {
    MilpModel m("rt" + std::to_string(trial));
    std::vector<VarId> v;
    for (int j = 0; j < 8; ++j) {
      switch (kind(rng)) {
        case 0: v.push_back(m.add_binary("bin" + std::to_string(j))); break;
        case 1: v.push_back(m.add_variable("int" + std::to_string(j), VarDomain::Integer, -3, 7)); break;
        case 2: v.push_back(m.add_continuous("free" + std::to_string(j), -kInf, kInf)); break;
        case 3: v.push_back(m.add_continuous("fix" + std::to_string(j), 2.5, 2.5)); break;
        case 4: v.push_back(m.add_continuous("neg" + std::to_string(j), -kInf, u(rng))); break;
        default: v.push_back(m.add_continuous("box" + std::to_string(j), -1.0 / 3.0, 1e5 / 7.0)); break;
      }
      m.add_objective_term(v.back(), u(rng) / 7.0);
    }
    for (int i = 0; i < 6; ++i) {
      std::vector<Term> terms;
      for (const auto id : v)
        if (kind(rng) < 3) terms.push_back({id, u(rng) / 3.0});
      m.add_constraint(std::move(terms), static_cast<Sense>(sense(rng)), u(rng), "row" + std::to_string(i));
    }
    m.set_objective_offset(trial % 2 ? 12.25 : 0.0);
    expect_same_structure(m, round_trip(m));
  }
}

TEST(Mps, LunarModelRoundTripSolvesIdentically) {
  const auto s = load_scenario_file(std::string(SPACELOG_SOURCE_DIR) + "/scenarios/lunar_campaign.json");
  const auto am = assemble_model(s, LinearEpsilonSizing{0.08});
  const auto back = round_trip(am.model);
  expect_same_structure(am.model, back);
  const auto a = solve_milp(am.model), b = solve_milp(back);
  ASSERT_EQ(a.status, SolveStatus::Optimal);
  ASSERT_EQ(b.status, SolveStatus::Optimal);
  EXPECT_NEAR(a.objective, b.objective, 1e-9 * std::abs(a.objective));
}

TEST(Mps, ReaderRejectsGarbage) {
  std::istringstream bad("NAME x\nROWS\n N OBJ\n Q r1\nENDATA\n");
  EXPECT_THROW(read_mps(bad), ParseError);
  std::istringstream unknown("NAME x\nROWS\n N OBJ\nCOLUMNS\n    x  nope  1\nENDATA\n");
  EXPECT_THROW(read_mps(unknown), ReferenceError);
}

TEST(Mps, UnwritablePathIsIoError) {
  EXPECT_THROW(export_mps(MilpModel(), "/nonexistent/dir/out.mps"), IoError);
}

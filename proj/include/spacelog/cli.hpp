#pragma once

// Command-line front end. Exit codes: 0 solved to optimality, 1 solver
// stopped without an optimal design, 2 bad arguments or unreadable files,
// 3 invalid input data or a numerical failure.

#include <algorithm>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "spacelog/pipeline.hpp"

namespace spacelog {

enum class ReportFormat { Text, Json, Csv };

inline TrainRange parse_train_range(const std::string& text) {
  TrainRange r;
  std::istringstream in(text);
  char c1 = 0, c2 = 0;
  if (!(in >> r.lo >> c1 >> r.hi >> c2 >> r.step) || c1 != ':' || c2 != ':' || !in.eof())
    throw DomainError("--train-range expects LO:HI:STEP, got '" + text + "'");
  if (!(r.lo <= r.hi) || !(r.step > 0)) throw DomainError("--train-range needs LO <= HI and STEP > 0");
  return r;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Campaign-level space logistics optimizer with learned spacecraft sizing"};
  app.name("spacelog");

  PipelineOptions opt;
  std::string scenario, surrogate = "nn", report = "text", train_range;
  std::string model, save_model, export_mps;
  std::size_t trials = 1;
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  double min_r2 = 0.98;
  bool no_clamp = false;

  app.add_option("--scenario", scenario, "Scenario JSON file")->required();
  app.add_option("--surrogate", surrogate, "Sizing surrogate")->check(CLI::IsMember({"nn", "linreg"}));
  app.add_option("--model", model, "Load a trained ReLU network instead of training");
  app.add_option("--save-model", save_model, "Write the trained ReLU network to this file");
  app.add_option("--seed", opt.seed, "Training seed (first seed of a study)");
  auto* trials_opt = app.add_option("--trials", trials, "Run a seed study with this many trials")
                         ->check(CLI::PositiveNumber);
  app.add_option("--jobs", jobs, "Concurrent trials in a seed study")->check(CLI::PositiveNumber);
  app.add_option("--min-r2", min_r2, "Study trials below this held-out R^2 are excluded from the statistics");
  app.add_option("--export-mps", export_mps, "Write the assembled model in MPS format");
  app.add_option("--report", report, "Report format")->check(CLI::IsMember({"text", "json", "csv"}));
  app.add_option("--train-range", train_range, "Training grid as LO:HI:STEP (kg of propellant capacity)");
  app.add_flag("--no-clamp", no_clamp, "Leave the network output unclamped");
  app.add_option("--time-limit", opt.time_limit_s, "Branch-and-bound time limit in seconds")
      ->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  const ReportFormat format = report == "json" ? ReportFormat::Json : report == "csv" ? ReportFormat::Csv : ReportFormat::Text;
  try {
    opt.scenario = scenario;
    opt.surrogate = surrogate == "linreg" ? SurrogateKind::Regression : SurrogateKind::Neural;
    if (!model.empty()) opt.model = model;
    if (!save_model.empty()) opt.save_model = save_model;
    if (!export_mps.empty()) opt.export_mps = export_mps;
    if (!train_range.empty()) opt.train_range = parse_train_range(train_range);
    opt.clamp_output = !no_clamp;

    const Scenario s = load_scenario_file(opt.scenario);

    if (trials_opt->count() > 0) {
      if (opt.surrogate != SurrogateKind::Neural || opt.model)
        throw DomainError("--trials trains one network per seed; use it with --surrogate nn and without --model");
      const auto study = run_seed_study(s, opt, trials, jobs, min_r2);
      switch (format) {
        case ReportFormat::Json: write_json_report(study, out); break;
        case ReportFormat::Csv: write_csv_report(study, out); break;
        case ReportFormat::Text: write_text_report(study, out); break;
      }
      for (const auto& t : study.trials)
        if (!t.report) err << "trial " << t.seed << " failed: " << t.error << '\n';
      return study.failures == study.trials.size() ? 1 : 0;
    }

    const auto rep = run_pipeline(s, opt);
    switch (format) {
      case ReportFormat::Json: write_json_report(rep, out); break;
      case ReportFormat::Csv: write_csv_report(rep, out); break;
      case ReportFormat::Text: write_text_report(rep, out); break;
    }
    if (rep.status != SolveStatus::Optimal) {
      err << "error: solver finished with status " << to_string(rep.status) << '\n';
      return 1;
    }
    return 0;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace spacelog

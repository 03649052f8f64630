#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sslab/lab.hpp"
#include "sslab/runlog.hpp"
#include "sslab/wspace.hpp"

namespace {

constexpr int kValidation = 2;
constexpr int kFailure = 3;

void print_summary(const sslab::RunLog& log) {
  for (const auto& [k, v] : log.summary) std::cout << "  " << k << " = " << sslab::field_to_string(v) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-similar soliton laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run one scenario from a config file");
  run->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);

  std::string sweep_config;
  std::vector<std::string> axis_specs;
  auto* sweep = app.add_subcommand("sweep", "Run the cross product of parameter axes");
  sweep->add_option("--config", sweep_config, "Base config file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--axis", axis_specs, "Axis as key=v1,v2,... (repeatable)");

  std::string runlog_path, format = "records", out_base;
  auto* exp = app.add_subcommand("export", "Export a run log");
  exp->add_option("runlog", runlog_path, "Run log (.jsonl)")->required()->check(CLI::ExistingFile);
  exp->add_option("--format", format, "records or table");
  exp->add_option("--output", out_base, "Output path without extension (default: next to the run log)");

  std::string pilot_out = "data/pilot_constants.txt";
  auto* pilot = app.add_subcommand("pilot", "Run the pilot experiments and write the constants file");
  pilot->add_option("--output", pilot_out, "Constants file to write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kValidation;
  }

  try {
    if (*run) {
      const sslab::ExperimentConfig cfg = sslab::load_config(config_path);
      const sslab::RunLog log = sslab::run_experiment(cfg);
      std::cout << sslab::to_string(cfg.scenario) << ": " << log.records.size() << " records -> " << cfg.output_dir
                << '\n';
      print_summary(log);
    } else if (*sweep) {
      sslab::ExperimentConfig cfg = sslab::load_config(sweep_config);
      auto axes = cfg.axes;
      for (const auto& spec : axis_specs) axes.push_back(sslab::parse_axis(spec));
      const sslab::SweepResult res = sslab::sweep(cfg, axes);
      int failed = 0;
      for (const auto& c : res.cells) failed += c.ok ? 0 : 1;
      std::cout << "sweep: " << res.cells.size() << " cells, " << failed << " failed -> " << res.table_path << '\n';
      for (std::size_t i = 0; i < res.cells.size(); ++i)
        if (!res.cells[i].ok) std::cout << "  cell " << i << ": " << res.cells[i].error << '\n';
    } else if (*exp) {
      const sslab::ExportFormat fmt = sslab::export_format_from_string(format);
      const sslab::RunLog log = sslab::load_runlog(runlog_path);
      if (out_base.empty()) out_base = (std::filesystem::path(runlog_path).replace_extension("")).string();
      std::cout << sslab::export_runlog(log, out_base, fmt) << '\n';
    } else if (*pilot) {
      const auto values = sslab::pilot_constants();
      sslab::write_constants(pilot_out, values,
                             "Frozen pilot constants (key = value). Regenerate with: lab pilot --output <file>");
      for (const auto& [k, v] : values) std::cout << k << " = " << v << '\n';
    }
  } catch (const sslab::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "scenario failure: " << e.what() << '\n';
    return kFailure;
  }
  return 0;
}

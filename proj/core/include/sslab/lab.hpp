#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "sslab/runlog.hpp"

namespace sslab {

enum class Scenario { StationaryResidual, EigenAudit, Trapping, Escape, PhysicalBlowup, OperatorDuality, Sweep };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

struct ExperimentConfig {
  Scenario scenario = Scenario::Trapping;
  double p = 3.0;
  int n = 0;  // 0: scenario default
  double d = 0.0;
  double theta = 0.0;
  double epsilon_star = 1e-3;
  double mu = 1e-4;
  double s_span = 0.0;  // 0: scenario default
  std::uint64_t seed = 1;
  std::string output_dir = "lab_out";
  bool filtering = false;
  double ds = 0.0;               // 0: scenario default
  double output_interval = 0.1;
  // physical-blowup
  double amplitude = 3.0;
  double phase = 0.3;
  double u1_amplitude = 0.5;
  double x_half_width = 3.0;
  int x_points = 32768;
  double delta0 = 0.5;
  // sweep
  Scenario sweep_scenario = Scenario::Trapping;
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  int sweep_cap = 256;
  int workers = 0;  // 0: hardware concurrency

  // Throws ValidationError.
  void validate() const;
  int resolved_n() const;
  double resolved_s_span() const;
  double resolved_ds() const;
  // Sets one field from its textual value; throws ValidationError on unknown keys.
  void set(const std::string& key, const std::string& value);
};

// INI-style file: `key = value` lines, optional `[section]` headers.  Keys in
// [experiment] (or before any section) apply first, then the section named
// after the scenario, then [sweep] entries `axis.<key> = v1,v2,...`.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::string& path);

// Executes one scenario, writes `<output_dir>/<scenario>.jsonl`, returns the log.
RunLog run_experiment(const ExperimentConfig& config);
// Same without touching the disk.
RunLog execute_scenario(const ExperimentConfig& config);

struct SweepCell {
  std::map<std::string, std::string> values;
  std::string output_dir;
  bool ok = false;
  std::string error;
  RunLog log;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::string table_path;
};

// Cross product of the axes; cells run concurrently, each in its own
// directory.  A failing cell is recorded and the sweep continues.
SweepResult sweep(const ExperimentConfig& base,
                  const std::vector<std::pair<std::string, std::vector<std::string>>>& axes);

// Axis spec `key=v1,v2,...`.
std::pair<std::string, std::vector<std::string>> parse_axis(const std::string& spec);

// Pilot runs behind the frozen constants file.
std::vector<std::pair<std::string, double>> pilot_constants();

}  // namespace sslab

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "sslab/lab.hpp"
#include "sslab/wspace.hpp"

using namespace sslab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sslab_lab_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

}  // namespace

TEST_SUITE("lab") {
  TEST_CASE("config sections apply in order") {
    const ExperimentConfig c = parse(
        "p = 5\n"
        "[experiment]\nscenario = trapping\nd = 0.1\n"
        "; comment\n"
        "[trapping]\nd = 0.5\nseed = 9\n"
        "[escape]\nd = 0.7\n");
    CHECK(c.scenario == Scenario::Trapping);
    CHECK(c.p == 5.0);
    CHECK(c.d == 0.5);
    CHECK(c.seed == 9);
    CHECK(c.resolved_n() == 64);
    CHECK(c.resolved_s_span() == 8.0);
  }

  TEST_CASE("config errors") {
    CHECK_THROWS_AS(parse("[experiment]\nscenario = nope\n"), ValidationError);
    CHECK_THROWS_AS(parse("[experiment]\nbogus = 1\n"), ValidationError);
    CHECK_THROWS_AS(parse("[elsewhere]\np = 3\n"), ValidationError);
    CHECK_THROWS_AS(parse("[experiment]\np = three\n"), ValidationError);
    CHECK_THROWS_AS(parse("[experiment]\nscenario = trapping\nd = 1.5\n"), ValidationError);
    ExperimentConfig c;
    c.d = 1.5;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c.d = 0.0;
    c.p = 1.0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c.p = 3.0;
    c.ds = 1.0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
  }

  TEST_CASE("sweep axes from the config and the command line") {
    const ExperimentConfig c = parse(
        "[experiment]\nscenario = sweep\n[sweep]\nsweep_scenario = eigen-audit\naxis.p = 2,3\naxis.seed = 1, 2 ,3\n");
    CHECK(c.sweep_scenario == Scenario::EigenAudit);
    REQUIRE(c.axes.size() == 2);
    CHECK(c.axes[1].second == std::vector<std::string>{"1", "2", "3"});
    const auto ax = parse_axis("d=0,0.5");
    CHECK(ax.first == "d");
    CHECK(ax.second.size() == 2);
    CHECK_THROWS_AS(parse_axis("d"), ValidationError);
    CHECK_THROWS_AS(parse_axis("d="), ValidationError);
  }

  TEST_CASE("eigen audit through the driver") {
    ExperimentConfig c;
    c.scenario = Scenario::EigenAudit;
    c.output_dir = scratch("eigen").string();
    const RunLog log = run_experiment(c);
    REQUIRE(log.records.size() == 9);
    for (double e : log.column("rayleigh_error")) CHECK(e < 1e-7);
    for (double e : log.column("eigen_residual")) CHECK(e < 1e-7);
    CHECK(log.summary_number("poincare_max_gap") <= 1e-8);
    const fs::path file = fs::path(c.output_dir) / "eigen-audit.jsonl";
    REQUIRE(fs::exists(file));
    CHECK(load_runlog(file.string()) == log);
    fs::remove_all(c.output_dir);
  }

  TEST_CASE("a sweep without axes is a single run") {
    ExperimentConfig c;
    c.scenario = Scenario::EigenAudit;
    c.output_dir = scratch("single").string();
    const RunLog direct = execute_scenario(c);
    const SweepResult r = sweep(c, {});
    REQUIRE(r.cells.size() == 1);
    CHECK(r.cells[0].ok);
    CHECK(r.cells[0].log == direct);
    fs::remove_all(c.output_dir);
  }

  TEST_CASE("failing sweep cells are isolated") {
    ExperimentConfig c;
    c.scenario = Scenario::EigenAudit;
    c.output_dir = scratch("iso").string();
    c.workers = 2;
    const SweepResult r = sweep(c, {{"p", {"3", "0.5", "5"}}});
    REQUIRE(r.cells.size() == 3);
    CHECK(r.cells[0].ok);
    CHECK_FALSE(r.cells[1].ok);
    CHECK_FALSE(r.cells[1].error.empty());
    CHECK(r.cells[2].ok);
    CHECK(fs::exists(fs::path(c.output_dir) / "cell_002" / "eigen-audit.jsonl"));
    CHECK(fs::exists(r.table_path));
    CHECK(r.rows.size() == 3);
    CHECK_THROWS_AS(sweep(c, {{"p", {}}}), ValidationError);
    c.sweep_cap = 2;
    CHECK_THROWS_AS(sweep(c, {{"p", {"2", "3", "5"}}}), ValidationError);
    fs::remove_all(c.output_dir);
  }

  TEST_CASE("same config gives identical records") {
    ExperimentConfig c;
    c.scenario = Scenario::OperatorDuality;
    c.n = 64;
    const RunLog a = execute_scenario(c), b = execute_scenario(c);
    CHECK(records_section(a) == records_section(b));
    CHECK(a.summary_number("max_duality_defect") < 1e-7);
  }

  TEST_CASE("scenario names") {
    for (Scenario s : {Scenario::StationaryResidual, Scenario::EigenAudit, Scenario::Trapping, Scenario::Escape,
                       Scenario::PhysicalBlowup, Scenario::OperatorDuality, Scenario::Sweep})
      CHECK(scenario_from_string(to_string(s)) == s);
    CHECK_THROWS_AS(scenario_from_string("trap"), ValidationError);
  }
}

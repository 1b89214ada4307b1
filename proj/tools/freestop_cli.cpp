// Command-line front end. Talks to the library only through freestop.h.
#include <freestop/freestop.h>

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

namespace {

using ScenarioPtr = std::unique_ptr<fs_scenario, decltype(&fs_scenario_free)>;

int report_error(fs_status status) {
  // Stage failures already carry "stage: " in the message.
  std::fprintf(stderr, "freestop: %s error: %s\n", fs_status_string(status), fs_last_error());
  return 1;
}

ScenarioPtr load(const std::string& path, fs_status& status) {
  fs_scenario* raw = nullptr;
  status = fs_scenario_load(path.c_str(), &raw);
  return ScenarioPtr(raw, &fs_scenario_free);
}

const char* optional_path(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal transport with free end times: solvers and verification"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (sets FREESTOP_THREADS)")
      ->check(CLI::PositiveNumber);

  std::string scenario;
  std::string out;

  auto* cost = app.add_subcommand("cost", "Point costs for pairs of points");
  std::string pairs;
  cost->add_option("--scenario", scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  cost->add_option("--pairs", pairs, "CSV with columns x..., y...")->required()
      ->check(CLI::ExistingFile);
  cost->add_option("--out", out, "Output CSV (x..., y..., c)")->required();

  auto* plan = app.add_subcommand("plan", "Optimal plan and Kantorovich potentials");
  plan->add_option("--scenario", scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  plan->add_option("--out", out, "Output JSON")->required();

  auto* hjb = app.add_subcommand("hjb", "Value function and free boundary");
  std::string boundary;
  hjb->add_option("--scenario", scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  hjb->add_option("--out", out, "Field CSV (t, q..., J, psi, contact)")->required();
  hjb->add_option("--boundary", boundary, "Boundary CSV (q..., s)");

  auto* monge = app.add_subcommand("monge", "Monge map by shooting from the value gradient");
  std::string field;
  monge->add_option("--scenario", scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  monge->add_option("--field", field, "Field CSV from the hjb command")->check(CLI::ExistingFile);
  monge->add_option("--out", out, "Map CSV (x..., y..., tau, p0...)")->required();

  auto* eulerian = app.add_subcommand("eulerian", "Min-cost flow on the space-time lattice");
  std::string stops;
  eulerian->add_option("--scenario", scenario, "Scenario JSON")->required()
      ->check(CLI::ExistingFile);
  eulerian->add_option("--out", out, "Flow CSV (t, q..., A_index, mass)")->required();
  eulerian->add_option("--stops", stops, "Stopping CSV (t, q..., mass)");

  auto* oracle = app.add_subcommand("oracle", "Closed-form tables for the 1D worked cases");
  std::string which;
  std::string penalty;
  int points = 801;
  std::vector<double> times;
  oracle->add_option("--case", which, "A (convex g) or B (concave g)")->required();
  oracle->add_option("--g", penalty, "power:<p>, one_minus_exp[:<rate>] or linear")->required();
  oracle->add_option("--table", out, "Output CSV")->required();
  oracle->add_option("--points", points, "Rows over [-2, 2]")->check(CLI::Range(2, 10000000));
  oracle->add_option("--times", times, "Times for J(t, .) columns")->delimiter(',');

  auto* verify = app.add_subcommand("verify", "Full pipeline with audits; exit 0 iff all pass");
  std::string out_dir;
  std::string report_path;
  verify->add_option("--scenario", scenario, "Scenario JSON")->required()
      ->check(CLI::ExistingFile);
  verify->add_option("--out-dir", out_dir, "Directory for CSV/JSON artifacts");
  verify->add_option("--report", report_path, "Write the report here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  if (threads > 0) setenv("FREESTOP_THREADS", std::to_string(threads).c_str(), 1);

  if (*oracle) {
    const fs_status s = fs_oracle_table(which.c_str(), penalty.c_str(), points, times.data(),
                                        times.size(), out.c_str());
    return s == FS_OK ? 0 : report_error(s);
  }

  fs_status status = FS_OK;
  ScenarioPtr sc = load(scenario, status);
  if (status != FS_OK) return report_error(status);

  if (*cost) status = fs_cost(sc.get(), pairs.c_str(), out.c_str());
  else if (*plan) status = fs_plan(sc.get(), out.c_str());
  else if (*hjb) status = fs_hjb(sc.get(), out.c_str(), optional_path(boundary));
  else if (*monge) status = fs_monge(sc.get(), optional_path(field), out.c_str());
  else if (*eulerian) status = fs_eulerian(sc.get(), out.c_str(), optional_path(stops));
  if (!*verify) return status == FS_OK ? 0 : report_error(status);

  fs_report* raw = nullptr;
  status = fs_verify(sc.get(), optional_path(out_dir), &raw);
  std::unique_ptr<fs_report, decltype(&fs_report_free)> report(raw, &fs_report_free);
  if (!report) return report_error(status);
  if (report_path.empty()) {
    std::fputs(fs_report_json(report.get()), stdout);
  } else {
    FILE* f = std::fopen(report_path.c_str(), "wb");
    if (!f || std::fputs(fs_report_json(report.get()), f) < 0) {
      if (f) std::fclose(f);
      std::fprintf(stderr, "freestop: cannot write %s\n", report_path.c_str());
      return 1;
    }
    std::fclose(f);
  }
  if (status != FS_OK) return report_error(status);
  return fs_report_passed(report.get()) ? 0 : 1;
}

// Exercises the shared library through its C header only.
#include <doctest.h>

#include <freestop/freestop.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace {

const char* kSmall = R"({
  "name": "capi",
  "problem": {"g": {"kind": "power", "exponent": 2}},
  "mu": {"density": "uniform", "a": -0.5, "b": 0.5, "n_atoms": 16},
  "nu": {"mixture": [
    {"weight": 0.5, "measure": {"density": "uniform", "a": -2, "b": -1, "n_atoms": 16}},
    {"weight": 0.5, "measure": {"density": "uniform", "a": 1, "b": 2, "n_atoms": 16}}]},
  "lattice": {"dx": 0.0625, "box": "auto"},
  "eulerian_lattice": {"dx": 0.0625, "t_max": 2, "box": "auto"}
})";

std::string temp_path(const char* name) { return std::string(P_tmpdir) + "/freestop_capi_" + name; }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("version and status strings") {
  CHECK(std::strcmp(fs_version(), "1.0.0") == 0);
  CHECK(std::strcmp(fs_status_string(FS_OK), "ok") == 0);
  CHECK(std::strcmp(fs_status_string(FS_ERR_UNREACHABLE), "unreachable") == 0);
}

TEST_CASE("null arguments are rejected") {
  fs_scenario* s = nullptr;
  CHECK(fs_scenario_parse(nullptr, &s) == FS_ERR_INVALID_ARGUMENT);
  CHECK(fs_scenario_parse(kSmall, nullptr) == FS_ERR_INVALID_ARGUMENT);
  CHECK(fs_plan(nullptr, "x") == FS_ERR_INVALID_ARGUMENT);
  fs_report* r = nullptr;
  CHECK(fs_verify(nullptr, nullptr, &r) == FS_ERR_INVALID_ARGUMENT);
  fs_scenario_free(nullptr);
  fs_report_free(nullptr);
  CHECK(fs_report_passed(nullptr) == 0);
}

TEST_CASE("parse errors carry a status and message") {
  fs_scenario* s = nullptr;
  CHECK(fs_scenario_parse("{ nope", &s) == FS_ERR_PARSE);
  CHECK(s == nullptr);
  CHECK(std::strlen(fs_last_error()) > 0);
  CHECK(fs_scenario_load("/nonexistent.json", &s) == FS_ERR_IO);
}

TEST_CASE("verify through the C API") {
  fs_scenario* s = nullptr;
  REQUIRE(fs_scenario_parse(kSmall, &s) == FS_OK);
  fs_report* r = nullptr;
  CHECK(fs_verify(s, nullptr, &r) == FS_OK);
  REQUIRE(r != nullptr);
  CHECK(fs_report_passed(r) == 1);
  double v = 0, d1 = 0, w = 0;
  CHECK(fs_report_value(r, "V", &v) == FS_OK);
  CHECK(fs_report_value(r, "D1", &d1) == FS_OK);
  CHECK(fs_report_value(r, "W", &w) == FS_OK);
  CHECK(std::abs(v - d1) <= 1e-8);
  CHECK(fs_report_value(r, "oracle", &v) == FS_ERR_INVALID_ARGUMENT);
  CHECK(fs_report_value(r, "Q", &v) == FS_ERR_INVALID_ARGUMENT);
  const size_t n = fs_report_audit_count(r);
  CHECK(n > 5);
  for (size_t i = 0; i < n; ++i) {
    const char* name = nullptr;
    int pass = 0;
    double residual = 0, tolerance = 0;
    REQUIRE(fs_report_audit(r, i, &name, &pass, &residual, &tolerance) == FS_OK);
    CHECK_MESSAGE(pass == 1, std::string(name));
  }
  CHECK(fs_report_audit(r, n, nullptr, nullptr, nullptr, nullptr) == FS_ERR_INVALID_ARGUMENT);
  CHECK(std::strstr(fs_report_json(r), "\"audits\"") != nullptr);
  fs_report_free(r);

  const std::string plan = temp_path("plan.json");
  CHECK(fs_plan(s, plan.c_str()) == FS_OK);
  CHECK(slurp(plan).find("\"plan\"") != std::string::npos);
  const std::string field = temp_path("field.csv");
  const std::string boundary = temp_path("boundary.csv");
  CHECK(fs_hjb(s, field.c_str(), boundary.c_str()) == FS_OK);
  CHECK(slurp(field).rfind("t,q,J,psi,contact\n", 0) == 0);
  CHECK(slurp(boundary).rfind("q,s\n", 0) == 0);
  const std::string map = temp_path("map.csv");
  CHECK(fs_monge(s, field.c_str(), map.c_str()) == FS_OK);
  CHECK(slurp(map).rfind("x,y,tau,p0\n", 0) == 0);
  const std::string flow = temp_path("flow.csv");
  const std::string stops = temp_path("stops.csv");
  CHECK(fs_eulerian(s, flow.c_str(), stops.c_str()) == FS_OK);
  CHECK(slurp(flow).rfind("t,q,A_index,mass\n", 0) == 0);
  CHECK(slurp(stops).rfind("t,q,mass\n", 0) == 0);
  fs_scenario_free(s);
}

TEST_CASE("stage failure still yields a report") {
  std::string json = kSmall;
  const std::string from = R"("lattice": {"dx": 0.0625, "box": "auto"})";
  json.replace(json.find(from), from.size(), R"("lattice": {"dx": 0.0625, "t_max": 1, "box": "auto"})");
  fs_scenario* s = nullptr;
  REQUIRE(fs_scenario_parse(json.c_str(), &s) == FS_OK);
  fs_report* r = nullptr;
  CHECK(fs_verify(s, nullptr, &r) == FS_ERR_UNREACHABLE);
  CHECK(std::strcmp(fs_last_error_stage(), "trajectory_cost") == 0);
  CHECK(std::strncmp(fs_last_error(), "trajectory_cost: ", 17) == 0);
  REQUIRE(r != nullptr);
  CHECK(fs_report_passed(r) == 0);
  CHECK(std::strstr(fs_report_json(r), "unreachable") != nullptr);
  fs_report_free(r);
  fs_scenario_free(s);
}

TEST_CASE("oracle table") {
  const std::string out = temp_path("oracle.csv");
  const double times[] = {0.5, 1.0};
  CHECK(fs_oracle_table("A", "power:2", 5, times, 2, out.c_str()) == FS_OK);
  const std::string text = slurp(out);
  CHECK(text.rfind("z,monge,exit_time,J0,boundary,psi,J_t0.5,J_t1\n", 0) == 0);
  CHECK(fs_oracle_table("B", "power:2", 5, nullptr, 0, out.c_str()) == FS_ERR_INVALID_ARGUMENT);
  CHECK(fs_oracle_table("A", "cubic", 5, nullptr, 0, out.c_str()) != FS_OK);
}

#include <freestop/freestop.h>
#include <freestop/io.hpp>
#include <freestop/pipeline.hpp>

#include <cstring>
#include <memory>
#include <new>
#include <string>

struct fs_scenario {
  freestop::Pipeline pipeline;
};

struct fs_report {
  freestop::VerificationReport report;
  std::string json;
};

namespace {

thread_local std::string last_error;
thread_local std::string last_stage;

fs_status status_of(freestop::ErrorCode code) {
  using freestop::ErrorCode;
  switch (code) {
    case ErrorCode::InvalidArgument: return FS_ERR_INVALID_ARGUMENT;
    case ErrorCode::Parse: return FS_ERR_PARSE;
    case ErrorCode::Io: return FS_ERR_IO;
    case ErrorCode::Unreachable: return FS_ERR_UNREACHABLE;
    case ErrorCode::Infeasible: return FS_ERR_INFEASIBLE;
    case ErrorCode::Numeric: return FS_ERR_NUMERIC;
    case ErrorCode::CflViolation: return FS_ERR_CFL;
    case ErrorCode::HorizonCheck: return FS_ERR_HORIZON;
    case ErrorCode::DimensionMismatch: return FS_ERR_DIMENSION;
    case ErrorCode::Unsupported: return FS_ERR_UNSUPPORTED;
    case ErrorCode::OffLattice: return FS_ERR_OFF_LATTICE;
    case ErrorCode::Internal: return FS_ERR_INTERNAL;
  }
  return FS_ERR_INTERNAL;
}

fs_status record(fs_status status, std::string stage, std::string message) {
  last_stage = std::move(stage);
  last_error = std::move(message);
  return status;
}

// Exceptions never cross the C boundary.
template <class F>
fs_status guarded(F&& body) {
  try {
    body();
    return FS_OK;
  } catch (const freestop::StageError& e) {
    return record(status_of(e.code()), e.stage(), e.what());
  } catch (const freestop::Error& e) {
    return record(status_of(e.code()), "", e.what());
  } catch (const std::bad_alloc&) {
    return record(FS_ERR_INTERNAL, "", "out of memory");
  } catch (const std::exception& e) {
    return record(FS_ERR_INTERNAL, "", e.what());
  } catch (...) {
    return record(FS_ERR_INTERNAL, "", "unknown exception");
  }
}

fs_status null_argument(const char* what) {
  return record(FS_ERR_INVALID_ARGUMENT, "", std::string(what) + " must not be NULL");
}

}  // namespace

extern "C" {

const char* fs_version(void) { return "1.0.0"; }

const char* fs_status_string(fs_status status) {
  switch (status) {
    case FS_OK: return "ok";
    case FS_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case FS_ERR_PARSE: return "parse";
    case FS_ERR_IO: return "io";
    case FS_ERR_UNREACHABLE: return "unreachable";
    case FS_ERR_INFEASIBLE: return "infeasible";
    case FS_ERR_NUMERIC: return "numeric";
    case FS_ERR_CFL: return "cfl_violation";
    case FS_ERR_HORIZON: return "horizon_check";
    case FS_ERR_DIMENSION: return "dimension_mismatch";
    case FS_ERR_UNSUPPORTED: return "unsupported";
    case FS_ERR_OFF_LATTICE: return "off_lattice";
    case FS_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* fs_last_error(void) { return last_error.c_str(); }

const char* fs_last_error_stage(void) { return last_stage.c_str(); }

fs_status fs_scenario_load(const char* path, fs_scenario** out) {
  if (!path) return null_argument("path");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    *out = new fs_scenario{freestop::Pipeline(freestop::load_scenario(path))};
  });
}

fs_status fs_scenario_parse(const char* json, fs_scenario** out) {
  if (!json) return null_argument("json");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    *out = new fs_scenario{freestop::Pipeline(freestop::parse_scenario(json))};
  });
}

void fs_scenario_free(fs_scenario* scenario) { delete scenario; }

fs_status fs_cost(fs_scenario* scenario, const char* pairs_csv, const char* out_csv) {
  if (!scenario) return null_argument("scenario");
  if (!pairs_csv || !out_csv) return null_argument("path");
  return guarded([&] { freestop::write_costs(scenario->pipeline, pairs_csv, out_csv); });
}

fs_status fs_plan(fs_scenario* scenario, const char* out_json) {
  if (!scenario) return null_argument("scenario");
  if (!out_json) return null_argument("out_json");
  return guarded([&] { freestop::write_plan(scenario->pipeline, out_json); });
}

fs_status fs_hjb(fs_scenario* scenario, const char* field_csv, const char* boundary_csv) {
  if (!scenario) return null_argument("scenario");
  if (!field_csv) return null_argument("field_csv");
  return guarded([&] {
    auto& p = scenario->pipeline;
    freestop::write_field(p.field(), field_csv);
    if (boundary_csv) freestop::write_boundary(p.field(), p.boundary(), boundary_csv);
  });
}

fs_status fs_monge(fs_scenario* scenario, const char* field_csv, const char* out_csv) {
  if (!scenario) return null_argument("scenario");
  if (!out_csv) return null_argument("out_csv");
  return guarded([&] {
    auto& p = scenario->pipeline;
    if (field_csv) p.use_field(freestop::read_field(p, field_csv));
    freestop::write_map(p, out_csv);
  });
}

fs_status fs_eulerian(fs_scenario* scenario, const char* flow_csv, const char* stops_csv) {
  if (!scenario) return null_argument("scenario");
  if (!flow_csv) return null_argument("flow_csv");
  return guarded([&] {
    freestop::write_flow(scenario->pipeline, flow_csv);
    if (stops_csv) freestop::write_stops(scenario->pipeline, stops_csv);
  });
}

fs_status fs_oracle_table(const char* oracle_case, const char* penalty, int points,
                          const double* times, size_t n_times, const char* out_csv) {
  if (!oracle_case || !penalty || !out_csv) return null_argument("argument");
  if (n_times > 0 && !times) return null_argument("times");
  return guarded([&] {
    const std::vector<double> t(times, times + n_times);
    freestop::write_oracle_table(freestop::parse_oracle_case(oracle_case),
                                 freestop::TimePenalty::parse(penalty), out_csv, points, t);
  });
}

fs_status fs_verify(fs_scenario* scenario, const char* output_dir, fs_report** out) {
  if (!scenario) return null_argument("scenario");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    auto report = std::make_unique<fs_report>();
    report->report = freestop::run(scenario->pipeline, output_dir ? output_dir : "");
    report->json = report->report.to_json();
    const auto failure = report->report.failure;
    *out = report.release();
    if (failure) throw freestop::StageError(failure->stage, failure->code, failure->message);
  });
}

int fs_report_passed(const fs_report* report) { return report && report->report.passed() ? 1 : 0; }

const char* fs_report_json(const fs_report* report) { return report ? report->json.c_str() : ""; }

size_t fs_report_audit_count(const fs_report* report) {
  return report ? report->report.audits.size() : 0;
}

fs_status fs_report_audit(const fs_report* report, size_t index, const char** name, int* pass,
                          double* residual, double* tolerance) {
  if (!report) return null_argument("report");
  if (index >= report->report.audits.size()) {
    return record(FS_ERR_INVALID_ARGUMENT, "", "audit index out of range");
  }
  const auto& a = report->report.audits[index];
  if (name) *name = a.name.c_str();
  if (pass) *pass = a.pass ? 1 : 0;
  if (residual) *residual = a.residual;
  if (tolerance) *tolerance = a.tolerance;
  return FS_OK;
}

fs_status fs_report_value(const fs_report* report, const char* which, double* out) {
  if (!report) return null_argument("report");
  if (!which || !out) return null_argument("argument");
  const auto& r = report->report;
  const std::optional<double>* v = nullptr;
  if (std::strcmp(which, "V") == 0) v = &r.V;
  else if (std::strcmp(which, "D1") == 0) v = &r.D1;
  else if (std::strcmp(which, "D") == 0) v = &r.D;
  else if (std::strcmp(which, "W") == 0) v = &r.W;
  else if (std::strcmp(which, "oracle") == 0) v = &r.oracle_value;
  if (!v) return record(FS_ERR_INVALID_ARGUMENT, "", std::string("unknown value '") + which + "'");
  if (!*v) return record(FS_ERR_INVALID_ARGUMENT, "", std::string(which) + " was not computed");
  *out = **v;
  return FS_OK;
}

void fs_report_free(fs_report* report) { delete report; }

}  // extern "C"

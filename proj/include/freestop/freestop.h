#ifndef FREESTOP_FREESTOP_H
#define FREESTOP_FREESTOP_H

#include <stddef.h>

#if defined(_WIN32)
#define FS_API __declspec(dllexport)
#else
#define FS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct fs_scenario fs_scenario;
typedef struct fs_report fs_report;

typedef enum fs_status {
  FS_OK = 0,
  FS_ERR_INVALID_ARGUMENT = 1,
  FS_ERR_PARSE = 2,
  FS_ERR_IO = 3,
  FS_ERR_UNREACHABLE = 4,
  FS_ERR_INFEASIBLE = 5,
  FS_ERR_NUMERIC = 6,
  FS_ERR_CFL = 7,
  FS_ERR_HORIZON = 8,
  FS_ERR_DIMENSION = 9,
  FS_ERR_UNSUPPORTED = 10,
  FS_ERR_OFF_LATTICE = 11,
  FS_ERR_INTERNAL = 12
} fs_status;

/* Static strings; never freed. */
FS_API const char* fs_version(void);
FS_API const char* fs_status_string(fs_status status);

/* Message and pipeline stage of the last failing call on this thread. The
   pointers stay valid until the next failing call on the same thread. */
FS_API const char* fs_last_error(void);
FS_API const char* fs_last_error_stage(void);

FS_API fs_status fs_scenario_load(const char* path, fs_scenario** out);
FS_API fs_status fs_scenario_parse(const char* json, fs_scenario** out);
FS_API void fs_scenario_free(fs_scenario* scenario);

/* A scenario caches solved stages, so later calls reuse earlier work. A
   scenario must not be used from two threads at once. */

/* pairs_csv: headered CSV with columns x..., y...; writes x..., y..., c. */
FS_API fs_status fs_cost(fs_scenario* scenario, const char* pairs_csv, const char* out_csv);
/* { value, dual_value, plan: [[i, j, mass]...], psi: [...], phi: [...] } */
FS_API fs_status fs_plan(fs_scenario* scenario, const char* out_json);
/* field: t, q..., J, psi, contact; boundary (optional): q..., s. */
FS_API fs_status fs_hjb(fs_scenario* scenario, const char* field_csv, const char* boundary_csv);
/* Solves the field unless field_csv names one written by fs_hjb. Writes
   x..., y..., tau, p0... with two rows for atoms at a kink. */
FS_API fs_status fs_monge(fs_scenario* scenario, const char* field_csv, const char* out_csv);
/* flow: t, q..., A_index, mass; stops (optional): t, q..., mass. */
FS_API fs_status fs_eulerian(fs_scenario* scenario, const char* flow_csv, const char* stops_csv);

/* Closed-form table for case "A" or "B" and penalty text such as "power:2". */
FS_API fs_status fs_oracle_table(const char* oracle_case, const char* penalty, int points,
                                 const double* times, size_t n_times, const char* out_csv);

/* Runs every enabled stage and audit. *out receives a report whenever the
   scenario could be run, including when a stage fails; the return value is
   that stage's status. Artifacts go to output_dir when it is not NULL. */
FS_API fs_status fs_verify(fs_scenario* scenario, const char* output_dir, fs_report** out);

FS_API int fs_report_passed(const fs_report* report);
/* Owned by the report. */
FS_API const char* fs_report_json(const fs_report* report);
FS_API size_t fs_report_audit_count(const fs_report* report);
/* *name is owned by the report. */
FS_API fs_status fs_report_audit(const fs_report* report, size_t index, const char** name,
                                 int* pass, double* residual, double* tolerance);
/* which: "V", "D1", "D", "W" or "oracle"; FS_ERR_INVALID_ARGUMENT when the
   value was not computed. */
FS_API fs_status fs_report_value(const fs_report* report, const char* which, double* out);
FS_API void fs_report_free(fs_report* report);

#ifdef __cplusplus
}
#endif

#endif

/* recdual - convex-duality solver for recursive utility maximization
 *
 * C interface of the shared library. All functions return rd_status;
 * RD_OK means success. On failure, rd_last_error() returns a thread-local
 * human-readable message. Objects are opaque handles released with the
 * matching *_free function; strings returned through char** are owned by
 * the caller and released with rd_string_free.
 */
#ifndef RECDUAL_H
#define RECDUAL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rd_status {
    RD_OK = 0,
    RD_ERR_INVALID_ARGUMENT = 1, /* bad pointer, dimension or value */
    RD_ERR_PARSE = 2,            /* malformed or invalid configuration */
    RD_ERR_UNSUPPORTED = 3,      /* operation undefined for the drift case */
    RD_ERR_NUMERIC = 4,          /* numeric failure (bracketing, non-finite) */
    RD_ERR_IO = 5,               /* file could not be read or written */
    RD_ERR_INTERNAL = 6
} rd_status;

typedef struct rd_scenario rd_scenario;
typedef struct rd_solution rd_solution;
typedef struct rd_report rd_report;

const char* rd_status_name(rd_status status);
const char* rd_last_error(void);
void rd_string_free(char* s);

/* --- scenario configuration ------------------------------------------- */

rd_status rd_scenario_parse(const char* json_text, rd_scenario** out);
rd_status rd_scenario_load(const char* path, rd_scenario** out);
rd_status rd_scenario_dump(const rd_scenario* s, char** json_out);
rd_status rd_scenario_set_seed(rd_scenario* s, uint64_t seed);
rd_status rd_scenario_set_paths(rd_scenario* s, int n_paths);
rd_status rd_scenario_set_steps(rd_scenario* s, int n_steps);
rd_status rd_scenario_set_threads(rd_scenario* s, int threads);
/* Output path configured in the document, or the empty string. */
rd_status rd_scenario_out_path(const rd_scenario* s, char** path_out);
void rd_scenario_free(rd_scenario* s);

/* --- pointwise transforms ---------------------------------------------- */

/* Drift b(t, x, q); q has `dim` entries. */
rd_status rd_drift_eval(const rd_scenario* s, double t, double x, const double* q, size_t dim,
                        double* value_out);

/* Closed-form conjugate; *finite_out is 0 when the value is +infinity. */
rd_status rd_drift_conjugate(const rd_scenario* s, double t, double mu, const double* nu,
                             size_t dim, double* value_out, int* finite_out);

/* Infimum of conjugate + x mu + q'nu over the effective-domain grid. */
rd_status rd_duality_roundtrip(const rd_scenario* s, double t, double x, const double* q,
                               size_t dim, double* value_out);

/* --- solve / simulate / verify ------------------------------------------ */

rd_status rd_solve(const rd_scenario* s, rd_solution** out);
rd_status rd_solution_dump(const rd_solution* sol, char** json_out);
rd_status rd_solution_summary(const rd_solution* sol, char** text_out);
double rd_solution_zeta_hat(const rd_solution* sol);
double rd_solution_dual_value(const rd_solution* sol);
void rd_solution_free(rd_solution* sol);

/* Writes the path CSV to csv_path (stride >= 1 thins the knots) and returns
 * the run summary as JSON. */
rd_status rd_simulate(const rd_scenario* s, const rd_solution* sol, const char* csv_path,
                      int stride, char** summary_json_out);

rd_status rd_verify(const rd_scenario* s, rd_report** out);
rd_status rd_report_dump(const rd_report* r, char** json_out);
rd_status rd_report_summary(const rd_report* r, char** text_out);
int rd_report_passed(const rd_report* r);
void rd_report_free(rd_report* r);

#ifdef __cplusplus
}
#endif

#endif /* RECDUAL_H */

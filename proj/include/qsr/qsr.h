/*
 * qsr - Monte Carlo simulation of energy-based stochastic state reduction.
 *
 * C interface to the shared library. All objects are opaque handles created
 * and destroyed through these functions; every entry point returns a status
 * code and leaves a human-readable detail string in qsr_last_error() on
 * failure. Handles are not thread-safe for concurrent mutation, but distinct
 * handles may be used from distinct threads.
 */

#ifndef QSR_H
#define QSR_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define QSR_API __declspec(dllexport)
#else
#define QSR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum qsr_status {
  QSR_OK = 0,
  QSR_ERROR_INVALID_ARGUMENT = 1, /* bad handle or parameter */
  QSR_ERROR_PARSE = 2,            /* config could not be parsed or validated */
  QSR_ERROR_INTERNAL = 3          /* unexpected failure; see qsr_last_error() */
} qsr_status;

typedef struct qsr_config qsr_config;
typedef struct qsr_result qsr_result;

QSR_API const char* qsr_version(void);
QSR_API const char* qsr_status_name(qsr_status status);

/* Detail message for the most recent failure on this thread. */
QSR_API const char* qsr_last_error(void);

/* --- configuration ------------------------------------------------------ */

QSR_API qsr_status qsr_config_from_file(const char* path, qsr_config** out_config);
QSR_API qsr_status qsr_config_from_string(const char* text, qsr_config** out_config);
QSR_API void qsr_config_free(qsr_config* config);

/* Command-line style overrides. Threads affect speed only, never results. */
QSR_API qsr_status qsr_config_set_seed(qsr_config* config, uint64_t seed);
QSR_API qsr_status qsr_config_set_paths(qsr_config* config, uint64_t n_paths);
QSR_API qsr_status qsr_config_set_threads(qsr_config* config, uint32_t threads);

/* --- runs ---------------------------------------------------------------- */

/* Ensemble simulation: summary.json and optional trajectories.csv. */
QSR_API qsr_status qsr_run_simulate(const qsr_config* config, qsr_result** out_result);
/* Statistical verification suite: report.json, report.txt, summary.json. */
QSR_API qsr_status qsr_run_verify(const qsr_config* config, qsr_result** out_result);
/* Euler-vs-closed-form strong-error ladder: convergence.csv + report. */
QSR_API qsr_status qsr_run_convergence(const qsr_config* config, qsr_result** out_result);
/* Time-change equivalence ladder (finite-time configs): report. */
QSR_API qsr_status qsr_run_timechange(const qsr_config* config, qsr_result** out_result);

/* --- results ------------------------------------------------------------- */

QSR_API size_t qsr_result_artifact_count(const qsr_result* result);
/* Returns NULL when index is out of range. */
QSR_API const char* qsr_result_artifact_name(const qsr_result* result, size_t index);
/* Bytes of the artifact (NUL-terminated as a convenience); size excludes the
 * terminator. Returns NULL when index is out of range. */
QSR_API const char* qsr_result_artifact_data(const qsr_result* result, size_t index,
                                             size_t* out_size);
/* 1 when every gating check of the run passed (simulate: always 1). */
QSR_API int qsr_result_passed(const qsr_result* result);
QSR_API void qsr_result_free(qsr_result* result);

#ifdef __cplusplus
}
#endif

#endif /* QSR_H */

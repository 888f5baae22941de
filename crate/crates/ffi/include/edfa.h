#ifndef EDFA_H
#define EDFA_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum EdfaStatus {
  EDFA_STATUS_OK = 0,
  EDFA_STATUS_NULL_POINTER = 1,
  EDFA_STATUS_INVALID_ARGUMENT = 2,
  EDFA_STATUS_CONFIG = 3,
  EDFA_STATUS_IO = 4,
  EDFA_STATUS_GEOMETRY = 5,
  EDFA_STATUS_SINGULAR_SYSTEM = 6,
  EDFA_STATUS_FACTORIZATION = 7,
  EDFA_STATUS_NOT_CONVERGED = 8,
  EDFA_STATUS_STATE = 9,
  EDFA_STATUS_BUFFER_TOO_SMALL = 10,
  EDFA_STATUS_INTERNAL = 99,
} EdfaStatus;

/**
 * Opaque session handle.
 */
typedef struct EdfaSession EdfaSession;

/**
 * Metrics of the last solve. Times are in seconds.
 */
typedef struct EdfaSolveSummary {
  uint64_t n_it;
  bool converged;
  double relres;
  double true_relres;
  double t_p0;
  double t_p;
  double t_s;
  double t_t;
  double mu;
} EdfaSolveSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a session from TOML text. The system starts at the configured `dt0`.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EdfaStatus edfa_session_from_toml(const char *toml, struct EdfaSession **out);

/**
 * Creates a session from a TOML file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EdfaStatus edfa_session_from_file(const char *path, struct EdfaSession **out);

/**
 * Releases a session. Null is ignored.
 *
 * # Safety
 * `session` must come from a constructor of this library and not be used afterwards.
 */
void edfa_session_free(struct EdfaSession *session);

/**
 * Element, face and unknown counts.
 *
 * # Safety
 * All pointers must be valid; output pointers may be null to skip them.
 */
enum EdfaStatus edfa_session_dims(const struct EdfaSession *session,
                                  size_t *n_elems,
                                  size_t *n_faces,
                                  size_t *n_unknowns);

/**
 * Moves to a new timestep. The pressures of the last solve, if any, become
 * the previous state. `dt` that is infinite or `<= 0` selects the steady system.
 *
 * # Safety
 * `session` must be a valid handle.
 */
enum EdfaStatus edfa_session_set_timestep(struct EdfaSession *session, double dt);

/**
 * Builds the preconditioner for the current timestep. Stage 1 is built on
 * the first call only. `edfa_session_solve` calls this when needed.
 *
 * # Safety
 * `session` must be a valid handle.
 */
enum EdfaStatus edfa_session_build_preconditioner(struct EdfaSession *session);

/**
 * Solves the current system. Non-convergence returns `NotConverged`.
 *
 * # Safety
 * `session` must be a valid handle; `summary` may be null.
 */
enum EdfaStatus edfa_session_solve(struct EdfaSession *session, struct EdfaSolveSummary *summary);

/**
 * Copies the element pressures of the last solve into `buf`.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum EdfaStatus edfa_session_pressures(const struct EdfaSession *session, double *buf, size_t len);

/**
 * Copies the face pressures of the last solve, one per grid face.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum EdfaStatus edfa_session_face_pressures(const struct EdfaSession *session,
                                            double *buf,
                                            size_t len);

/**
 * Writes the current system in Matrix Market format into `dir`, plus the
 * preconditioner factors when one has been built.
 *
 * # Safety
 * `dir` must be a NUL-terminated string.
 */
enum EdfaStatus edfa_session_export(const struct EdfaSession *session, const char *dir);

/**
 * Message of the last failed call on this thread, empty after a success.
 * Valid until the next call on the same thread.
 */
const char *edfa_last_error(void);

/**
 * Library version as a static string.
 */
const char *edfa_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EDFA_H */

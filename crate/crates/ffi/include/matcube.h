#ifndef MATCUBE_H
#define MATCUBE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum MatcubeStatus {
  MATCUBE_STATUS_OK = 0,
  MATCUBE_STATUS_NULL_POINTER = 1,
  MATCUBE_STATUS_INVALID_INPUT = 2,
  MATCUBE_STATUS_DIMENSION = 3,
  MATCUBE_STATUS_NUMERICAL = 4,
  MATCUBE_STATUS_SOLVER = 5,
  MATCUBE_STATUS_PRECONDITION = 6,
  MATCUBE_STATUS_TOO_MANY_VERTICES = 7,
  MATCUBE_STATUS_IO = 8,
  MATCUBE_STATUS_PANIC = 9,
} MatcubeStatus;

/**
 * Certificate search method.
 */
typedef enum MatcubeMethod {
  MATCUBE_METHOD_BEN_TAL = 0,
  MATCUBE_METHOD_QUADRATIC = 1,
  MATCUBE_METHOD_FULL = 2,
} MatcubeMethod;

/**
 * Outcome of a positivity check, matching the command-line exit codes.
 */
typedef enum MatcubeVerdict {
  MATCUBE_VERDICT_CERTIFIED = 0,
  MATCUBE_VERDICT_REFUTED = 1,
  MATCUBE_VERDICT_INCONCLUSIVE = 2,
} MatcubeVerdict;

/**
 * Opaque certificate together with the instance dimensions it refers to.
 */
typedef struct MatcubeCertificate MatcubeCertificate;

/**
 * Opaque matrix cube instance.
 */
typedef struct MatcubeInstance MatcubeInstance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread (empty if none). The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *matcube_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *matcube_version(void);

/**
 * Builds an instance from `m + 1` row-major `n × n` matrices stored
 * consecutively in `data`, on the cube of half-width `radius`.
 *
 * # Safety
 * `data` must point to `(m + 1) n²` doubles; `out` must be writable.
 */
enum MatcubeStatus matcube_instance_new(size_t n,
                                        size_t m,
                                        const double *data,
                                        double radius,
                                        struct MatcubeInstance **out);

/**
 * Parses a cube instance from the JSON instance format.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum MatcubeStatus matcube_instance_from_json(const char *json, struct MatcubeInstance **out);

/**
 * # Safety
 * `inst` must be null or come from one of the instance constructors.
 */
void matcube_instance_free(struct MatcubeInstance *inst);

/**
 * # Safety
 * `inst` must be a live instance; `n` and `m` must be writable.
 */
enum MatcubeStatus matcube_instance_dims(const struct MatcubeInstance *inst, size_t *n, size_t *m);

/**
 * Smallest eigenvalue of `G` over the cube vertices. `argmin`, if not
 * null, receives the minimizing vertex (`m` doubles, scaled by the radius).
 *
 * # Safety
 * `inst` must be a live instance; `min_lambda` must be writable; `argmin`
 * must be null or point to `m` doubles.
 */
enum MatcubeStatus matcube_vertex_min(const struct MatcubeInstance *inst,
                                      double *min_lambda,
                                      double *argmin);

/**
 * Searches for a certificate. On return `*verdict` is set; `*cert` holds a
 * new certificate when the verdict is `Certified` and null otherwise.
 * `Refuted` is only reported by the full method, which checks vertices first.
 *
 * # Safety
 * `inst` must be a live instance; `verdict` and `cert` must be writable.
 */
enum MatcubeStatus matcube_certify(const struct MatcubeInstance *inst,
                                   enum MatcubeMethod method,
                                   enum MatcubeVerdict *verdict,
                                   struct MatcubeCertificate **cert);

/**
 * Re-checks `cert` against `inst` without any solver.
 *
 * # Safety
 * Handles must be live; `valid` must be writable; `residual` may be null.
 */
enum MatcubeStatus matcube_certificate_verify(const struct MatcubeInstance *inst,
                                              const struct MatcubeCertificate *cert,
                                              int *valid,
                                              double *residual);

/**
 * Serializes a certificate to the JSON certificate format. Release the
 * string with `matcube_string_free`.
 *
 * # Safety
 * `cert` must be live; `out` must be writable.
 */
enum MatcubeStatus matcube_certificate_to_json(const struct MatcubeCertificate *cert, char **out);

/**
 * Parses a certificate from the JSON certificate format.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum MatcubeStatus matcube_certificate_from_json(const char *json, struct MatcubeCertificate **out);

/**
 * # Safety
 * `cert` must be null or come from this library.
 */
void matcube_certificate_free(struct MatcubeCertificate *cert);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void matcube_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MATCUBE_H */

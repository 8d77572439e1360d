#ifndef IMUB_H
#define IMUB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ImubAxis {
  IMUB_AXIS_HORIZONTAL = 0,
  IMUB_AXIS_VERTICAL = 1,
} ImubAxis;

typedef enum ImubStatus {
  IMUB_STATUS_OK = 0,
  IMUB_STATUS_NULL_POINTER = 1,
  IMUB_STATUS_INVALID_ARGUMENT = 2,
  IMUB_STATUS_INVALID_UTF8 = 3,
  IMUB_STATUS_PARSE = 4,
  IMUB_STATUS_IO = 5,
  IMUB_STATUS_BUFFER_TOO_SMALL = 6,
  IMUB_STATUS_PANIC = 7,
} ImubStatus;

/**
 * Opaque migration matrix.
 */
typedef struct ImubMatrix ImubMatrix;

/**
 * Opaque exact sampler owning its random stream.
 */
typedef struct ImubSampler ImubSampler;

typedef struct ImubBoundaryPoint {
  enum ImubAxis axis;
  double value;
} ImubBoundaryPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *imub_last_error(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void imub_string_free(char *s);

/**
 * `a_t(0, l)` of the rate-1 symmetric simple random walk.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum ImubStatus imub_srw_kernel(double t, int64_t l, double *out);

/**
 * Mass of the vertical half-axis above `c` under the harmonic measure at `(u, v)`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum ImubStatus imub_vertical_tail(double u, double v, double c, double *out);

/**
 * `p`-th moment of coordinate `coordinate` (1 or 2) under the harmonic measure.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum ImubStatus imub_moment_p(double u, double v, uint32_t coordinate, double p, double *out);

/**
 * Probability that type 2 is present at site `k` at time `t` for step
 * initial data `(u, 0)` left of the origin and `(0, v)` from it on.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum ImubStatus imub_interface_formula(double u, double v, double t, int64_t k, double *out);

/**
 * New sampler on replica `stream` of the master seed.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum ImubStatus imub_sampler_new(uint64_t seed, uint64_t stream, struct ImubSampler **out);

/**
 * Exact draw from the harmonic measure at `(u, v)`.
 *
 * # Safety
 * `sampler` must come from [`imub_sampler_new`]; `out` must be valid for writes.
 */
enum ImubStatus imub_sampler_draw(struct ImubSampler *sampler,
                                  double u,
                                  double v,
                                  struct ImubBoundaryPoint *out);

/**
 * # Safety
 * `sampler` must come from [`imub_sampler_new`] or be null.
 */
void imub_sampler_free(struct ImubSampler *sampler);

/**
 * Builds a matrix from its JSON description, e.g.
 * `{"kind":"ssrw_z","radius":50,"topology":"absorbing"}`.
 *
 * # Safety
 * `spec` must be a nul-terminated string; `out` must be valid for writes.
 */
enum ImubStatus imub_matrix_from_json(const char *spec, struct ImubMatrix **out);

/**
 * Number of sites.
 *
 * # Safety
 * `m` must be a live matrix handle; `out` must be valid for writes.
 */
enum ImubStatus imub_matrix_len(const struct ImubMatrix *m, size_t *out);

/**
 * Copies the sorted site labels into `buf`, which holds `len` entries.
 *
 * # Safety
 * `m` must be a live matrix handle; `buf` must be valid for `len` writes.
 */
enum ImubStatus imub_matrix_sites(const struct ImubMatrix *m, int64_t *buf, size_t len);

/**
 * `out = exp(tA) f` for a field `f` of `len` entries in site order.
 *
 * # Safety
 * `m` must be a live matrix handle; `f` and `out` must be valid for `len` entries.
 */
enum ImubStatus imub_matrix_flow(const struct ImubMatrix *m,
                                 const double *f,
                                 size_t len,
                                 double t,
                                 double *out);

/**
 * # Safety
 * `m` must come from [`imub_matrix_from_json`] or be null.
 */
void imub_matrix_free(struct ImubMatrix *m);

/**
 * Runs one verification suite (`"martingale"`, `"quadrant"`, ...) on an
 * experiment document and returns its JSON report in `*out_json`.
 * `doc_json` may be null for the `quadrant` and `interface` suites.
 *
 * # Safety
 * String arguments must be nul-terminated; `out_json` and `pass` must be
 * valid for writes. Release `*out_json` with [`imub_string_free`].
 */
enum ImubStatus imub_verify_json(const char *doc_json,
                                 const char *suite,
                                 uint64_t seed,
                                 size_t workers,
                                 char **out_json,
                                 bool *pass);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IMUB_H */

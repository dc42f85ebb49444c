#ifndef DEOBFUSC_H
#define DEOBFUSC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes. Values 2 to 4 match the command-line exit codes.
typedef enum DfStatus {
  DF_STATUS_OK = 0,
  DF_STATUS_NULL_ARGUMENT = 1,
  DF_STATUS_INVALID_ARGUMENT = 2,
  DF_STATUS_IO = 3,
  DF_STATUS_NUMERIC = 4,
  DF_STATUS_PARSE = 5,
  DF_STATUS_SHAPE = 6,
  DF_STATUS_UNSUPPORTED = 7,
  DF_STATUS_PANIC = 8,
} DfStatus;

// Opaque image handle: planar `channels x height x width` reals in [0, 1].
typedef struct DfImage DfImage;

// Opaque obfuscation spec handle.
typedef struct DfSpec DfSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// Valid until the next call on the same thread.
const char *df_last_error(void);

// Library version, statically allocated.
const char *df_version(void);

// # Safety
// `s` must come from this library or be null.
void df_string_free(char *s);

// Image from `len = channels * width * height` planar values.
//
// # Safety
// `data` must point to `len` readable doubles; `out` must be writable.
enum DfStatus df_image_new(size_t channels,
                           size_t width,
                           size_t height,
                           const double *data,
                           size_t len,
                           struct DfImage **out);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum DfStatus df_image_load_pnm(const char *path, struct DfImage **out);

// # Safety
// `img` must be a live handle and `path` a NUL-terminated string.
enum DfStatus df_image_save_pnm(const struct DfImage *img, const char *path);

// # Safety
// `img` must be a live handle; the out pointers must be writable.
enum DfStatus df_image_shape(const struct DfImage *img,
                             size_t *channels,
                             size_t *width,
                             size_t *height);

// Copies the planar values into `out`, which holds `len` doubles.
//
// # Safety
// `img` must be a live handle; `out` must have room for `len` doubles.
enum DfStatus df_image_data(const struct DfImage *img, double *out, size_t len);

// # Safety
// `img` must come from this library or be null.
void df_image_free(struct DfImage *img);

// Spec from its JSON form. Mask paths are resolved against the working
// directory.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum DfStatus df_spec_from_json(const char *json, struct DfSpec **out);

// Named preset for a `width x height` image.
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be writable.
enum DfStatus df_spec_preset(const char *name,
                             size_t width,
                             size_t height,
                             uint64_t seed,
                             struct DfSpec **out);

// # Safety
// `spec` must be a live handle; `out` must be writable.
enum DfStatus df_spec_to_json(const struct DfSpec *spec, char **out);

// # Safety
// `spec` must come from this library or be null.
void df_spec_free(struct DfSpec *spec);

// # Safety
// `img` and `spec` must be live handles; `out` must be writable.
enum DfStatus df_obfuscate(const struct DfImage *img,
                           const struct DfSpec *spec,
                           struct DfImage **out);

// Reversal attack on an obfuscated image. `attack_json` may be null for
// the defaults. Writes the averaged reconstruction to `x_star` and, when
// `result_json` is not null, the attack result as JSON.
//
// # Safety
// Handles must be live, strings NUL-terminated, out pointers writable.
enum DfStatus df_reverse(const struct DfImage *obfuscated,
                         const struct DfSpec *spec,
                         const char *attack_json,
                         struct DfImage **x_star,
                         char **result_json);

// # Safety
// Handles must be live; `out` must be writable.
enum DfStatus df_psnr(const struct DfImage *a, const struct DfImage *b, double *out);

// Audits a profile group (JSON with `shape` and `profiles`) under `spec`.
// `monte_carlo_n = 0` disables Monte Carlo estimates.
//
// # Safety
// Strings must be NUL-terminated, `spec` live, `audit_json` writable.
enum DfStatus df_analyze(const char *profiles_json,
                         const struct DfSpec *spec,
                         double alpha,
                         double epsilon,
                         size_t monte_carlo_n,
                         uint64_t seed,
                         char **audit_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEOBFUSC_H */

#ifndef VISTA_H
#define VISTA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VistaStatus {
  VISTA_STATUS_OK = 0,
  VISTA_STATUS_NULL_POINTER = 1,
  VISTA_STATUS_INVALID_UTF8 = 2,
  VISTA_STATUS_CONFIG = 3,
  VISTA_STATUS_DATA = 4,
  VISTA_STATUS_SERIES_TOO_SHORT = 5,
  VISTA_STATUS_IO = 6,
  VISTA_STATUS_WEIGHTS = 7,
  VISTA_STATUS_BANK_FORMAT = 8,
  VISTA_STATUS_DIGEST_MISMATCH = 9,
  VISTA_STATUS_UNDEFINED_METRIC = 10,
  VISTA_STATUS_BUFFER_TOO_SMALL = 11,
  VISTA_STATUS_PANIC = 12,
} VistaStatus;

/**
 * Coreset memory bank.
 */
typedef struct VistaBank VistaBank;

/**
 * Pipeline settings.
 */
typedef struct VistaConfig VistaConfig;

/**
 * Frozen feature extractor.
 */
typedef struct VistaExtractor VistaExtractor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *vista_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *vista_version(void);

/**
 * Creates a configuration holding the defaults.
 */
enum VistaStatus vista_config_new(struct VistaConfig **out);

/**
 * Sets one configuration key using the config-file syntax.
 */
enum VistaStatus vista_config_set(struct VistaConfig *cfg, const char *key, const char *value);

/**
 * Reads a configuration from a `key = value` file.
 */
enum VistaStatus vista_config_load(const char *path, struct VistaConfig **out);

void vista_config_free(struct VistaConfig *cfg);

/**
 * Loads the extractor named by `spec`: `seeded:N` or a weight file path.
 */
enum VistaStatus vista_extractor_load(const char *spec, struct VistaExtractor **out);

void vista_extractor_free(struct VistaExtractor *ex);

/**
 * Builds a memory bank from a row-major `len × dims` training series.
 */
enum VistaStatus vista_fit(const struct VistaConfig *cfg,
                           const struct VistaExtractor *extractor,
                           const double *values,
                           size_t len,
                           size_t dims,
                           struct VistaBank **out);

enum VistaStatus vista_bank_save(const struct VistaBank *bank, const char *path);

enum VistaStatus vista_bank_load(const char *path, struct VistaBank **out);

/**
 * Number of vectors in the bank; 0 for a null handle.
 */
size_t vista_bank_len(const struct VistaBank *bank);

/**
 * Feature dimension of the bank; 0 for a null handle.
 */
size_t vista_bank_dim(const struct VistaBank *bank);

void vista_bank_free(struct VistaBank *bank);

/**
 * Scores a row-major `len × dims` test series. Writes one score per scored
 * timestep, in time order, to `scores` (room for `capacity` values) and the
 * count to `written`. Padded positions are not written. If `capacity` is too
 * small, nothing is written, `written` receives the required count and the
 * call returns `BufferTooSmall`.
 */
enum VistaStatus vista_score(const struct VistaConfig *cfg,
                             const struct VistaExtractor *extractor,
                             const struct VistaBank *bank,
                             const double *values,
                             size_t len,
                             size_t dims,
                             double *scores,
                             size_t capacity,
                             size_t *written);

/**
 * ROC-AUC of `scores` against `{0,1}` `labels`.
 */
enum VistaStatus vista_roc_auc(const double *scores,
                               const uint8_t *labels,
                               size_t len,
                               double *out);

/**
 * Best point-wise F1 over strict thresholds, with its threshold and precision/recall.
 */
enum VistaStatus vista_optimal_f1(const double *scores,
                                  const uint8_t *labels,
                                  size_t len,
                                  double *f1,
                                  double *threshold,
                                  double *precision,
                                  double *recall);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VISTA_H */

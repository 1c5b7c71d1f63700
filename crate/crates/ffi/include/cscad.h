#ifndef CSCAD_H
#define CSCAD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CscadStatus {
  CSCAD_STATUS_OK = 0,
  CSCAD_STATUS_NULL_POINTER = 1,
  CSCAD_STATUS_INVALID_UTF8 = 2,
  CSCAD_STATUS_INVALID_CONFIG = 3,
  CSCAD_STATUS_IO = 4,
  CSCAD_STATUS_INVALID_DATA = 5,
  CSCAD_STATUS_STALE_ARTIFACT = 6,
  CSCAD_STATUS_TRAINING = 7,
  CSCAD_STATUS_INTERNAL = 8,
  CSCAD_STATUS_PANIC = 9,
} CscadStatus;

// Opaque pipeline handle.
typedef struct CscadPipeline CscadPipeline;

// Switches layered over the configuration file. A zeroed struct changes
// nothing; `negatives` applies only when it lies in (0, 1).
typedef struct CscadOverrides {
  bool has_seed;
  uint64_t seed;
  bool no_gcn;
  bool no_sigma;
  double negatives;
} CscadOverrides;

// Evaluation summary. `fn_` counts missed anomalies.
typedef struct CscadReport {
  double precision;
  double recall;
  double f1;
  uint64_t tp;
  uint64_t fp;
  uint64_t fn_;
  uint64_t tn;
} CscadReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *cscad_last_error(void);

// Static NUL-terminated version string.
const char *cscad_version(void);

// Loads and validates a configuration and opens a pipeline on it.
//
// # Safety
// `config_path` must be a NUL-terminated string. `overrides` may be null.
// `out` must be writable; it receives a handle only on `Ok`.
enum CscadStatus cscad_pipeline_open(const char *config_path,
                                     const struct CscadOverrides *overrides,
                                     struct CscadPipeline **out);

// # Safety
// `pipeline` is null or a handle from `cscad_pipeline_open` not yet freed.
void cscad_pipeline_free(struct CscadPipeline *pipeline);

// # Safety
// `pipeline` must be a live handle used by one thread at a time.
enum CscadStatus cscad_pipeline_mine(struct CscadPipeline *pipeline);

// # Safety
// `pipeline` must be a live handle used by one thread at a time.
enum CscadStatus cscad_pipeline_train_recon(struct CscadPipeline *pipeline);

// # Safety
// `pipeline` must be a live handle used by one thread at a time.
enum CscadStatus cscad_pipeline_train_disc(struct CscadPipeline *pipeline);

// Scores the held-out split. `n_flagged` may be null.
//
// # Safety
// `pipeline` must be a live handle used by one thread at a time;
// `n_flagged` is null or writable.
enum CscadStatus cscad_pipeline_detect(struct CscadPipeline *pipeline, uint64_t *n_flagged);

// # Safety
// `pipeline` must be a live handle used by one thread at a time; `out`
// must be writable.
enum CscadStatus cscad_pipeline_evaluate(struct CscadPipeline *pipeline, struct CscadReport *out);

// All five stages in order.
//
// # Safety
// As `cscad_pipeline_evaluate`.
enum CscadStatus cscad_pipeline_run_all(struct CscadPipeline *pipeline, struct CscadReport *out);

// Scores a predictions CSV against an id-aligned truth CSV.
//
// # Safety
// Both paths must be NUL-terminated strings; `out` must be writable.
enum CscadStatus cscad_evaluate_files(const char *predictions,
                                      const char *truth,
                                      struct CscadReport *out);

// Precision, recall and F1 from raw confusion counts.
//
// # Safety
// `out` must be writable.
enum CscadStatus cscad_report_from_counts(uint64_t tp,
                                          uint64_t fp,
                                          uint64_t fn_,
                                          uint64_t tn,
                                          struct CscadReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CSCAD_H */

/* SPDX-License-Identifier: Apache-2.0 */
#ifndef NCG_NCG_H
#define NCG_NCG_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Stable C surface of the neural coarse-graining engine. All engine state
 * lives behind opaque handles; every call reports failure through status
 * codes, with details from ncg_last_error(). Status values match the CLI
 * exit codes. */
typedef enum ncg_status {
  NCG_OK = 0,
  NCG_ERR_CONFIG = 1,  /* bad config / usage; nothing was written */
  NCG_ERR_RUNTIME = 2  /* numeric or I/O failure at run time */
} ncg_status;

/* Message for the most recent failure on this thread; empty string if the
 * last call succeeded. The pointer stays valid until the next call on the
 * same thread. */
const char* ncg_last_error(void);

/* Experiment commands. Each takes a config JSON document (see the header
 * ncg/experiment.hpp or README for the schema) and writes its artifacts
 * under the config's output directory. */
ncg_status ncg_generate(const char* config_json);
ncg_status ncg_train(const char* config_json);
ncg_status ncg_eval(const char* config_json);

/* threads <= 1 runs cells sequentially; NCG_DETERMINISTIC=1 forces 1. */
ncg_status ncg_sweep(const char* config_json, size_t threads);

/* Runs `instances` finite-difference checks per op. The per-op report is
 * copied into `report` (truncated to report_len, always NUL-terminated;
 * pass NULL/0 to skip). Returns NCG_ERR_RUNTIME when any op fails. */
ncg_status ncg_gradcheck(uint64_t seed, size_t instances, char* report,
                         size_t report_len);

/* Opaque trained-model handle. */
typedef struct ncg_model ncg_model;

ncg_status ncg_model_load(const char* checkpoint_path, ncg_model** out);
void ncg_model_free(ncg_model* model);

/* Transforms a single-channel signal into per-timestep class
 * distributions. On success *probs is a malloc'd row-major [classes x
 * length] array (release with ncg_free); *time_offset is the raw-signal
 * index that the first output row is centered on. */
ncg_status ncg_model_transform(ncg_model* model, const double* samples,
                               size_t num_samples, double** probs,
                               size_t* num_classes, size_t* length,
                               long* time_offset);

void ncg_free(void* ptr);

#ifdef __cplusplus
}
#endif

#endif /* NCG_NCG_H */

#ifndef FEDGMC_H
#define FEDGMC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FedgmcStatus {
  FEDGMC_STATUS_OK = 0,
  FEDGMC_STATUS_NULL_POINTER = 1,
  FEDGMC_STATUS_INVALID_ARGUMENT = 2,
  FEDGMC_STATUS_CONFIG = 3,
  FEDGMC_STATUS_IO = 4,
  FEDGMC_STATUS_FORMAT = 5,
  FEDGMC_STATUS_RUNTIME = 6,
  FEDGMC_STATUS_PANIC = 7,
} FedgmcStatus;

/**
 * Run configuration.
 */
typedef struct FedgmcConfig FedgmcConfig;

/**
 * Completed federation: per-round history and final client models.
 */
typedef struct FedgmcRun FedgmcRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *fedgmc_last_error(void);

/**
 * Default configuration. Never NULL.
 */
struct FedgmcConfig *fedgmc_config_default(void);

/**
 * Parses a TOML configuration. Relative data paths resolve against the
 * current directory.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FedgmcStatus fedgmc_config_parse(const char *toml, struct FedgmcConfig **out);

/**
 * Sets the data and federation seeds.
 *
 * # Safety
 * `config` must come from this library and not be freed.
 */
enum FedgmcStatus fedgmc_config_set_seed(struct FedgmcConfig *config, uint64_t seed);

/**
 * # Safety
 * `config` must come from this library and not be freed.
 */
enum FedgmcStatus fedgmc_config_set_rounds(struct FedgmcConfig *config, uint32_t rounds);

/**
 * `ablation` is a comma list of `semantic`, `structural`, `refinement`,
 * or `local`; `none` restores the full method.
 *
 * # Safety
 * `config` must come from this library; `ablation` must be NUL-terminated.
 */
enum FedgmcStatus fedgmc_config_set_ablation(struct FedgmcConfig *config, const char *ablation);

/**
 * # Safety
 * `config` must come from this library or be NULL; it must not be used afterwards.
 */
void fedgmc_config_free(struct FedgmcConfig *config);

/**
 * Runs the federation. `threads == 0` uses the default pool size; the
 * result does not depend on it.
 *
 * # Safety
 * `config` must come from this library and `out` must be a valid pointer.
 */
enum FedgmcStatus fedgmc_run(const struct FedgmcConfig *config,
                             uint32_t threads,
                             struct FedgmcRun **out);

/**
 * Number of recorded rounds, 0 for NULL.
 *
 * # Safety
 * `run` must come from this library or be NULL.
 */
uint32_t fedgmc_run_num_rounds(const struct FedgmcRun *run);

/**
 * Number of clients, 0 for NULL.
 *
 * # Safety
 * `run` must come from this library or be NULL.
 */
uint32_t fedgmc_run_num_clients(const struct FedgmcRun *run);

/**
 * Validation and test metric of `client` after round `round` (1-based).
 *
 * # Safety
 * `run` must come from this library; `val` and `test` must be valid pointers.
 */
enum FedgmcStatus fedgmc_run_client_metrics(const struct FedgmcRun *run,
                                            uint32_t round,
                                            uint32_t client,
                                            double *val,
                                            double *test);

/**
 * Mean test metric over clients after the last round.
 *
 * # Safety
 * `run` must come from this library; `out` must be a valid pointer.
 */
enum FedgmcStatus fedgmc_run_final_mean_test(const struct FedgmcRun *run, double *out);

/**
 * Writes the history CSV to `path`.
 *
 * # Safety
 * `run` must come from this library; `path` must be NUL-terminated.
 */
enum FedgmcStatus fedgmc_run_write_history(const struct FedgmcRun *run, const char *path);

/**
 * # Safety
 * `run` must come from this library or be NULL; it must not be used afterwards.
 */
void fedgmc_run_free(struct FedgmcRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FEDGMC_H */

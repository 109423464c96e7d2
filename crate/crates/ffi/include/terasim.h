#ifndef TERASIM_H
#define TERASIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by all functions.
 */
typedef enum TerasimStatus {
  TERASIM_STATUS_OK = 0,
  TERASIM_STATUS_NULL_ARGUMENT = 1,
  TERASIM_STATUS_INVALID_UTF8 = 2,
  TERASIM_STATUS_IO = 3,
  TERASIM_STATUS_VALIDATION = 4,
  TERASIM_STATUS_SIMULATION = 5,
  TERASIM_STATUS_OUT_OF_RANGE = 6,
  TERASIM_STATUS_PANIC = 7,
} TerasimStatus;

/**
 * Link selection rule.
 */
typedef enum TerasimMode {
  TERASIM_MODE_LOS = 0,
  TERASIM_MODE_NLOS = 1,
} TerasimMode;

/**
 * Opaque coverage-grid handle.
 */
typedef struct TerasimCoverage TerasimCoverage;

/**
 * Opaque scenario handle.
 */
typedef struct TerasimScenario TerasimScenario;

/**
 * Budget for one receiver position. `has_path` is 0 when nothing reaches
 * it, in which case `snr_db` is negative infinity and capacities are 0.
 */
typedef struct TerasimCell {
  double x_m;
  double y_m;
  double snr_db;
  double capacity_bps;
  double throughput_bps;
  int32_t has_path;
} TerasimCell;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on the calling thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *terasim_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *terasim_version(void);

/**
 * Loads bundled preset `name` (`"ieee"` or `"thz"`).
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TerasimStatus terasim_scenario_from_preset(const char *name, struct TerasimScenario **out);

/**
 * Loads preset `preset` with the scenario file `config_path` merged over it.
 * `config_path` may be null.
 *
 * # Safety
 * String arguments must be NUL-terminated (or null where allowed) and `out`
 * a valid pointer.
 */
enum TerasimStatus terasim_scenario_load(const char *preset,
                                         const char *config_path,
                                         struct TerasimScenario **out);

/**
 * Releases a scenario. Null is ignored.
 *
 * # Safety
 * `scenario` must come from a terasim constructor and not be used afterwards.
 */
void terasim_scenario_free(struct TerasimScenario *scenario);

/**
 * Plug-to-laptop budget.
 *
 * # Safety
 * `scenario` must be a live handle and `out` a valid pointer.
 */
enum TerasimStatus terasim_laptop_link(const struct TerasimScenario *scenario,
                                       enum TerasimMode mode,
                                       struct TerasimCell *out);

/**
 * SNR/capacity map with grid step `step_m` (the scenario default when
 * `step_m <= 0`).
 *
 * # Safety
 * `scenario` must be a live handle and `out` a valid pointer.
 */
enum TerasimStatus terasim_coverage(const struct TerasimScenario *scenario,
                                    enum TerasimMode mode,
                                    double step_m,
                                    struct TerasimCoverage **out);

/**
 * Grid dimensions (cells along x and y).
 *
 * # Safety
 * `grid` must be a live handle; `nx` and `ny` valid pointers.
 */
enum TerasimStatus terasim_coverage_dims(const struct TerasimCoverage *grid,
                                         size_t *nx,
                                         size_t *ny);

/**
 * Cell `(i, j)`, `i` along x.
 *
 * # Safety
 * `grid` must be a live handle and `out` a valid pointer.
 */
enum TerasimStatus terasim_coverage_cell(const struct TerasimCoverage *grid,
                                         size_t i,
                                         size_t j,
                                         struct TerasimCell *out);

/**
 * Releases a coverage grid. Null is ignored.
 *
 * # Safety
 * `grid` must come from [`terasim_coverage`] and not be used afterwards.
 */
void terasim_coverage_free(struct TerasimCoverage *grid);

/**
 * Free-space spreading loss in dB.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum TerasimStatus terasim_fspl_db(double distance_m, double frequency_ghz, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TERASIM_H */

#ifndef BLOCKADE_GHZ_H
#define BLOCKADE_GHZ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of the C API.
 */
typedef enum BgStatus {
  BG_STATUS_OK = 0,
  BG_STATUS_NULL_POINTER = 1,
  BG_STATUS_INVALID_ARGUMENT = 2,
  BG_STATUS_CONFIG = 3,
  BG_STATUS_REGIME = 4,
  BG_STATUS_NUMERICAL = 5,
  BG_STATUS_IO = 6,
  BG_STATUS_ORACLE_VIOLATION = 7,
  BG_STATUS_BUFFER_TOO_SMALL = 8,
  BG_STATUS_PANIC = 9,
} BgStatus;

/**
 * Collective basis state selector for [`bg_state_new`].
 */
typedef enum BgLabel {
  /**
   * `|a^N>`.
   */
  BG_LABEL_ALL_A = 0,
  /**
   * `|b^N>`.
   */
  BG_LABEL_ALL_B = 1,
  /**
   * Ground manifold with `m` atoms in `b`.
   */
  BG_LABEL_GROUND = 2,
  /**
   * One Rydberg excitation with `m` atoms in `b`.
   */
  BG_LABEL_RYDBERG = 3,
} BgLabel;

/**
 * Parsed run configuration.
 */
typedef struct BgConfig BgConfig;

/**
 * Outcome of a GHZ run.
 */
typedef struct BgGhzResult BgGhzResult;

/**
 * State vector in the symmetric basis.
 */
typedef struct BgState BgState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *bg_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *bg_version(void);

/**
 * Parses a TOML configuration.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum BgStatus bg_config_from_toml(const char *toml, struct BgConfig **out);

/**
 * Loads one of the bundled presets (`fig2`, `fig3_top`, `fig3_bottom`, `fig4`).
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum BgStatus bg_config_preset(const char *name, struct BgConfig **out);

/**
 * # Safety
 * `config` must be null or a handle from this library, freed once.
 */
void bg_config_free(struct BgConfig *config);

/**
 * Number of atoms of a configuration, 0 for a null handle.
 *
 * # Safety
 * `config` must be null or a live handle.
 */
size_t bg_config_n_atoms(const struct BgConfig *config);

/**
 * Collective basis state of `n_atoms` atoms. `m` is ignored for
 * `AllA` and `AllB`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum BgStatus bg_state_new(size_t n_atoms, enum BgLabel label, size_t m, struct BgState **out);

/**
 * State from interleaved `(re, im)` pairs in storage order
 * `g_0 .. g_N, r_0 .. r_{N-1}`; `len` counts doubles and must be `2 (2N + 1)`.
 *
 * # Safety
 * `amplitudes` must point to `len` doubles and `out` must be valid.
 */
enum BgStatus bg_state_from_amplitudes(size_t n_atoms,
                                       const double *amplitudes,
                                       size_t len,
                                       struct BgState **out);

/**
 * # Safety
 * `state` must be null or a handle from this library, freed once.
 */
void bg_state_free(struct BgState *state);

/**
 * Basis dimension `2N + 1`, 0 for a null handle.
 *
 * # Safety
 * `state` must be null or a live handle.
 */
size_t bg_state_dim(const struct BgState *state);

/**
 * Copies populations in storage order into `buf`.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
enum BgStatus bg_state_populations(const struct BgState *state, double *buf, size_t len);

/**
 * Copies amplitudes as interleaved `(re, im)` pairs into `buf`.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
enum BgStatus bg_state_amplitudes(const struct BgState *state, double *buf, size_t len);

/**
 * Propagates `state` through the Gaussian pulse pair described by the
 * top-level parameters of `config` and returns the final state, which
 * carries the no-decay amplitude when `gamma_T > 0`.
 *
 * # Safety
 * Handles must be live and `out` valid.
 */
enum BgStatus bg_propagate_pulse_pair(const struct BgConfig *config,
                                      const struct BgState *state,
                                      struct BgState **out);

/**
 * Runs the three-step GHZ sequence for `config`.
 *
 * # Safety
 * `config` must be live and `out` valid.
 */
enum BgStatus bg_ghz_run(const struct BgConfig *config, struct BgGhzResult **out);

/**
 * # Safety
 * `result` must be null or a handle from this library, freed once.
 */
void bg_ghz_free(struct BgGhzResult *result);

/**
 * GHZ fidelity and branch phase of a finished run.
 *
 * # Safety
 * `result` must be live; `fidelity` and `phase` may each be null.
 */
enum BgStatus bg_ghz_fidelity(const struct BgGhzResult *result, double *fidelity, double *phase);

/**
 * Final state of a finished run as a new handle.
 *
 * # Safety
 * `result` must be live and `out` valid.
 */
enum BgStatus bg_ghz_final_state(const struct BgGhzResult *result, struct BgState **out);

/**
 * JSON summary of a finished run; free with [`bg_string_free`].
 *
 * # Safety
 * `result` must be live and `out` valid.
 */
enum BgStatus bg_ghz_summary_json(const struct BgGhzResult *result, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void bg_string_free(char *s);

/**
 * Compares the chain Hamiltonian with the blockade-projected full-space
 * Hamiltonian for `draws` random field values per atom number. Returns
 * `OracleViolation` when an entry differs by more than 1e-12.
 *
 * # Safety
 * `atoms` must point to `n` values; `max_deviation` may be null.
 */
enum BgStatus bg_oracle_check(const size_t *atoms,
                              size_t n,
                              size_t draws,
                              uint64_t seed,
                              double *max_deviation);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BLOCKADE_GHZ_H */

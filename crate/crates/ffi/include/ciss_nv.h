#ifndef CISS_NV_H
#define CISS_NV_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum CissStatus {
  CISS_STATUS_OK = 0,
  CISS_STATUS_NULL_POINTER = 1,
  CISS_STATUS_INVALID_PARAMETER = 2,
  CISS_STATUS_NUMERICAL = 3,
  CISS_STATUS_OUT_OF_RANGE = 4,
  CISS_STATUS_PANIC = 5,
} CissStatus;

typedef enum CissSequence {
  CISS_SEQUENCE_FSLG = 0,
  CISS_SEQUENCE_LG = 1,
  CISS_SEQUENCE_OFF = 2,
} CissSequence;

typedef enum CissTermination {
  CISS_TERMINATION_T001 = 0,
  CISS_TERMINATION_T111 = 1,
} CissTermination;

/**
 * Opaque radical-pair density matrix.
 */
typedef struct CissState CissState;

/**
 * Opaque result of a decoupling sweep.
 */
typedef struct CissSweep CissSweep;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null.
 *
 * The pointer stays valid until the next call into this library from the
 * same thread.
 */
const char *ciss_last_error(void);

/**
 * Builds the radical-pair initial state from the mixing angle, phase and
 * coherence damping.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum CissStatus ciss_state_new(double alpha, double beta, double lambda, struct CissState **out);

/**
 * Releases a state. Null is ignored.
 *
 * # Safety
 * `state` must come from `ciss_state_new` and not be used afterwards.
 */
void ciss_state_free(struct CissState *state);

/**
 * Writes the occupations {T+, P_R, P_S, T-} into `out[0..4]`.
 *
 * # Safety
 * `state` must be a live handle and `out` valid for four doubles.
 */
enum CissStatus ciss_state_occupations(const struct CissState *state, double *out);

/**
 * Writes the polarization c_PR - c_PS.
 *
 * # Safety
 * `state` must be a live handle and `out` valid for one double.
 */
enum CissStatus ciss_state_polarization(const struct CissState *state, double *out);

/**
 * Time-averaged observables of the pair for each amplitude in
 * `omega1[0..n]`, with the pair axis along the field.
 *
 * # Safety
 * `state` must be a live handle, `omega1` valid for `n` doubles and `out`
 * valid for a pointer write.
 */
enum CissStatus ciss_decoupling_sweep(const struct CissState *state,
                                      double separation,
                                      double bz,
                                      double delta_g_ppm,
                                      enum CissSequence sequence,
                                      const double *omega1,
                                      size_t n,
                                      double total,
                                      double dt,
                                      struct CissSweep **out);

/**
 * Number of rows in a sweep, 0 for null.
 *
 * # Safety
 * `sweep` must be null or a live handle.
 */
size_t ciss_sweep_len(const struct CissSweep *sweep);

/**
 * Time-averaged polarization of row `index`.
 *
 * # Safety
 * `sweep` must be a live handle and `out` valid for one double.
 */
enum CissStatus ciss_sweep_pbar(const struct CissSweep *sweep, size_t index, double *out);

/**
 * Time-averaged occupations of row `index` into `out[0..4]`.
 *
 * # Safety
 * `sweep` must be a live handle and `out` valid for four doubles.
 */
enum CissStatus ciss_sweep_occupations(const struct CissSweep *sweep, size_t index, double *out);

/**
 * Releases a sweep. Null is ignored.
 *
 * # Safety
 * `sweep` must come from `ciss_decoupling_sweep` and not be used afterwards.
 */
void ciss_sweep_free(struct CissSweep *sweep);

/**
 * ODMR contrast for a pair collinear with the NV axis, one value per
 * detuning in `detunings[0..n]` written to `contrast[0..n]`.
 * `omega1 = 0` switches decoupling off.
 *
 * # Safety
 * `detunings` and `contrast` must be valid for `n` doubles.
 */
enum CissStatus ciss_odmr_simulate(double alpha,
                                   double beta,
                                   double lambda,
                                   double depth,
                                   double separation,
                                   double bz,
                                   double omega1,
                                   double pulse_duration,
                                   const double *detunings,
                                   size_t n,
                                   double *contrast);

/**
 * Closed-form ensemble shift of a masked monolayer and its LG-scaled
 * value, rad/s.
 *
 * # Safety
 * `shift` and `shift_lg` must be valid for one double each.
 */
enum CissStatus ciss_monolayer_shift(enum CissTermination termination,
                                     double depth,
                                     double mask_diameter,
                                     double linker,
                                     double separation,
                                     double rho_mol,
                                     double *shift,
                                     double *shift_lg);

/**
 * Monte Carlo density of molecules kept after anchor exclusion.
 *
 * # Safety
 * `mean` and `spread` must be valid for one double each.
 */
enum CissStatus ciss_anchor_density(double rho_anchor,
                                    double d_min,
                                    double area,
                                    size_t trials,
                                    uint64_t seed,
                                    double *mean,
                                    double *spread);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CISS_NV_H */

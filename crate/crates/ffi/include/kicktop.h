#ifndef KICKTOP_H
#define KICKTOP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of every fallible call.
 */
typedef enum KtStatus {
  KT_STATUS_OK = 0,
  KT_STATUS_NULL_POINTER = 1,
  KT_STATUS_SIZE = 2,
  KT_STATUS_INVALID = 3,
  KT_STATUS_DIMENSION_MISMATCH = 4,
  KT_STATUS_CAPACITY = 5,
  KT_STATUS_IO = 6,
  KT_STATUS_PANIC = 7,
} KtStatus;

/**
 * Opaque Floquet propagator for one disorder realization.
 */
typedef struct KtPropagator KtPropagator;

/**
 * Opaque N-qubit pure state.
 */
typedef struct KtState KtState;

/**
 * Observables of one state.
 */
typedef struct KtObservables {
  double jx2;
  double jy2;
  double jz2;
  double j2;
  /**
   * Entanglement entropy in bits of the lowest `q` qubits; NaN when `q` was 0.
   */
  double entropy;
  double pss_weight;
  size_t q;
} KtObservables;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or "" if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *kt_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *kt_version(void);

/**
 * Largest supported register size.
 */
size_t kt_max_qubits(void);

/**
 * Spin coherent state pointing along (theta, phi).
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum KtStatus kt_state_coherent(size_t n_qubits, double theta, double phi, struct KtState **out);

/**
 * State from `2 * 2^n` interleaved doubles; must be normalized to 1e-10.
 *
 * # Safety
 * `amplitudes` must point to `len` readable doubles and `out` to writable
 * storage for one handle.
 */
enum KtStatus kt_state_from_amplitudes(const double *amplitudes, size_t len, struct KtState **out);

/**
 * Deep copy of a state.
 *
 * # Safety
 * `state` must be a live handle or null, `out` writable storage for one handle.
 */
enum KtStatus kt_state_clone(const struct KtState *state, struct KtState **out);

/**
 * Releases a state; null is ignored.
 *
 * # Safety
 * `state` must be null or a handle not yet freed.
 */
void kt_state_free(struct KtState *state);

/**
 * Number of qubits, or 0 for a null handle.
 *
 * # Safety
 * `state` must be null or a live handle.
 */
size_t kt_state_n_qubits(const struct KtState *state);

/**
 * Copies the amplitudes as interleaved doubles; `len` must be exactly `2 * 2^n`.
 *
 * # Safety
 * `state` must be a live handle and `out` point to `len` writable doubles.
 */
enum KtStatus kt_state_amplitudes(const struct KtState *state, double *out, size_t len);

/**
 * Weight of the state in the permutation-symmetric subspace.
 *
 * # Safety
 * `state` must be a live handle and `out` writable.
 */
enum KtStatus kt_state_pss_weight(const struct KtState *state, double *out);

/**
 * Collective-spin moments, PSS weight and, for `q > 0`, the entropy of the
 * lowest `q` qubits.
 *
 * # Safety
 * `state` must be a live handle and `out` writable.
 */
enum KtStatus kt_state_observe(const struct KtState *state, size_t q, struct KtObservables *out);

/**
 * Propagator with couplings drawn from Normal(0, w^2) under `seed`.
 *
 * # Safety
 * `out` must be writable storage for one handle.
 */
enum KtStatus kt_propagator_new(size_t n_qubits,
                                double k,
                                double p,
                                double w,
                                uint64_t seed,
                                struct KtPropagator **out);

/**
 * Propagator with explicit couplings eps_{l l'} for l < l', in row order
 * (0,1), (0,2), ..., (1,2), ...; `len` must be N(N-1)/2.
 *
 * # Safety
 * `couplings` must point to `len` readable doubles (may be null when `len`
 * is 0) and `out` to writable storage for one handle.
 */
enum KtStatus kt_propagator_with_couplings(size_t n_qubits,
                                           double k,
                                           double p,
                                           const double *couplings,
                                           size_t len,
                                           struct KtPropagator **out);

/**
 * Releases a propagator; null is ignored.
 *
 * # Safety
 * `propagator` must be null or a handle not yet freed.
 */
void kt_propagator_free(struct KtPropagator *propagator);

/**
 * Applies `kicks` Floquet periods to `state` in place.
 *
 * # Safety
 * Both handles must be live and `state` not aliased elsewhere during the call.
 */
enum KtStatus kt_propagator_advance(const struct KtPropagator *propagator,
                                    struct KtState *state,
                                    uint64_t kicks);

/**
 * Seed of one ensemble member, identical to the one used by sweeps.
 */
uint64_t kt_realization_seed(uint64_t master_seed, size_t n_qubits, double w, uint64_t realization);

/**
 * 3N/4.
 */
double kt_rmt_j_squared(size_t n_qubits);

/**
 * Page value of a Q-qubit block, in bits.
 */
double kt_page_entropy(size_t n_qubits, size_t q);

/**
 * Mean entropy of random permutation-symmetric states, in bits.
 */
double kt_pss_entropy_avg(size_t n_qubits, size_t q);

/**
 * Disorder-averaged J^2(t) of the unkicked model.
 *
 * # Safety
 * `out` must be writable.
 */
enum KtStatus kt_unkicked_j2(size_t n_qubits,
                             double k,
                             double w,
                             double theta,
                             double phi,
                             double t,
                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KICKTOP_H */

#ifndef CHIMPS_H
#define CHIMPS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ChimpsStatus {
  CHIMPS_STATUS_OK = 0,
  CHIMPS_STATUS_NULL_POINTER = 1,
  CHIMPS_STATUS_INVALID_ARGUMENT = 2,
  CHIMPS_STATUS_DIMENSION = 3,
  CHIMPS_STATUS_OUT_OF_RANGE = 4,
  CHIMPS_STATUS_NON_UNITARY = 5,
  CHIMPS_STATUS_NUMERIC = 6,
  CHIMPS_STATUS_PARSE = 7,
  CHIMPS_STATUS_IO = 8,
  CHIMPS_STATUS_PANIC = 9,
} ChimpsStatus;

/**
 * Circuit handle.
 */
typedef struct ChimpsCircuit ChimpsCircuit;

/**
 * Matrix product state handle.
 */
typedef struct ChimpsMps ChimpsMps;

/**
 * One truncation record.
 */
typedef struct ChimpsLogEntry {
  uint64_t ordinal;
  uint64_t qubit_a;
  uint64_t qubit_b;
  uint64_t site;
  uint64_t depth;
  double f;
  /**
   * 0 for a gate, 1 for a regrouping split.
   */
  uint32_t kind;
} ChimpsLogEntry;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *chimps_last_error(void);

/**
 * Creates `|0...0>` on `n_qubits` qubits with bond cap `chi_max`.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum ChimpsStatus chimps_mps_new(size_t n_qubits, size_t chi_max, struct ChimpsMps **out);

/**
 * # Safety
 * `mps` must come from `chimps_mps_new` and not be used afterwards. Null is
 * ignored.
 */
void chimps_mps_free(struct ChimpsMps *mps);

/**
 * # Safety
 * `mps` must be a live handle and `out` valid for a write.
 */
enum ChimpsStatus chimps_mps_n_qubits(const struct ChimpsMps *mps, size_t *out);

/**
 * Applies a 2x2 unitary (8 doubles) to `site`.
 *
 * # Safety
 * `mps` must be a live handle and `matrix` point to 8 doubles.
 */
enum ChimpsStatus chimps_mps_apply_1q(struct ChimpsMps *mps, const double *matrix, size_t site);

/**
 * Applies a 4x4 unitary (32 doubles) to sites `site, site + 1` and writes
 * the truncation fidelity to `f_out` when it is not null.
 *
 * # Safety
 * `mps` must be a live handle, `matrix` point to 32 doubles and `f_out` be
 * null or valid for a write.
 */
enum ChimpsStatus chimps_mps_apply_2q(struct ChimpsMps *mps,
                                      const double *matrix,
                                      size_t site,
                                      double *f_out);

/**
 * Runs every gate of `circuit` on the state.
 *
 * # Safety
 * Both handles must be live.
 */
enum ChimpsStatus chimps_mps_run_circuit(struct ChimpsMps *mps,
                                         const struct ChimpsCircuit *circuit);

/**
 * Amplitude of the basis state `bits` (one byte per qubit, 0 or 1).
 *
 * # Safety
 * `mps` must be a live handle, `bits` point to `len` bytes and the outputs
 * be valid for writes.
 */
enum ChimpsStatus chimps_mps_amplitude(const struct ChimpsMps *mps,
                                       const uint8_t *bits,
                                       size_t len,
                                       double *re_out,
                                       double *im_out);

/**
 * Von Neumann entropy across the bond left of qubit `cut`.
 *
 * # Safety
 * `mps` must be a live handle and `out` valid for a write.
 */
enum ChimpsStatus chimps_mps_entropy(struct ChimpsMps *mps, size_t cut, double *out);

/**
 * Product of all logged truncation fidelities.
 *
 * # Safety
 * `mps` must be a live handle and `out` valid for a write.
 */
enum ChimpsStatus chimps_mps_estimated_fidelity(const struct ChimpsMps *mps, double *out);

/**
 * # Safety
 * `mps` must be a live handle and `out` valid for a write.
 */
enum ChimpsStatus chimps_mps_log_len(const struct ChimpsMps *mps, size_t *out);

/**
 * Copies log entry `index` into `out`.
 *
 * # Safety
 * `mps` must be a live handle and `out` valid for a write.
 */
enum ChimpsStatus chimps_mps_log_entry(const struct ChimpsMps *mps,
                                       size_t index,
                                       struct ChimpsLogEntry *out);

/**
 * Seeded brick-wall circuit on a chain with two-qubit gate `gate` (e.g.
 * `"CZ"`, `"iSWAP"`, `"iS_pi/6"`).
 *
 * # Safety
 * `gate` must be a nul-terminated string and `out` valid for a write.
 */
enum ChimpsStatus chimps_circuit_brick_1d(size_t n_qubits,
                                          size_t depth,
                                          uint64_t seed,
                                          const char *gate,
                                          struct ChimpsCircuit **out);

/**
 * Parses the text circuit format.
 *
 * # Safety
 * `text` must be a nul-terminated string and `out` valid for a write.
 */
enum ChimpsStatus chimps_circuit_parse(const char *text, struct ChimpsCircuit **out);

/**
 * Serializes a circuit; release the string with `chimps_string_free`.
 *
 * # Safety
 * `circuit` must be a live handle and `out` valid for a write.
 */
enum ChimpsStatus chimps_circuit_to_text(const struct ChimpsCircuit *circuit, char **out);

/**
 * # Safety
 * `circuit` must be a live handle; both outputs valid for writes.
 */
enum ChimpsStatus chimps_circuit_info(const struct ChimpsCircuit *circuit,
                                      size_t *n_qubits_out,
                                      size_t *two_qubit_gates_out);

/**
 * # Safety
 * `circuit` must come from this library and not be used afterwards. Null is
 * ignored.
 */
void chimps_circuit_free(struct ChimpsCircuit *circuit);

/**
 * # Safety
 * `s` must be a string returned by this library, or null.
 */
void chimps_string_free(char *s);

/**
 * Gaussian tensor ensemble estimate of the per-gate truncation fidelity.
 *
 * # Safety
 * `gate` must be a nul-terminated string; outputs valid for writes.
 */
enum ChimpsStatus chimps_gte_estimate(const char *gate,
                                      size_t chi,
                                      size_t beta,
                                      size_t trials,
                                      uint64_t seed,
                                      double *mean_out,
                                      double *stderr_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHIMPS_H */

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef BOUNDKEY_H
#define BOUNDKEY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every fallible call.
 */
typedef enum BkStatus {
  BK_STATUS_OK = 0,
  BK_STATUS_NULL_POINTER = 1,
  BK_STATUS_INVALID_ARGUMENT = 2,
  BK_STATUS_DIMENSION_MISMATCH = 3,
  BK_STATUS_NOT_HERMITIAN = 4,
  BK_STATUS_MEMORY_CAP = 5,
  BK_STATUS_NUMERICAL = 6,
  BK_STATUS_PARSE = 7,
  BK_STATUS_PANIC = 8,
} BkStatus;

/*
 A dense operator with subsystem dimensions.
 */
typedef struct BkOperator BkOperator;

/*
 A key/shield state on `[A, B, A', B']`.
 */
typedef struct BkState BkState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread; empty if none.
 The pointer stays valid until the next failing call on the same thread.
 */
const char *bk_last_error_message(void);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must come from this library and not have been freed.
 */
void bk_string_free(char *s);

/*
 `ρ^(D)` with shield dimension `dim` per side (`dim >= 3`).

 # Safety
 `out` must be a valid pointer to write the handle to.
 */
enum BkStatus bk_make_rho(size_t dim, struct BkState **out);

/*
 `ρ^(D,k)` from its closed form. `mem_cap = 0` selects the default cap.

 # Safety
 `out` must be a valid pointer to write the handle to.
 */
enum BkStatus bk_rho_k_closed_form(size_t dim, size_t k, size_t mem_cap, struct BkState **out);

/*
 One dense recurrence step; `success_probability` may be null.

 # Safety
 `accumulated` and `fresh` must be live handles; `out` must be writable.
 */
enum BkStatus bk_recurrence_step(const struct BkState *accumulated,
                                 const struct BkState *fresh,
                                 size_t mem_cap,
                                 struct BkState **out,
                                 double *success_probability);

/*
 Side length of the state's matrix.

 # Safety
 `state` must be a live handle; `out` must be writable.
 */
enum BkStatus bk_state_dim(const struct BkState *state, size_t *out);

/*
 Copies the state's matrix row-major into `re` and `im` (each `len = dim * dim` long).
 `im` may be null for real states.

 # Safety
 `re` (and `im`, if given) must hold `len` doubles.
 */
enum BkStatus bk_state_copy_matrix(const struct BkState *state, double *re, double *im, size_t len);

/*
 Trace norm of the `|00><11|` key block.

 # Safety
 `state` must be a live handle; `out` must be writable.
 */
enum BkStatus bk_state_key_block_trace_norm(const struct BkState *state, double *out);

/*
 Smallest eigenvalue after transposing `B` and `B'`, and whether it is at least `-tol`.

 # Safety
 `state` must be a live handle; both outputs must be writable.
 */
enum BkStatus bk_state_check_ppt(const struct BkState *state,
                                 double tol,
                                 double *min_eigenvalue,
                                 bool *is_ppt);

/*
 ccq report of the state in the standard key basis as JSON
 `{"p", "eve_pairwise_max_distance", "secure", "dw_rate"}`.

 # Safety
 `state` must be a live handle; `out` receives a string for [`bk_string_free`].
 */
enum BkStatus bk_state_ccq_report_json(const struct BkState *state, double tol, char **out);

/*
 Copies the state into an operator handle.

 # Safety
 `state` must be a live handle; `out` must be writable.
 */
enum BkStatus bk_state_to_operator(const struct BkState *state, struct BkOperator **out);

/*
 # Safety
 `state` must come from this library and not have been freed. Null is ignored.
 */
void bk_state_free(struct BkState *state);

/*
 `X_D` on `C^D ⊗ C^D`.

 # Safety
 `out` must be writable.
 */
enum BkStatus bk_make_x(size_t dim, struct BkOperator **out);

/*
 # Safety
 `op` must be a live handle; `out` must be writable.
 */
enum BkStatus bk_operator_dim(const struct BkOperator *op, size_t *out);

/*
 Sum of singular values.

 # Safety
 `op` must be a live handle; `out` must be writable.
 */
enum BkStatus bk_operator_trace_norm(const struct BkOperator *op, double *out);

/*
 Parses `{"dims": [..], "re": [[..]], "im": [[..]]}`.

 # Safety
 `json` must be a NUL-terminated string; `out` must be writable.
 */
enum BkStatus bk_operator_from_json(const char *json, struct BkOperator **out);

/*
 Serializes an operator in the form accepted by [`bk_operator_from_json`].

 # Safety
 `op` must be a live handle; `out` receives a string for [`bk_string_free`].
 */
enum BkStatus bk_operator_to_json(const struct BkOperator *op, char **out);

/*
 # Safety
 `op` must come from this library and not have been freed. Null is ignored.
 */
void bk_operator_free(struct BkOperator *op);

/*
 Key-block criterion series for `k = 1..=k_max` as CSV.

 # Safety
 `out` receives a string for [`bk_string_free`].
 */
enum BkStatus bk_criterion_csv(size_t dim, size_t k_max, size_t mem_cap, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BOUNDKEY_H */

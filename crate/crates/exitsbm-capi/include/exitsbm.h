/* C API for the exitsbm library: belief propagation, density evolution, and
 * EXIT-chart analysis for community detection with side information.
 *
 * Conventions: every function returns an ExitsbmStatus; results come back
 * through out-pointers. Opaque handles are created by constructors and
 * released by the matching *_free (NULL is a no-op there).
 *
 * Kept in sync with crates/exitsbm-capi/src/lib.rs; see cbindgen.toml for
 * regeneration where cbindgen is available.
 */

#ifndef EXITSBM_H
#define EXITSBM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ExitsbmStatus {
  EXITSBM_STATUS_OK = 0,
  EXITSBM_STATUS_NULL_POINTER = 1,
  EXITSBM_STATUS_INVALID_ARGUMENT = 2,
  EXITSBM_STATUS_NUMERICAL_ERROR = 3,
  EXITSBM_STATUS_INTERNAL = 4,
} ExitsbmStatus;

/* Opaque side-information channel. */
typedef struct ExitsbmChannel ExitsbmChannel;

/* Opaque density-evolution trace (either model). */
typedef struct ExitsbmDeTrace ExitsbmDeTrace;

/* Library version as a static NUL-terminated string. */
const char *exitsbm_version(void);

/* Three-symbol erasure/flip channel of the two-community symmetric model:
 * correct with probability epsilon*(1-alpha), flipped with epsilon*alpha,
 * erased with 1-epsilon. Requires 0 <= epsilon <= 1 and 0 < alpha < 0.5. */
ExitsbmStatus exitsbm_channel_erasure_flip(double epsilon,
                                           double alpha,
                                           ExitsbmChannel **out);

/* Binary flip channel of the single-community model; 0 < alpha <= 0.5. */
ExitsbmStatus exitsbm_channel_binary_flip(double alpha, ExitsbmChannel **out);

void exitsbm_channel_free(ExitsbmChannel *ch);

ExitsbmStatus exitsbm_channel_alphabet_size(const ExitsbmChannel *ch,
                                            size_t *out);

/* LLR of a symbol; half_log != 0 selects the symmetric-model half-log
 * convention, 0 the single-model full-log one. */
ExitsbmStatus exitsbm_channel_llr(const ExitsbmChannel *ch,
                                  size_t symbol,
                                  int32_t half_log,
                                  double *out);

/* Density evolution nu_{t+1} = mu^2/4 E[tanh(nu + sqrt(nu) Z + U+)] from
 * nu_0 = 0. tol = 0 forces exactly t_max iterations. */
ExitsbmStatus exitsbm_de_symmetric(double mu,
                                   const ExitsbmChannel *ch,
                                   size_t t_max,
                                   double tol,
                                   ExitsbmDeTrace **out);

/* Single-community density evolution with MAP threshold
 * threshold_nu = ln((n-K)/K). */
ExitsbmStatus exitsbm_de_single(double lambda,
                                double threshold_nu,
                                const ExitsbmChannel *ch,
                                size_t t_max,
                                double tol,
                                ExitsbmDeTrace **out);

void exitsbm_de_trace_free(ExitsbmDeTrace *tr);

/* Number of stored states (t_max + 1 including state 0). */
ExitsbmStatus exitsbm_de_trace_len(const ExitsbmDeTrace *tr, size_t *out);

/* Copies up to cap states (and per-state predicted errors when errors is
 * non-NULL) into caller buffers; *written receives the copied count. */
ExitsbmStatus exitsbm_de_trace_copy(const ExitsbmDeTrace *tr,
                                    double *states,
                                    double *errors,
                                    size_t cap,
                                    size_t *written);

ExitsbmStatus exitsbm_de_trace_fixed_point(const ExitsbmDeTrace *tr,
                                           double *out);

/* Writes 1 when the recursion met its tolerance before the iteration cap. */
ExitsbmStatus exitsbm_de_trace_converged(const ExitsbmDeTrace *tr,
                                         int32_t *out);

/* Asymptotic misclassification fraction of the symmetric model at state nu. */
ExitsbmStatus exitsbm_residual_error_symmetric(double nu,
                                               const ExitsbmChannel *ch,
                                               double *out);

/* Predicted E|C_hat symdiff C*|/K of the single model at state v. */
ExitsbmStatus exitsbm_residual_error_single(double v,
                                            double threshold_nu,
                                            const ExitsbmChannel *ch,
                                            double *out);

/* Mutual information J (bits) between a node's label and its belief. */
ExitsbmStatus exitsbm_j_symmetric(double nu,
                                  const ExitsbmChannel *ch,
                                  double *out);

ExitsbmStatus exitsbm_j_single(double v,
                               double k_frac,
                               const ExitsbmChannel *ch,
                               double *out);

/* One-shot simulation: sample a symmetric SBM with side information, run BP
 * for t rounds, and write the raw misclassification fraction. */
ExitsbmStatus exitsbm_bp_simulate_symmetric(size_t n,
                                            double a,
                                            double b,
                                            double epsilon,
                                            double alpha,
                                            size_t t,
                                            uint64_t seed,
                                            double *out_error);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* EXITSBM_H */

#ifndef MSML_H
#define MSML_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of every fallible call.
 */
typedef enum MsmlStatus {
  MsmlStatus_Ok = 0,
  MsmlStatus_NullArgument = 1,
  MsmlStatus_InvalidUtf8 = 2,
  MsmlStatus_Io = 3,
  MsmlStatus_Ingest = 4,
  MsmlStatus_InvalidInput = 5,
  MsmlStatus_FitFailed = 6,
  MsmlStatus_Diagnostic = 7,
  MsmlStatus_IndexOutOfRange = 8,
  /**
   * The restriction workflow reduced the switching model to the
   * single-state model; no posterior handle was produced.
   */
  MsmlStatus_Collapsed = 9,
} MsmlStatus;

/**
 * Opaque dataset handle.
 */
typedef struct MsmlDataset MsmlDataset;

/**
 * Opaque maximum-likelihood fit handle.
 */
typedef struct MsmlMleFit MsmlMleFit;

/**
 * Opaque posterior-sample handle for MCMC fits.
 */
typedef struct MsmlPosterior MsmlPosterior;

/**
 * MCMC run options; zero-initialized fields fall back to defaults.
 */
typedef struct MsmlMcmcOptions {
  uintptr_t chains;
  uintptr_t burnin;
  uintptr_t keep;
  uintptr_t thin;
  uint64_t seed;
  double sigma_beta;
} MsmlMcmcOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the most recent error message of this thread into `buffer`
 * (NUL-terminated, truncated to `capacity`). Returns the full message
 * length in bytes, excluding the terminator.
 *
 * # Safety
 * `buffer` must point to at least `capacity` writable bytes, or be null
 * (in which case only the length is returned).
 */
uintptr_t msml_last_error_message(char *buffer, uintptr_t capacity);

/**
 * Read a dataset CSV. `outcomes` is the comma-separated ordered label list
 * (last label is the base category); `covariates` lists `name:dummy` or
 * `name:quant` column declarations (may be empty); `n_periods = 0` means
 * "largest week in the file".
 *
 * # Safety
 * `path`, `outcomes` and `covariates` must be valid NUL-terminated strings;
 * `out` must be a valid pointer. The returned handle must be released with
 * [`msml_dataset_free`].
 */
enum MsmlStatus msml_dataset_read_csv(const char *path,
                                      const char *outcomes,
                                      const char *covariates,
                                      uintptr_t n_periods,
                                      struct MsmlDataset **out);

/**
 * # Safety
 * `handle` must come from [`msml_dataset_read_csv`] and not be freed twice.
 */
void msml_dataset_free(struct MsmlDataset *handle);

/**
 * # Safety
 * `handle` must be a live dataset handle; `out` must be valid.
 */
enum MsmlStatus msml_dataset_n_records(const struct MsmlDataset *handle, uintptr_t *out);

/**
 * # Safety
 * `handle` must be a live dataset handle; `out` must be valid.
 */
enum MsmlStatus msml_dataset_n_periods(const struct MsmlDataset *handle, uintptr_t *out);

/**
 * Fit the single-state model by maximum likelihood. With `select != 0`,
 * backward elimination picks the covariates first.
 *
 * # Safety
 * `dataset` must be a live dataset handle; `out` must be valid. The result
 * must be released with [`msml_mle_free`].
 */
enum MsmlStatus msml_fit_ml(const struct MsmlDataset *dataset, int select, struct MsmlMleFit **out);

/**
 * # Safety
 * `handle` must come from [`msml_fit_ml`] and not be freed twice.
 */
void msml_mle_free(struct MsmlMleFit *handle);

/**
 * # Safety
 * `handle` must be a live fit handle; out-pointers must be valid.
 */
enum MsmlStatus msml_mle_loglik(const struct MsmlMleFit *handle, double *out);

/**
 * # Safety
 * `handle` must be a live fit handle; out-pointers must be valid.
 */
enum MsmlStatus msml_mle_aic(const struct MsmlMleFit *handle, double *out);

/**
 * Number of free coefficients in the fit.
 *
 * # Safety
 * `handle` must be a live fit handle; `out` must be valid.
 */
enum MsmlStatus msml_mle_n_params(const struct MsmlMleFit *handle, uintptr_t *out);

/**
 * Estimate and standard error of the coefficient for `outcome` (0-based,
 * non-base) and `covariate` (0 is the intercept). Excluded coefficients
 * report an index error.
 *
 * # Safety
 * `handle` must be a live fit handle; out-pointers must be valid.
 */
enum MsmlStatus msml_mle_coef(const struct MsmlMleFit *handle,
                              uintptr_t outcome,
                              uintptr_t covariate,
                              double *estimate,
                              double *std_error);

/**
 * Fit the two-state switching model by MCMC. With `apply_restrictions != 0`
 * the staged credible-interval restriction workflow runs (and the call
 * reports `Collapsed` when the states merge entirely); otherwise every
 * selected coefficient stays state-specific.
 *
 * # Safety
 * `dataset` must be a live dataset handle; `out` must be valid. The result
 * must be released with [`msml_posterior_free`].
 */
enum MsmlStatus msml_fit_msml(const struct MsmlDataset *dataset,
                              struct MsmlMcmcOptions options,
                              int apply_restrictions,
                              struct MsmlPosterior **out);

/**
 * Fit the single-state model by MCMC on the selected covariates.
 *
 * # Safety
 * `dataset` must be a live dataset handle; `out` must be valid. The result
 * must be released with [`msml_posterior_free`].
 */
enum MsmlStatus msml_fit_ml_mcmc(const struct MsmlDataset *dataset,
                                 struct MsmlMcmcOptions options,
                                 struct MsmlPosterior **out);

/**
 * # Safety
 * `handle` must come from a fit call and not be freed twice.
 */
void msml_posterior_free(struct MsmlPosterior *handle);

/**
 * Number of continuous parameters in the posterior.
 *
 * # Safety
 * `handle` must be a live posterior handle; `out` must be valid.
 */
enum MsmlStatus msml_posterior_n_params(const struct MsmlPosterior *handle, uintptr_t *out);

/**
 * Copy the display name of parameter `index` into `buffer`
 * (NUL-terminated, truncated to `capacity`). Returns the name length.
 *
 * # Safety
 * `handle` must be a live posterior handle; `buffer` must hold `capacity`
 * writable bytes or be null.
 */
uintptr_t msml_posterior_param_name(const struct MsmlPosterior *handle,
                                    uintptr_t index,
                                    char *buffer,
                                    uintptr_t capacity);

/**
 * Posterior mean and equal-tail interval of parameter `index` at `level`.
 *
 * # Safety
 * `handle` must be a live posterior handle; out-pointers must be valid.
 */
enum MsmlStatus msml_posterior_summary(const struct MsmlPosterior *handle,
                                       uintptr_t index,
                                       double level,
                                       double *lower,
                                       double *mean,
                                       double *upper);

/**
 * Posterior probability (and its standard deviation) of the rare state in
 * period `t` (0-based). Only switching fits carry a state series.
 *
 * # Safety
 * `handle` must be a live posterior handle; out-pointers must be valid.
 */
enum MsmlStatus msml_posterior_state_prob(const struct MsmlPosterior *handle,
                                          uintptr_t t,
                                          double *prob,
                                          double *std);

/**
 * Harmonic-mean log marginal likelihood with its bootstrap 95% interval.
 *
 * # Safety
 * `handle` must be a live posterior handle; out-pointers must be valid.
 */
enum MsmlStatus msml_posterior_log_marginal(const struct MsmlPosterior *handle,
                                            uint64_t seed,
                                            double *log_ml,
                                            double *lower,
                                            double *upper);

/**
 * Maximum univariate potential scale reduction factor over the continuous
 * parameters, and the multivariate factor.
 *
 * # Safety
 * `handle` must be a live posterior handle; out-pointers must be valid.
 */
enum MsmlStatus msml_posterior_convergence(const struct MsmlPosterior *handle,
                                           double *max_psrf,
                                           double *mpsrf_out);

/**
 * Monte Carlo goodness-of-fit p-value for a posterior fit at its posterior
 * means.
 *
 * # Safety
 * `dataset` and `handle` must be live handles; `out` must be valid.
 */
enum MsmlStatus msml_posterior_gof(const struct MsmlDataset *dataset,
                                   const struct MsmlPosterior *handle,
                                   uintptr_t replicates,
                                   uint64_t seed,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MSML_H */

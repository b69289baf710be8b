#ifndef TWINBEAM_H
#define TWINBEAM_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum TbStatus {
  TB_STATUS_OK = 0,
  /**
   * Invalid arguments, parameters or configuration.
   */
  TB_STATUS_INVALID_ARGUMENT = 1,
  TB_STATUS_IO = 2,
  /**
   * Fit failure, missing peak, undefined statistic.
   */
  TB_STATUS_NUMERICAL = 3,
  TB_STATUS_NULL_POINTER = 4,
  /**
   * A panic was caught at the boundary.
   */
  TB_STATUS_INTERNAL = 5,
} TbStatus;

/**
 * Opaque joint photocount histogram.
 */
typedef struct TbHistogram TbHistogram;

/**
 * Opaque joint probability table.
 */
typedef struct TbPmf TbPmf;

/**
 * Gaussian-plus-constant fit result.
 */
typedef struct TbFit {
  double amplitude;
  double center;
  double sigma;
  double offset;
  double fwhm;
  double fwhm_err;
  double center_err;
  /**
   * Nonzero when the peak is narrower than one bin.
   */
  int32_t resolution_limited;
} TbFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next call into the library on the same thread.
 */
const char *tb_last_error(void);

/**
 * Classicality bound for the bin `(n_s, n_i)`.
 */
double tb_classicality_bound(uint64_t n_s, uint64_t n_i);

/**
 * Create an empty histogram with the given cutoff.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum TbStatus tb_histogram_new(size_t cutoff, struct TbHistogram **out);

/**
 * Simulate the run described by a TOML config into a histogram.
 *
 * # Safety
 * `config_path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TbStatus tb_histogram_simulate(const char *config_path,
                                    size_t parallelism,
                                    struct TbHistogram **out);

/**
 * Add one frame with the given counts.
 *
 * # Safety
 * `hist` must come from a `tb_histogram_*` constructor.
 */
enum TbStatus tb_histogram_accumulate(struct TbHistogram *hist, size_t c_s, size_t c_i);

/**
 * Number of frames in the histogram (0 for null).
 *
 * # Safety
 * `hist` must be null or a live handle.
 */
uint64_t tb_histogram_frames(const struct TbHistogram *hist);

/**
 * Count in bin `(c_s, c_i)`; zero outside the table or for null.
 *
 * # Safety
 * `hist` must be null or a live handle.
 */
uint64_t tb_histogram_get(const struct TbHistogram *hist, size_t c_s, size_t c_i);

/**
 * Correlation coefficient with a bootstrap standard error.
 *
 * # Safety
 * `hist` must be a live handle; `c_p` and `std_err` valid pointers.
 */
enum TbStatus tb_histogram_correlation(const struct TbHistogram *hist,
                                       size_t resamples,
                                       uint64_t seed,
                                       double *c_p,
                                       double *std_err);

/**
 * Release a histogram. Null is ignored.
 *
 * # Safety
 * `hist` must be null or a handle not yet freed.
 */
void tb_histogram_free(struct TbHistogram *hist);

/**
 * Exact joint distribution of the photodetection model.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum TbStatus tb_pmf_analytic(double mu,
                              double eta_s,
                              double eta_i,
                              double dark_s,
                              double dark_i,
                              size_t cutoff,
                              struct TbPmf **out);

/**
 * Probability of bin `(c_s, c_i)`; zero outside the table or for null.
 *
 * # Safety
 * `pmf` must be null or a live handle.
 */
double tb_pmf_get(const struct TbPmf *pmf, size_t c_s, size_t c_i);

/**
 * Correlation coefficient of the distribution.
 *
 * # Safety
 * `pmf` must be a live handle and `c_p` a valid pointer.
 */
enum TbStatus tb_pmf_correlation(const struct TbPmf *pmf, double *c_p);

/**
 * Release a distribution. Null is ignored.
 *
 * # Safety
 * `pmf` must be null or a handle not yet freed.
 */
void tb_pmf_free(struct TbPmf *pmf);

/**
 * Fit a Gaussian plus constant to `len` samples of a profile with uniform
 * bins of `bin_width` centred at `s`.
 *
 * # Safety
 * `s` and `weight` must point to `len` doubles; `out` must be valid.
 */
enum TbStatus tb_fit_gaussian(const double *s,
                              const double *weight,
                              size_t len,
                              double bin_width,
                              struct TbFit *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TWINBEAM_H */

#ifndef LUNGREF_H
#define LUNGREF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every fallible call.
 */
typedef enum LungrefStatus {
  LUNGREF_STATUS_OK = 0,
  LUNGREF_STATUS_NULL_POINTER = 1,
  LUNGREF_STATUS_INVALID_UTF8 = 2,
  /*
   Malformed input: bad JSON, unreadable file, invalid argument.
   */
  LUNGREF_STATUS_INPUT = 3,
  /*
   Argument outside the mathematical domain.
   */
  LUNGREF_STATUS_DOMAIN = 4,
  /*
   Requested centile lies outside the distribution's support.
   */
  LUNGREF_STATUS_OUT_OF_SUPPORT = 5,
  /*
   Singular or degenerate computation.
   */
  LUNGREF_STATUS_NUMERICAL = 6,
  /*
   A Rust panic was caught at the boundary.
   */
  LUNGREF_STATUS_PANIC = 7,
} LungrefStatus;

/*
 Opaque fitted GAMLSS model.
 */
typedef struct LungrefGamlssModel LungrefGamlssModel;

/*
 Opaque fitted segmented-regression model.
 */
typedef struct LungrefSlrModel LungrefSlrModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. The pointer
 stays valid until the next call into this library on the same thread.
 */
const char *lungref_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *lungref_version(void);

/*
 Standard normal CDF.
 */
double lungref_normal_cdf(double z);

/*
 Standard normal quantile; `prob` must lie in (0, 1).

 # Safety
 `out` must be valid for writes.
 */
enum LungrefStatus lungref_normal_quantile(double prob, double *out);

/*
 BCCG z-score of `y`.

 # Safety
 `out` must be valid for writes.
 */
enum LungrefStatus lungref_bccg_zscore(double y, double mu, double sigma, double nu, double *out);

/*
 BCCG quantile at probability `prob`.

 # Safety
 `out` must be valid for writes.
 */
enum LungrefStatus lungref_bccg_quantile(double prob,
                                         double mu,
                                         double sigma,
                                         double nu,
                                         double *out);

/*
 BCCG CDF at `y`.

 # Safety
 `out` must be valid for writes.
 */
enum LungrefStatus lungref_bccg_cdf(double y, double mu, double sigma, double nu, double *out);

/*
 BCCG log density at `y`.

 # Safety
 `out` must be valid for writes.
 */
enum LungrefStatus lungref_bccg_logpdf(double y, double mu, double sigma, double nu, double *out);

/*
 Loads a GAMLSS model from JSON text (a model file or a bare model).

 # Safety
 `json` must be a NUL-terminated string; `out` must be valid for writes.
 Release the handle with [`lungref_gamlss_free`].
 */
enum LungrefStatus lungref_gamlss_from_json(const char *json, struct LungrefGamlssModel **out);

/*
 Loads a GAMLSS model file from `path`.

 # Safety
 As [`lungref_gamlss_from_json`], with `path` a NUL-terminated string.
 */
enum LungrefStatus lungref_gamlss_load(const char *path, struct LungrefGamlssModel **out);

/*
 Releases a GAMLSS handle. NULL is ignored.

 # Safety
 `model` must come from this library and not be used afterwards.
 */
void lungref_gamlss_free(struct LungrefGamlssModel *model);

/*
 Predicted mu, sigma and nu for one subject.

 # Safety
 `model` must be a live handle; the out-pointers must be valid for writes.
 */
enum LungrefStatus lungref_gamlss_predict(const struct LungrefGamlssModel *model,
                                          double age,
                                          double height,
                                          double weight,
                                          double *mu,
                                          double *sigma,
                                          double *nu);

/*
 z-score of measurement `y` for one subject.

 # Safety
 As [`lungref_gamlss_predict`].
 */
enum LungrefStatus lungref_gamlss_zscore(const struct LungrefGamlssModel *model,
                                         double age,
                                         double height,
                                         double weight,
                                         double y,
                                         double *out);

/*
 Centile at `level` (e.g. 0.05 for the lower limit of normal).

 # Safety
 As [`lungref_gamlss_predict`].
 */
enum LungrefStatus lungref_gamlss_lln(const struct LungrefGamlssModel *model,
                                      double age,
                                      double height,
                                      double weight,
                                      double level,
                                      double *out);

/*
 Loads a segmented-regression model from JSON text.

 # Safety
 As [`lungref_gamlss_from_json`]; release with [`lungref_slr_free`].
 */
enum LungrefStatus lungref_slr_from_json(const char *json, struct LungrefSlrModel **out);

/*
 Loads a segmented-regression model file from `path`.

 # Safety
 As [`lungref_gamlss_load`].
 */
enum LungrefStatus lungref_slr_load(const char *path, struct LungrefSlrModel **out);

/*
 Releases a segmented-regression handle. NULL is ignored.

 # Safety
 `model` must come from this library and not be used afterwards.
 */
void lungref_slr_free(struct LungrefSlrModel *model);

/*
 Predicted mean and residual SD for one subject.

 # Safety
 `model` must be a live handle; the out-pointers must be valid for writes.
 */
enum LungrefStatus lungref_slr_predict(const struct LungrefSlrModel *model,
                                       double age,
                                       double height,
                                       double weight,
                                       double *mean,
                                       double *sd);

/*
 z-score of measurement `y` for one subject.

 # Safety
 As [`lungref_slr_predict`].
 */
enum LungrefStatus lungref_slr_zscore(const struct LungrefSlrModel *model,
                                      double age,
                                      double height,
                                      double weight,
                                      double y,
                                      double *out);

/*
 Normal-theory centile at `level`.

 # Safety
 As [`lungref_slr_predict`].
 */
enum LungrefStatus lungref_slr_lln(const struct LungrefSlrModel *model,
                                   double age,
                                   double height,
                                   double weight,
                                   double level,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LUNGREF_H */

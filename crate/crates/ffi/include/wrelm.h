#ifndef WRELM_H
#define WRELM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every exported call.
 */
typedef enum WrelmStatus {
  WRELM_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  WRELM_STATUS_NULL_POINTER = 1,
  /**
   * Bad argument, dimension mismatch, non-finite input or degenerate data.
   */
  WRELM_STATUS_INVALID = 2,
  /**
   * A numerical failure inside training or adaptation.
   */
  WRELM_STATUS_NUMERIC = 3,
  /**
   * File, format, version or checksum problem.
   */
  WRELM_STATUS_IO = 4,
  /**
   * A Rust panic was caught; the handle involved should be freed.
   */
  WRELM_STATUS_PANIC = 5,
} WrelmStatus;

/**
 * Trained offline model, shareable by any number of predictors.
 */
typedef struct WrelmModel WrelmModel;

/**
 * One causal online stream over a model.
 */
typedef struct WrelmPredictor WrelmPredictor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *wrelm_last_error(void);

/**
 * Loads a model file into `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum WrelmStatus wrelm_model_load(const char *path, struct WrelmModel **out);

/**
 * Trains a model from a dataset CSV with default settings apart from the
 * given neuron count, scalar offline weight and seed.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum WrelmStatus wrelm_model_train_csv(const char *path,
                                       size_t n_neurons,
                                       double w0,
                                       uint64_t seed,
                                       struct WrelmModel **out);

/**
 * # Safety
 * `model` must come from this library; `path` must be NUL-terminated.
 */
enum WrelmStatus wrelm_model_save(const struct WrelmModel *model, const char *path);

/**
 * Frees a model. Predictors created from it stay valid. Null is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void wrelm_model_free(struct WrelmModel *model);

/**
 * Feature count and hidden neuron count.
 *
 * # Safety
 * `model` must come from this library; outputs must be writable or null.
 */
enum WrelmStatus wrelm_model_dims(const struct WrelmModel *model, size_t *z, size_t *n_neurons);

/**
 * Offline (unadapted) prediction for one raw feature row.
 *
 * # Safety
 * `x` must point to `len` doubles; `out` must be writable.
 */
enum WrelmStatus wrelm_model_predict(const struct WrelmModel *model,
                                     const double *x,
                                     size_t len,
                                     double *out);

/**
 * Creates an adaptive predictor with a ring of `ring` pairs and unit weights.
 *
 * # Safety
 * `model` must come from this library; `out` must be writable.
 */
enum WrelmStatus wrelm_predictor_new(const struct WrelmModel *model,
                                     size_t ring,
                                     struct WrelmPredictor **out);

/**
 * # Safety
 * `p` must come from this library and not be used afterwards. Null is ignored.
 */
void wrelm_predictor_free(struct WrelmPredictor *p);

/**
 * Pushes the completed pair `(x, target)` and re-adapts.
 *
 * # Safety
 * `x` must point to `len` doubles.
 */
enum WrelmStatus wrelm_predictor_observe(struct WrelmPredictor *p,
                                         const double *x,
                                         size_t len,
                                         double target);

/**
 * Predicts the target following `x` with the current adapted weights.
 *
 * # Safety
 * `x` must point to `len` doubles; `out` must be writable.
 */
enum WrelmStatus wrelm_predictor_predict(struct WrelmPredictor *p,
                                         const double *x,
                                         size_t len,
                                         double *out);

/**
 * Copies the current output weights into `out` (capacity `len`). Writes the
 * neuron count to `needed` when non-null; fails with `Invalid` if `len` is short.
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum WrelmStatus wrelm_predictor_beta(const struct WrelmPredictor *p,
                                      double *out,
                                      size_t len,
                                      size_t *needed);

/**
 * Number of pairs currently held in the ring.
 *
 * # Safety
 * `p` must come from this library; `out` must be writable.
 */
enum WrelmStatus wrelm_predictor_ring_len(const struct WrelmPredictor *p, size_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WRELM_H */

#ifndef BETAREP_H
#define BETAREP_H

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Call outcome. Anything other than `Ok` leaves a message in
 `betarep_last_error`.
 */
typedef enum BetarepStatus {
  BETAREP_STATUS_OK = 0,
  BETAREP_STATUS_NULL_ARGUMENT = 1,
  BETAREP_STATUS_INVALID_GEOMETRY = 2,
  BETAREP_STATUS_INFEASIBLE_MOMENTS = 3,
  BETAREP_STATUS_DOMAIN_ERROR = 4,
  BETAREP_STATUS_INVALID_CONFIG = 5,
  BETAREP_STATUS_GRID_ERROR = 6,
  BETAREP_STATUS_INTERNAL_ERROR = 7,
} BetarepStatus;

/*
 Suppression strategy selector for `betarep_nms`.
 */
typedef enum BetarepStrategy {
  BETAREP_STRATEGY_FIOU = 0,
  BETAREP_STRATEGY_VIOU = 1,
  BETAREP_STRATEGY_FIOU_VIOU = 2,
  BETAREP_STRATEGY_SOFT = 3,
  BETAREP_STRATEGY_BETA = 4,
} BetarepStrategy;

/*
 Opaque toolkit configuration handle.
 */
typedef struct BetarepContext BetarepContext;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the most recent failing call on this thread, or null when the
 last call succeeded. The pointer stays valid until the next failing call
 on the same thread.
 */
const char *betarep_last_error(void);

/*
 New context with the default constants (weights 1/0.04, rho = sqrt(12),
 lambda = rho/4, grid 128 cells, NMS thresholds 0.5/0.35/7).
 */
struct BetarepContext *betarep_context_new(void);

/*
 New context with explicit constants; returns null (with a recorded error)
 when any value violates its invariant.
 */
struct BetarepContext *betarep_context_with_params(double w_visible,
                                                   double w_full,
                                                   double rho,
                                                   double lambda,
                                                   size_t grid_resolution,
                                                   double epsilon_floor);

/*
 Override the NMS thresholds carried by the context.
 */
enum BetarepStatus betarep_context_set_nms_thresholds(struct BetarepContext *ctx,
                                                      double iou_threshold,
                                                      double viou_threshold,
                                                      double kl_threshold);

/*
 Destroy a context created by one of the constructors. Null is a no-op.
 */
void betarep_context_free(struct BetarepContext *ctx);

/*
 Transform a full/visible box pair into the eight-parameter
 representation. `out_beta` receives `[l, t, r, b, ax, bx, ay, by]`.
 */
enum BetarepStatus betarep_boxes_to_beta(const struct BetarepContext *ctx,
                                         const double (*full)[4],
                                         const double (*visible)[4],
                                         double (*out_beta)[8]);

/*
 Approximate the visible box of a pedestrian; `out_box` receives
 `[l, t, r, b]`.
 */
enum BetarepStatus betarep_visible_box(const struct BetarepContext *ctx,
                                       const double (*beta)[8],
                                       double (*out_box)[4]);

/*
 2D beta density of a pedestrian at pixel `(x, y)`.
 */
enum BetarepStatus betarep_pdf(const struct BetarepContext *ctx,
                               const double (*beta)[8],
                               double x,
                               double y,
                               double *out_density);

/*
 Symmetrized KL divergence in nats between two pedestrians, on the
 context's grid.
 */
enum BetarepStatus betarep_sym_kl(const struct BetarepContext *ctx,
                                  const double (*a)[8],
                                  const double (*b)[8],
                                  double *out_nats);

/*
 Greedy NMS over `count` detections supplied as a row-major
 `count x 8` parameter block plus a score array.

 Kept detections are reported as indices into the input, written to
 `out_indices` (capacity `count`); `out_kept` receives how many were
 written. For the soft strategy the surviving indices are ordered by
 decayed score; rescored values are not returned through this interface.
 */
enum BetarepStatus betarep_nms(const struct BetarepContext *ctx,
                               const double *betas,
                               const double *scores,
                               size_t count,
                               enum BetarepStrategy strategy,
                               size_t *out_indices,
                               size_t *out_kept);

/*
 Render the pedestrian's beta mask onto a `height x width` grid spanning
 its boundary; `out_values` (capacity `height * width`) receives row-major
 masses summing to 1.
 */
enum BetarepStatus betarep_render_mask(const struct BetarepContext *ctx,
                                       const double (*beta)[8],
                                       size_t height,
                                       size_t width,
                                       double *out_values);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BETAREP_H */

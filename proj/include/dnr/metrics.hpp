#pragma once

#include "dnr/geometry.hpp"
#include "dnr/grid.hpp"

namespace dnr {

struct DepthMetrics {
    double absrel = 0.0;
    double delta1 = 0.0;
    double delta2 = 0.0;
};

struct NormalMetrics {
    double mean_deg = 0.0;
    double median_deg = 0.0;
    double pct_11_25 = 0.0;
};

/// Least-squares (scale, shift) minimizing sum over the mask of
/// (s * pred + t - gt)^2. Throws when pred is constant on the mask.
struct ScaleShift {
    double s = 1.0;
    double t = 0.0;
};
ScaleShift align_scale_shift(const DepthMap& pred, const DepthMap& gt, const MaskGrid& mask);

DepthMap apply_scale_shift(const DepthMap& pred, ScaleShift st);

/// AbsRel and the 1.25^k threshold accuracies over the mask. Aligned
/// predictions that land nonpositive count as threshold failures.
DepthMetrics depth_metrics(const DepthMap& pred_aligned, const DepthMap& gt, const MaskGrid& mask);

/// Angular error statistics in degrees; median takes the lower middle value
/// for even counts.
NormalMetrics normal_metrics(const NormalMap& pred, const NormalMap& gt, const MaskGrid& mask);

/// Symmetric mean nearest-neighbor L1 distance,
/// (mean_P min_Q |p - q|_1 + mean_Q min_P |q - p|_1) / 2, exact.
double chamfer_l1(const PointCloud& P, const PointCloud& Q);

}  // namespace dnr

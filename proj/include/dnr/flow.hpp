#pragma once

#include "dnr/grid.hpp"

namespace dnr {

/// Per-pixel displacement from frame i to frame i-1: the matching position in
/// the previous frame is (u - du, v - dv).
struct FlowField {
    Grid<double> du;
    Grid<double> dv;
    MaskGrid valid;

    int width() const { return du.width(); }
    int height() const { return du.height(); }
};

/// Classical brightness-constancy + smoothness flow between the current frame
/// and the previous one, `iters` Jacobi steps. Intensities are expected in
/// [0, 1]. Fallback estimator for sequences without precomputed flow.
FlowField horn_schunck(const Grid<double>& gray_i, const Grid<double>& gray_prev, double alpha = 15.0, int iters = 100);

Grid<double> flow_magnitude(const FlowField& f);

}  // namespace dnr

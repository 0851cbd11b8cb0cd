#pragma once

#include <cstdint>
#include <vector>

#include "dnr/geometry.hpp"
#include "dnr/grid.hpp"

namespace dnr {

enum class Side : uint8_t { plus, minus };

/// One discretized constraint: coeff_p * d[p] + coeff_q * d[q] = rhs, where
/// d is log-depth over the unknowns. coeff_q = -coeff_p = +/- tilde_nz.
struct ConstraintRow {
    int32_t p = -1;      // unknown index of the center pixel
    int32_t q = -1;      // unknown index of the 4-neighbor
    double coeff_p = 0;  // -tilde_nz for side+, +tilde_nz for side-
    double coeff_q = 0;
    double rhs = 0;      // -n_axis
    Axis axis = Axis::u;
    Side side = Side::plus;

    double residual(const std::vector<double>& d_log) const {
        return coeff_p * d_log[p] + coeff_q * d_log[q] - rhs;
    }
};

struct SparseConstraintSystem {
    std::vector<ConstraintRow> rows;
    int num_unknowns = 0;
    Grid<int32_t> pixel_index;        // grid position -> unknown index, -1 where invalid
    std::vector<Pixel> unknown_pixel; // unknown index -> grid position
};

struct WeightVector {
    std::vector<double> w;  // one weight per constraint row
};

/// Build the normal-integration constraint rows over valid pixels with
/// one-sided differences on the 4-neighborhood. Row order is raster order of
/// the center pixel, axis u before v, side + before -. Throws when fewer than
/// two connected valid pixels exist.
SparseConstraintSystem assemble_system(const NormalMap& n, const CameraIntrinsics& K);

/// Bilateral weights at the current iterate: for a (pixel, axis) pair with
/// both sides present, w_+ = sigmoid(k * (r_-^2 - r_+^2)) and w_- = 1 - w_+;
/// a lone side gets 0.5.
WeightVector bilateral_weights(const SparseConstraintSystem& sys, const std::vector<double>& d_log, double k);

/// Weighted quadratic residual energy sum_rows w * residual^2.
double spatial_energy(const SparseConstraintSystem& sys, const WeightVector& W, const std::vector<double>& d_log);

}  // namespace dnr

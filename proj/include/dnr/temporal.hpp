#pragma once

#include <cstdint>
#include <vector>

#include "dnr/flow.hpp"
#include "dnr/geometry.hpp"
#include "dnr/grid.hpp"

namespace dnr {

/// Pixel partition from flow magnitude: static (|flow| <= c), dynamic
/// (complement), background (static now and in the previous frame).
struct RegionMasks {
    MaskGrid static_m;
    MaskGrid dynamic_m;
    MaskGrid background_m;
};

/// Consistency/regularization weights. Defaults follow the RT-1/Bridge
/// preset; rlbench() lowers the regularization pair to 2.
struct Lambdas {
    double cd = 20.0;
    double cb = 200.0;
    double rd = 20.0;
    double rb = 20.0;

    static Lambdas rt1() { return {20.0, 200.0, 20.0, 20.0}; }
    static Lambdas rlbench() { return {20.0, 200.0, 2.0, 2.0}; }
};

/// Per-unknown diagonal quadratic sum lambda * (d - target)^2 in log-depth.
struct DiagonalQuadratic {
    std::vector<double> lambda_diag;
    std::vector<double> target;
    std::vector<uint8_t> active;
    std::vector<int32_t> flagged;  // unknowns whose nonpositive target was dropped

    static DiagonalQuadratic inactive(int num_unknowns) {
        DiagonalQuadratic q;
        q.lambda_diag.assign(num_unknowns, 0.0);
        q.target.assign(num_unknowns, 0.0);
        q.active.assign(num_unknowns, 0);
        return q;
    }

    bool any_active() const {
        for (uint8_t a : active) {
            if (a) return true;
        }
        return false;
    }
};

RegionMasks region_masks(const FlowField& f_i, const MaskGrid& static_prev, double c);

struct WarpResult {
    DepthMap warped;
    MaskGrid sample_valid;
};

/// Bilinearly sample the previous refined depth at the flow-displaced
/// position (u - du, v - dv). sample_valid is false where the footprint
/// leaves the image, touches an invalid depth pixel, or the flow is invalid.
WarpResult warp_previous_depth(const DepthMap& d_prev_refined, const FlowField& f_i);

/// Accumulate the per-pixel consistency and regularization contributions into
/// one diagonal quadratic over the unknowns. Targets enter in log space;
/// contributions with nonpositive depth targets are dropped and flagged.
DiagonalQuadratic temporal_terms(const RegionMasks& masks, const WarpResult& warp, const DepthMap& d_generated,
                                 const Lambdas& lambdas, const Grid<int32_t>& pixel_index, int num_unknowns);

double temporal_energy(const std::vector<double>& d_log, const DiagonalQuadratic& q);

}  // namespace dnr

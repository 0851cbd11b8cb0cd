#include "dnr/temporal.hpp"

#include <cmath>
#include <stdexcept>

namespace dnr {

RegionMasks region_masks(const FlowField& f_i, const MaskGrid& static_prev, double c) {
    if (!(c >= 0.0)) throw std::invalid_argument("region_masks: threshold must be nonnegative");
    if (!static_prev.same_size(f_i.du)) throw std::invalid_argument("region_masks: static_prev size mismatch");

    const int W = f_i.width();
    const int H = f_i.height();
    RegionMasks m{MaskGrid(W, H), MaskGrid(W, H), MaskGrid(W, H)};
    for (int v = 0; v < H; ++v) {
        for (int u = 0; u < W; ++u) {
            const double du = f_i.du(u, v);
            const double dv = f_i.dv(u, v);
            // Invalid flow counts as dynamic: no trusted motion bound there.
            const bool is_static = f_i.valid(u, v) && std::sqrt(du * du + dv * dv) <= c;
            m.static_m(u, v) = is_static ? 1 : 0;
            m.dynamic_m(u, v) = is_static ? 0 : 1;
            m.background_m(u, v) = (is_static && static_prev(u, v)) ? 1 : 0;
        }
    }
    return m;
}

WarpResult warp_previous_depth(const DepthMap& d_prev_refined, const FlowField& f_i) {
    if (!d_prev_refined.values.same_size(f_i.du)) throw std::invalid_argument("warp_previous_depth: size mismatch");

    const int W = f_i.width();
    const int H = f_i.height();
    WarpResult out{DepthMap{Grid<double>(W, H), MaskGrid(W, H, 0), d_prev_refined.unit}, MaskGrid(W, H, 0)};

    for (int v = 0; v < H; ++v) {
        for (int u = 0; u < W; ++u) {
            if (!f_i.valid(u, v)) continue;
            const double x = u - f_i.du(u, v);
            const double y = v - f_i.dv(u, v);
            const int x0 = static_cast<int>(std::floor(x));
            const int y0 = static_cast<int>(std::floor(y));
            const double ax = x - x0;
            const double ay = y - y0;

            // Corners with zero bilinear weight are not part of the footprint.
            double value = 0.0;
            bool ok = true;
            const double wts[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
            const int cu[4] = {x0, x0 + 1, x0, x0 + 1};
            const int cv[4] = {y0, y0, y0 + 1, y0 + 1};
            for (int k = 0; k < 4 && ok; ++k) {
                if (wts[k] == 0.0) continue;
                if (!d_prev_refined.values.inside(cu[k], cv[k]) || !d_prev_refined.valid(cu[k], cv[k])) {
                    ok = false;
                    break;
                }
                value += wts[k] * d_prev_refined.values(cu[k], cv[k]);
            }
            if (!ok) continue;
            out.warped.values(u, v) = value;
            out.warped.valid(u, v) = 1;
            out.sample_valid(u, v) = 1;
        }
    }
    return out;
}

DiagonalQuadratic temporal_terms(const RegionMasks& masks, const WarpResult& warp, const DepthMap& d_generated,
                                 const Lambdas& lambdas, const Grid<int32_t>& pixel_index, int num_unknowns) {
    if (!(lambdas.cd >= 0.0 && lambdas.cb >= 0.0 && lambdas.rd >= 0.0 && lambdas.rb >= 0.0)) {
        throw std::invalid_argument("temporal_terms: lambdas must be nonnegative");
    }
    if (!masks.static_m.same_size(pixel_index) || !warp.sample_valid.same_size(pixel_index) ||
        !d_generated.values.same_size(pixel_index)) {
        throw std::invalid_argument("temporal_terms: size mismatch");
    }

    DiagonalQuadratic q = DiagonalQuadratic::inactive(num_unknowns);
    std::vector<double> weighted_target(num_unknowns, 0.0);

    const int W = pixel_index.width();
    const int H = pixel_index.height();
    for (int v = 0; v < H; ++v) {
        for (int u = 0; u < W; ++u) {
            const int32_t idx = pixel_index(u, v);
            if (idx < 0) continue;

            const bool dynamic = masks.dynamic_m(u, v) != 0;
            const bool background = masks.background_m(u, v) != 0;
            const bool warped_ok = warp.sample_valid(u, v) != 0;

            auto add = [&](double lambda, double depth_target) {
                if (lambda <= 0.0) return;
                if (!(depth_target > 0.0) || !std::isfinite(depth_target)) {
                    if (q.flagged.empty() || q.flagged.back() != idx) q.flagged.push_back(idx);
                    return;
                }
                q.lambda_diag[idx] += lambda;
                weighted_target[idx] += lambda * std::log(depth_target);
            };

            if (dynamic && warped_ok) add(lambdas.cd, warp.warped.values(u, v));
            if (background && warped_ok) add(lambdas.cb, warp.warped.values(u, v));
            if (dynamic && d_generated.valid(u, v)) add(lambdas.rd, d_generated.values(u, v));
            if (background && d_generated.valid(u, v)) add(lambdas.rb, d_generated.values(u, v));
        }
    }

    for (int i = 0; i < num_unknowns; ++i) {
        if (q.lambda_diag[i] > 0.0) {
            q.active[i] = 1;
            q.target[i] = weighted_target[i] / q.lambda_diag[i];
        }
    }
    return q;
}

double temporal_energy(const std::vector<double>& d_log, const DiagonalQuadratic& q) {
    if (d_log.size() != q.lambda_diag.size()) throw std::invalid_argument("temporal_energy: size mismatch");
    double e = 0.0;
    for (size_t i = 0; i < d_log.size(); ++i) {
        if (!q.active[i]) continue;
        const double r = d_log[i] - q.target[i];
        e += q.lambda_diag[i] * r * r;
    }
    return e;
}

}  // namespace dnr

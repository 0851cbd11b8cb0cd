#include "dnr/integration.hpp"

#include <cmath>
#include <stdexcept>

namespace dnr {

namespace {

double clamped_sigmoid(double x) {
    // Clamp keeps weights strictly inside (0, 1) in double precision.
    const double kMaxArg = 36.0;
    if (x > kMaxArg) x = kMaxArg;
    if (x < -kMaxArg) x = -kMaxArg;
    return 1.0 / (1.0 + std::exp(-x));
}

}  // namespace

SparseConstraintSystem assemble_system(const NormalMap& n, const CameraIntrinsics& K) {
    K.validate();
    if (!n.vectors.same_size(K.width, K.height)) throw std::invalid_argument("assemble_system: normal/intrinsics size mismatch");

    const int W = n.width();
    const int H = n.height();

    SparseConstraintSystem sys;
    sys.pixel_index = Grid<int32_t>(W, H, -1);
    for (int v = 0; v < H; ++v) {
        for (int u = 0; u < W; ++u) {
            if (n.valid(u, v)) {
                sys.pixel_index(u, v) = sys.num_unknowns++;
                sys.unknown_pixel.push_back({u, v});
            }
        }
    }

    struct Neighbor {
        int du, dv;
        Axis axis;
        Side side;
    };
    // Emission order per pixel: axis u before v, side + before -.
    const Neighbor neighbors[4] = {
        {+1, 0, Axis::u, Side::plus},
        {-1, 0, Axis::u, Side::minus},
        {0, +1, Axis::v, Side::plus},
        {0, -1, Axis::v, Side::minus},
    };

    for (int v = 0; v < H; ++v) {
        for (int u = 0; u < W; ++u) {
            const int32_t pi = sys.pixel_index(u, v);
            if (pi < 0) continue;
            const Vec3& normal = n.vectors(u, v);
            for (const Neighbor& nb : neighbors) {
                const int qu = u + nb.du;
                const int qv = v + nb.dv;
                if (!sys.pixel_index.inside(qu, qv)) continue;
                const int32_t qi = sys.pixel_index(qu, qv);
                if (qi < 0) continue;

                const double tnz = compute_tilde_nz({u, v}, normal, K, nb.axis);
                const double n_axis = (nb.axis == Axis::u) ? normal.x : normal.y;

                ConstraintRow row;
                row.p = pi;
                row.q = qi;
                row.axis = nb.axis;
                row.side = nb.side;
                row.rhs = -n_axis;
                if (nb.side == Side::plus) {
                    // tilde_nz * (d_q - d_p) + n_axis = 0
                    row.coeff_p = -tnz;
                    row.coeff_q = tnz;
                } else {
                    // tilde_nz * (d_p - d_q) + n_axis = 0
                    row.coeff_p = tnz;
                    row.coeff_q = -tnz;
                }
                sys.rows.push_back(row);
            }
        }
    }

    if (sys.num_unknowns < 2 || sys.rows.empty()) {
        throw std::invalid_argument("assemble_system: need at least two connected valid pixels");
    }
    return sys;
}

WeightVector bilateral_weights(const SparseConstraintSystem& sys, const std::vector<double>& d_log, double k) {
    if (static_cast<int>(d_log.size()) != sys.num_unknowns) throw std::invalid_argument("bilateral_weights: iterate size mismatch");
    if (!(k >= 0.0)) throw std::invalid_argument("bilateral_weights: stiffness must be nonnegative");
    for (double d : d_log) {
        if (!std::isfinite(d)) throw std::invalid_argument("bilateral_weights: non-finite iterate");
    }

    WeightVector out;
    out.w.assign(sys.rows.size(), 0.5);
    // Rows for a (pixel, axis) pair are adjacent with side + first.
    for (size_t i = 0; i < sys.rows.size(); ++i) {
        const ConstraintRow& a = sys.rows[i];
        if (a.side != Side::plus || i + 1 >= sys.rows.size()) continue;
        const ConstraintRow& b = sys.rows[i + 1];
        if (b.side != Side::minus || b.p != a.p || b.axis != a.axis) continue;
        const double r_plus = a.residual(d_log);
        const double r_minus = b.residual(d_log);
        const double w_plus = clamped_sigmoid(k * (r_minus * r_minus - r_plus * r_plus));
        out.w[i] = w_plus;
        out.w[i + 1] = 1.0 - w_plus;
        ++i;
    }
    return out;
}

double spatial_energy(const SparseConstraintSystem& sys, const WeightVector& W, const std::vector<double>& d_log) {
    if (W.w.size() != sys.rows.size()) throw std::invalid_argument("spatial_energy: weight count mismatch");
    if (static_cast<int>(d_log.size()) != sys.num_unknowns) throw std::invalid_argument("spatial_energy: iterate size mismatch");
    double e = 0.0;
    for (size_t i = 0; i < sys.rows.size(); ++i) {
        const double r = sys.rows[i].residual(d_log);
        e += W.w[i] * r * r;
    }
    return e;
}

}  // namespace dnr

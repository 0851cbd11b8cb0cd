#include "dnr/flow.hpp"

#include <cmath>
#include <stdexcept>

namespace dnr {

namespace {

// Clamped access (Neumann boundary).
double sample(const Grid<double>& img, int u, int v) {
    if (u < 0) u = 0;
    if (v < 0) v = 0;
    if (u >= img.width()) u = img.width() - 1;
    if (v >= img.height()) v = img.height() - 1;
    return img(u, v);
}

}  // namespace

FlowField horn_schunck(const Grid<double>& gray_i, const Grid<double>& gray_prev, double alpha, int iters) {
    if (!gray_i.same_size(gray_prev)) throw std::invalid_argument("horn_schunck: frame size mismatch");
    if (!(alpha > 0.0)) throw std::invalid_argument("horn_schunck: alpha must be positive");
    if (iters < 0) throw std::invalid_argument("horn_schunck: negative iteration count");

    const int W = gray_i.width();
    const int H = gray_i.height();

    // The classical smoothness weights assume 8-bit intensity units; inputs
    // arrive normalized to [0, 1], so the derivatives are scaled back up.
    Grid<double> a = gray_i;
    Grid<double> b = gray_prev;
    for (size_t i = 0; i < a.size(); ++i) {
        a.data()[i] = 255.0 * gray_i.data()[i];
        b.data()[i] = 255.0 * gray_prev.data()[i];
    }
    Grid<double> Ex(W, H), Ey(W, H), Et(W, H);
    for (int v = 0; v < H; ++v) {
        for (int u = 0; u < W; ++u) {
            Ex(u, v) = 0.25 * (sample(a, u + 1, v) - sample(a, u, v) + sample(a, u + 1, v + 1) - sample(a, u, v + 1) +
                               sample(b, u + 1, v) - sample(b, u, v) + sample(b, u + 1, v + 1) - sample(b, u, v + 1));
            Ey(u, v) = 0.25 * (sample(a, u, v + 1) - sample(a, u, v) + sample(a, u + 1, v + 1) - sample(a, u + 1, v) +
                               sample(b, u, v + 1) - sample(b, u, v) + sample(b, u + 1, v + 1) - sample(b, u + 1, v));
            Et(u, v) = 0.25 * (sample(b, u, v) - sample(a, u, v) + sample(b, u + 1, v) - sample(a, u + 1, v) +
                               sample(b, u, v + 1) - sample(a, u, v + 1) + sample(b, u + 1, v + 1) - sample(a, u + 1, v + 1));
        }
    }

    Grid<double> fu(W, H, 0.0), fv(W, H, 0.0);
    Grid<double> fu_bar(W, H), fv_bar(W, H);
    const double alpha2 = alpha * alpha;
    for (int it = 0; it < iters; ++it) {
        for (int v = 0; v < H; ++v) {
            for (int u = 0; u < W; ++u) {
                fu_bar(u, v) = (sample(fu, u - 1, v) + sample(fu, u + 1, v) + sample(fu, u, v - 1) + sample(fu, u, v + 1)) / 6.0 +
                               (sample(fu, u - 1, v - 1) + sample(fu, u + 1, v - 1) + sample(fu, u - 1, v + 1) + sample(fu, u + 1, v + 1)) / 12.0;
                fv_bar(u, v) = (sample(fv, u - 1, v) + sample(fv, u + 1, v) + sample(fv, u, v - 1) + sample(fv, u, v + 1)) / 6.0 +
                               (sample(fv, u - 1, v - 1) + sample(fv, u + 1, v - 1) + sample(fv, u - 1, v + 1) + sample(fv, u + 1, v + 1)) / 12.0;
            }
        }
        for (int v = 0; v < H; ++v) {
            for (int u = 0; u < W; ++u) {
                const double ex = Ex(u, v);
                const double ey = Ey(u, v);
                const double t = (ex * fu_bar(u, v) + ey * fv_bar(u, v) + Et(u, v)) / (alpha2 + ex * ex + ey * ey);
                fu(u, v) = fu_bar(u, v) - ex * t;
                fv(u, v) = fv_bar(u, v) - ey * t;
            }
        }
    }

    // The iteration estimates the current->previous match at (u + fu, v + fv);
    // stored flow uses the (u - du, v - dv) convention, hence the sign flip.
    FlowField out{Grid<double>(W, H), Grid<double>(W, H), MaskGrid(W, H, 1)};
    for (int v = 0; v < H; ++v) {
        for (int u = 0; u < W; ++u) {
            out.du(u, v) = -fu(u, v);
            out.dv(u, v) = -fv(u, v);
        }
    }
    return out;
}

Grid<double> flow_magnitude(const FlowField& f) {
    Grid<double> mag(f.width(), f.height());
    for (int v = 0; v < f.height(); ++v) {
        for (int u = 0; u < f.width(); ++u) {
            const double du = f.du(u, v);
            const double dv = f.dv(u, v);
            mag(u, v) = std::sqrt(du * du + dv * dv);
        }
    }
    return mag;
}

}  // namespace dnr

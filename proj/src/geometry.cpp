#include "dnr/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dnr {

void CameraIntrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("CameraIntrinsics: focal lengths must be positive");
    if (!std::isfinite(fx) || !std::isfinite(fy) || !std::isfinite(cx) || !std::isfinite(cy)) {
        throw std::invalid_argument("CameraIntrinsics: non-finite parameter");
    }
    if (width <= 0 || height <= 0) throw std::invalid_argument("CameraIntrinsics: image size must be positive");
}

DepthMap make_relative_depth(Grid<double> values, MaskGrid valid) {
    if (!values.same_size(valid)) throw std::invalid_argument("make_relative_depth: size mismatch");
    for (size_t i = 0; i < values.size(); ++i) {
        if (!valid.data()[i]) continue;
        const double r = values.data()[i];
        if (!std::isfinite(r) || r <= kMinRelativeDepth || r > 1.0) valid.data()[i] = 0;
    }
    return DepthMap{std::move(values), std::move(valid), DepthUnit::relative};
}

DepthMap make_metric_depth(Grid<double> values, MaskGrid valid) {
    if (!values.same_size(valid)) throw std::invalid_argument("make_metric_depth: size mismatch");
    for (size_t i = 0; i < values.size(); ++i) {
        if (!valid.data()[i]) continue;
        const double d = values.data()[i];
        if (!std::isfinite(d) || d <= 0.0) valid.data()[i] = 0;
    }
    return DepthMap{std::move(values), std::move(valid), DepthUnit::metric};
}

double compute_tilde_nz(Pixel p, const Vec3& n, const CameraIntrinsics& K, Axis axis) {
    K.validate();
    if (!n.finite()) throw std::invalid_argument("compute_tilde_nz: non-finite normal");
    if (std::abs(n.norm() - 1.0) > 1e-6) throw std::invalid_argument("compute_tilde_nz: normal must be unit length");
    if (p.u < 0 || p.u >= K.width || p.v < 0 || p.v >= K.height) {
        throw std::invalid_argument("compute_tilde_nz: pixel outside image");
    }
    const double du = p.u - K.cx;
    const double dv = p.v - K.cy;
    if (axis == Axis::u) {
        return n.x * du + (K.fx / K.fy) * n.y * dv + n.z * K.fx;
    }
    return (K.fy / K.fx) * n.x * du + n.y * dv + n.z * K.fy;
}

PointCloud backproject(const DepthMap& d, const CameraIntrinsics& K, const ColorImage* rgb) {
    K.validate();
    if (d.unit != DepthUnit::metric) throw std::invalid_argument("backproject: depth must be metric");
    if (!d.values.same_size(K.width, K.height)) throw std::invalid_argument("backproject: depth/intrinsics size mismatch");
    if (rgb && !rgb->same_size(d.values)) throw std::invalid_argument("backproject: depth/rgb size mismatch");

    PointCloud pc;
    pc.points.reserve(d.values.size());
    if (rgb) pc.colors.reserve(d.values.size());
    for (int v = 0; v < d.height(); ++v) {
        for (int u = 0; u < d.width(); ++u) {
            if (!d.valid(u, v)) continue;
            const double z = d.values(u, v);
            pc.points.push_back({z * (u - K.cx) / K.fx, z * (v - K.cy) / K.fy, z});
            if (rgb) pc.colors.push_back((*rgb)(u, v));
        }
    }
    return pc;
}

NormalMap depth_to_normal(const DepthMap& d, const CameraIntrinsics& K) {
    K.validate();
    if (d.unit != DepthUnit::metric) throw std::invalid_argument("depth_to_normal: depth must be metric");
    if (!d.values.same_size(K.width, K.height)) throw std::invalid_argument("depth_to_normal: depth/intrinsics size mismatch");

    const int W = d.width();
    const int H = d.height();
    auto point_at = [&](int u, int v) -> Vec3 {
        const double z = d.values(u, v);
        return {z * (u - K.cx) / K.fx, z * (v - K.cy) / K.fy, z};
    };

    NormalMap out{Grid<Vec3>(W, H), MaskGrid(W, H, 0)};
    for (int v = 1; v < H - 1; ++v) {
        for (int u = 1; u < W - 1; ++u) {
            if (!d.valid(u, v) || !d.valid(u - 1, v) || !d.valid(u + 1, v) || !d.valid(u, v - 1) || !d.valid(u, v + 1)) {
                continue;
            }
            const Vec3 du = point_at(u + 1, v) - point_at(u - 1, v);
            const Vec3 dv = point_at(u, v + 1) - point_at(u, v - 1);
            Vec3 n = du.cross(dv);
            const double norm = n.norm();
            if (norm == 0.0 || !std::isfinite(norm)) continue;  // degenerate: leave invalid
            n = n / norm;
            if (n.dot(point_at(u, v)) > 0.0) n = -n;  // camera-facing
            out.vectors(u, v) = n;
            out.valid(u, v) = 1;
        }
    }
    return out;
}

DepthMap relative_to_metric(const DepthMap& d, double near, double far) {
    if (d.unit != DepthUnit::relative) throw std::invalid_argument("relative_to_metric: depth must be relative");
    if (!(near > 0.0) || !(near < far)) throw std::invalid_argument("relative_to_metric: require 0 < near < far");

    DepthMap out{Grid<double>(d.width(), d.height()), d.valid, DepthUnit::metric};
    for (int v = 0; v < d.height(); ++v) {
        for (int u = 0; u < d.width(); ++u) {
            if (d.valid(u, v)) out.values(u, v) = near + d.values(u, v) * (far - near);
        }
    }
    return out;
}

}  // namespace dnr

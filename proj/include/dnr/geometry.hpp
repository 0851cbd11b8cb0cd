#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "dnr/grid.hpp"

namespace dnr {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    Vec3 normalized() const {
        const double n = norm();
        return {x / n, y / n, z / n};
    }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

struct Pixel {
    int u = 0;
    int v = 0;
};

/// Pinhole camera, x right, y down, z into the scene.
struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;

    void validate() const;
};

enum class DepthUnit { relative, metric, log };

/// Relative depth at or below this value is treated as invalid (log-depth
/// is undefined at zero).
inline constexpr double kMinRelativeDepth = 1e-4;

struct DepthMap {
    Grid<double> values;
    MaskGrid valid;
    DepthUnit unit = DepthUnit::relative;

    int width() const { return values.width(); }
    int height() const { return values.height(); }
};

struct NormalMap {
    Grid<Vec3> vectors;
    MaskGrid valid;

    int width() const { return vectors.width(); }
    int height() const { return vectors.height(); }
};

using Rgb = std::array<uint8_t, 3>;
using ColorImage = Grid<Rgb>;

struct PointCloud {
    std::vector<Vec3> points;
    std::vector<Rgb> colors;  // empty, or one entry per point

    bool has_colors() const { return !colors.empty(); }
};

enum class Axis : uint8_t { u, v };

/// Relative depth map from raw values; values <= kMinRelativeDepth or outside
/// [0, 1] are marked invalid.
DepthMap make_relative_depth(Grid<double> values, MaskGrid valid);

/// Metric depth map from raw values; nonpositive values are marked invalid.
DepthMap make_metric_depth(Grid<double> values, MaskGrid valid);

/// Per-pixel coefficient coupling the normal to the log-depth derivative
/// under the pinhole model. For fx == fy == f both axes reduce to
/// n_x(u - cx) + n_y(v - cy) + n_z * f.
double compute_tilde_nz(Pixel p, const Vec3& n, const CameraIntrinsics& K, Axis axis);

/// Back-project a metric depth map into a camera-frame point cloud.
/// Colors, when rgb is given, are copied per valid pixel.
PointCloud backproject(const DepthMap& d, const CameraIntrinsics& K, const ColorImage* rgb = nullptr);

/// Normals from metric depth via central differences on the back-projected
/// point grid; camera-facing sign (n_z <= 0). Border pixels and pixels with
/// invalid neighbors come out invalid.
NormalMap depth_to_normal(const DepthMap& d, const CameraIntrinsics& K);

/// Map relative depth in [0, 1] to metric depth in [near, far].
DepthMap relative_to_metric(const DepthMap& d, double near, double far);

}  // namespace dnr

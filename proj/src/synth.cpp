#include "dnr/synth.hpp"

#include <cmath>
#include <stdexcept>

namespace dnr {

SceneKind scene_kind_from_string(const std::string& name) {
    if (name == "fronto_plane") return SceneKind::fronto_plane;
    if (name == "slanted_plane") return SceneKind::slanted_plane;
    if (name == "sphere") return SceneKind::sphere;
    if (name == "two_planes") return SceneKind::two_planes;
    if (name == "moving_box") return SceneKind::moving_box;
    throw std::invalid_argument("unknown scene kind: " + name);
}

std::string to_string(SceneKind kind) {
    switch (kind) {
        case SceneKind::fronto_plane: return "fronto_plane";
        case SceneKind::slanted_plane: return "slanted_plane";
        case SceneKind::sphere: return "sphere";
        case SceneKind::two_planes: return "two_planes";
        case SceneKind::moving_box: return "moving_box";
    }
    throw std::logic_error("unreachable");
}

void SceneSpec::validate() const {
    if (width < 16 || height < 16) throw std::invalid_argument("SceneSpec: size must be at least 16x16");
    if (frames < 1) throw std::invalid_argument("SceneSpec: need at least one frame");
    if (!(noise_sigma >= 0.0)) throw std::invalid_argument("SceneSpec: noise_sigma must be nonnegative");
    if (motion_per_frame.z != 0.0) throw std::invalid_argument("SceneSpec: box motion must be fronto-parallel (z = 0)");
}

CameraIntrinsics default_intrinsics(int width, int height) {
    CameraIntrinsics K;
    K.fx = K.fy = static_cast<double>(std::max(width, height));
    K.cx = (width - 1) / 2.0;
    K.cy = (height - 1) / 2.0;
    K.width = width;
    K.height = height;
    return K;
}

namespace {

// splitmix64 + Box-Muller; self-contained so sequences are reproducible
// independent of the standard library's distributions.
class SeededRng {
  public:
    explicit SeededRng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

  private:
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

constexpr double kSlantSlope = 0.2;     // slanted plane: z = 1 + 0.2 x
constexpr double kSphereZ = 1.5;        // sphere center depth
constexpr double kSphereRadius = 0.5;
constexpr double kBackgroundZ = 2.0;    // behind the sphere
constexpr double kTwoPlanesNear = 1.0;
constexpr double kTwoPlanesFar = 1.5;
constexpr double kBoxZ = 1.0;
constexpr double kBoxBackgroundZ = 1.5;
constexpr double kBoxHalfExtent = 0.15;  // meters at z = 1

struct Surface {
    double depth;
    Vec3 normal;
    uint8_t region;
};

Vec3 camera_facing(Vec3 n) { return n.z > 0.0 ? -n : n; }

Surface sample_scene(SceneKind kind, double a, double b, const Vec3& box_center) {
    switch (kind) {
        case SceneKind::fronto_plane:
            return {1.0, {0.0, 0.0, -1.0}, 0};
        case SceneKind::slanted_plane: {
            const double z = 1.0 / (1.0 - kSlantSlope * a);
            return {z, camera_facing(Vec3{-kSlantSlope, 0.0, 1.0}.normalized()), 0};
        }
        case SceneKind::sphere: {
            const double rr = 1.0 + a * a + b * b;
            const double rc = kSphereZ;  // ray.dot(center) with center on the axis
            const double disc = rc * rc - rr * (kSphereZ * kSphereZ - kSphereRadius * kSphereRadius);
            if (disc < 0.0) return {kBackgroundZ, {0.0, 0.0, -1.0}, 0};
            const double z = (rc - std::sqrt(disc)) / rr;
            const Vec3 p{a * z, b * z, z};
            return {z, camera_facing((p - Vec3{0.0, 0.0, kSphereZ}).normalized()), 1};
        }
        case SceneKind::two_planes:
            if (a < 0.0) return {kTwoPlanesNear, {0.0, 0.0, -1.0}, 0};
            return {kTwoPlanesFar, {0.0, 0.0, -1.0}, 1};
        case SceneKind::moving_box: {
            const double x = a * kBoxZ;
            const double y = b * kBoxZ;
            if (std::abs(x - box_center.x) <= kBoxHalfExtent && std::abs(y - box_center.y) <= kBoxHalfExtent) {
                return {kBoxZ, {0.0, 0.0, -1.0}, 1};
            }
            return {kBoxBackgroundZ, {0.0, 0.0, -1.0}, 0};
        }
    }
    throw std::logic_error("unreachable");
}

Rgb checker(int u, int v, int cell, Rgb on, Rgb off) {
    const int parity = ((u >= 0 ? u / cell : (u - cell + 1) / cell) + (v >= 0 ? v / cell : (v - cell + 1) / cell)) & 1;
    return parity ? on : off;
}

Vec3 jitter_normal(const Vec3& n, double sigma_rad, SeededRng& rng) {
    const double angle = sigma_rad * rng.normal();
    // Random rotation axis, drawn until usably far from n.
    Vec3 axis;
    do {
        axis = Vec3{rng.normal(), rng.normal(), rng.normal()};
    } while (axis.norm() < 1e-9);
    axis = axis.normalized();
    Vec3 perp = axis - n * axis.dot(n);
    if (perp.norm() < 1e-9) return n;
    perp = perp.normalized();
    // Rodrigues about an axis orthogonal to n reduces to this in-plane turn.
    Vec3 rotated = n * std::cos(angle) + perp.cross(n) * std::sin(angle);
    return camera_facing(rotated.normalized());
}

}  // namespace

std::vector<SceneFrame> generate(const SceneSpec& spec, const CameraIntrinsics& K) {
    spec.validate();
    K.validate();
    if (K.width != spec.width || K.height != spec.height) {
        throw std::invalid_argument("generate: intrinsics size must match the scene size");
    }

    const int W = spec.width;
    const int H = spec.height;

    // Box trajectory, centered over the sequence.
    const Vec3 motion = spec.motion_per_frame;
    const Vec3 box_start{-(spec.frames - 1) * motion.x / 2.0, -(spec.frames - 1) * motion.y / 2.0, 0.0};
    auto box_center_at = [&](int frame) {
        return Vec3{box_start.x + frame * motion.x, box_start.y + frame * motion.y, 0.0};
    };
    if (spec.kind == SceneKind::moving_box) {
        for (int i = 0; i < spec.frames; ++i) {
            const Vec3 c = box_center_at(i);
            const double u_lo = K.cx + K.fx * (c.x - kBoxHalfExtent) / kBoxZ;
            const double u_hi = K.cx + K.fx * (c.x + kBoxHalfExtent) / kBoxZ;
            const double v_lo = K.cy + K.fy * (c.y - kBoxHalfExtent) / kBoxZ;
            const double v_hi = K.cy + K.fy * (c.y + kBoxHalfExtent) / kBoxZ;
            if (u_lo < 2.0 || v_lo < 2.0 || u_hi > W - 3.0 || v_hi > H - 3.0) {
                throw std::invalid_argument("generate: box leaves the frustum at frame " + std::to_string(i));
            }
        }
    }

    auto on_box = [&](int u, int v, int frame) {
        if (spec.kind != SceneKind::moving_box) return false;
        const Vec3 c = box_center_at(frame);
        const double x = (u - K.cx) / K.fx * kBoxZ;
        const double y = (v - K.cy) / K.fy * kBoxZ;
        return std::abs(x - c.x) <= kBoxHalfExtent && std::abs(y - c.y) <= kBoxHalfExtent;
    };

    std::vector<SceneFrame> frames;
    frames.reserve(spec.frames);
    for (int i = 0; i < spec.frames; ++i) {
        SceneFrame f{ColorImage(W, H),
                     DepthMap{Grid<double>(W, H), MaskGrid(W, H, 1), DepthUnit::metric},
                     NormalMap{Grid<Vec3>(W, H), MaskGrid(W, H, 1)},
                     std::nullopt,
                     DepthMap{Grid<double>(W, H), MaskGrid(W, H, 1), DepthUnit::metric},
                     NormalMap{Grid<Vec3>(W, H), MaskGrid(W, H, 1)},
                     MaskGrid(W, H, 0)};

        const Vec3 box_c = box_center_at(i);
        SeededRng rng(spec.seed * 0x9e3779b97f4a7c15ULL + 0xd1b54a32d192ed03ULL * (i + 1));

        for (int v = 0; v < H; ++v) {
            for (int u = 0; u < W; ++u) {
                const double a = (u - K.cx) / K.fx;
                const double b = (v - K.cy) / K.fy;
                const Surface s = sample_scene(spec.kind, a, b, box_c);
                f.gt_depth.values(u, v) = s.depth;
                f.gt_normal.vectors(u, v) = s.normal;
                f.region(u, v) = s.region;

                double factor = 1.0 + spec.noise_sigma * rng.normal();
                if (factor < 0.01) factor = 0.01;
                f.gen_depth.values(u, v) = s.depth * factor;
                f.gen_normal.vectors(u, v) =
                    spec.noise_sigma > 0.0 ? jitter_normal(s.normal, spec.noise_sigma, rng) : s.normal;

                if (s.region == 1 && spec.kind == SceneKind::moving_box) {
                    const int lu = static_cast<int>(std::floor(u - K.fx * box_c.x / kBoxZ));
                    const int lv = static_cast<int>(std::floor(v - K.fy * box_c.y / kBoxZ));
                    f.rgb(u, v) = checker(lu, lv, 6, {220, 60, 60}, {250, 200, 80});
                } else {
                    f.rgb(u, v) = checker(u, v, 8, {40, 90, 160}, {200, 210, 225});
                }
            }
        }

        if (i > 0) {
            FlowField flow{Grid<double>(W, H, 0.0), Grid<double>(W, H, 0.0), MaskGrid(W, H, 1)};
            if (spec.kind == SceneKind::moving_box) {
                const double flow_du = K.fx * motion.x / kBoxZ;
                const double flow_dv = K.fy * motion.y / kBoxZ;
                for (int v = 0; v < H; ++v) {
                    for (int u = 0; u < W; ++u) {
                        if (on_box(u, v, i)) {
                            flow.du(u, v) = flow_du;
                            flow.dv(u, v) = flow_dv;
                        } else if (on_box(u, v, i - 1)) {
                            flow.valid(u, v) = 0;  // disoccluded: previous frame shows the box here
                        }
                    }
                }
            }
            f.gt_flow_to_prev = std::move(flow);
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

}  // namespace dnr

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dnr/geometry.hpp"
#include "dnr/synth.hpp"
#include "support/oracles.hpp"

using namespace dnr;
using dnr::testing::TestRng;

namespace {

CameraIntrinsics make_intrinsics(double fx, double fy, double cx, double cy, int w = 256, int h = 256) {
    return CameraIntrinsics{fx, fy, cx, cy, w, h};
}

DepthMap constant_metric_depth(int w, int h, double z) {
    return DepthMap{Grid<double>(w, h, z), MaskGrid(w, h, 1), DepthUnit::metric};
}

}  // namespace

TEST_CASE("compute_tilde_nz matches the closed form") {
    SUBCASE("fronto-parallel normal keeps only the focal term") {
        const auto K = make_intrinsics(100, 100, 10, 10);
        CHECK(compute_tilde_nz({5, 7}, {0, 0, -1}, K, Axis::u) == doctest::Approx(-100.0));
        CHECK(compute_tilde_nz({19, 2}, {0, 0, -1}, K, Axis::v) == doctest::Approx(-100.0));
    }
    SUBCASE("pure x normal reduces to u - cx") {
        const auto K = make_intrinsics(50, 50, 3, 9);
        CHECK(compute_tilde_nz({8, 9}, {1, 0, 0}, K, Axis::u) == doctest::Approx(5.0));
    }
    SUBCASE("mixed normal") {
        const auto K = make_intrinsics(50, 50, 10, 12);
        CHECK(compute_tilde_nz({20, 12}, {0.6, 0, -0.8}, K, Axis::u) == doctest::Approx(-34.0));
    }
}

TEST_CASE("compute_tilde_nz with fx == fy equals the single-focal formula") {
    TestRng rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        const double f = rng.uniform(20.0, 500.0);
        const auto K = make_intrinsics(f, f, rng.uniform(100.0, 156.0), rng.uniform(100.0, 156.0));
        const Pixel p{rng.uniform_int(0, 255), rng.uniform_int(0, 255)};
        const Vec3 n = rng.random_normal();
        const double direct = n.x * (p.u - K.cx) + n.y * (p.v - K.cy) + n.z * f;
        for (Axis axis : {Axis::u, Axis::v}) {
            CHECK(std::abs(compute_tilde_nz(p, n, K, axis) - direct) <= 1e-12 * std::max(1.0, std::abs(direct)));
        }
    }
}

TEST_CASE("compute_tilde_nz rejects bad input") {
    const auto K = make_intrinsics(100, 100, 8, 8, 16, 16);
    CHECK_THROWS(compute_tilde_nz({0, 0}, {std::nan(""), 0, -1}, K, Axis::u));
    CHECK_THROWS(compute_tilde_nz({0, 0}, {0, 0, -0.5}, K, Axis::u));  // not unit
    CHECK_THROWS(compute_tilde_nz({20, 0}, {0, 0, -1}, K, Axis::u));   // outside
}

TEST_CASE("backproject basics") {
    const auto K = make_intrinsics(80, 60, 7, 5, 16, 16);
    DepthMap d = constant_metric_depth(16, 16, 2.0);

    const PointCloud pc = backproject(d, K);
    REQUIRE(pc.points.size() == 16 * 16);

    SUBCASE("principal point goes straight down the axis") {
        // pixel (7, 5) is the principal point
        const Vec3 p = pc.points[5 * 16 + 7];
        CHECK(p.x == doctest::Approx(0.0));
        CHECK(p.y == doctest::Approx(0.0));
        CHECK(p.z == doctest::Approx(2.0));
    }
    SUBCASE("constant depth keeps all z equal") {
        for (const Vec3& p : pc.points) CHECK(p.z == 2.0);
    }
}

TEST_CASE("backproject unit offset") {
    // u - cx = fx and v = cy at depth 1 lands at x = 1.
    const auto K = make_intrinsics(9.0, 9.0, 2.0, 3.0, 16, 16);
    const DepthMap d = constant_metric_depth(16, 16, 1.0);
    const PointCloud pc = backproject(d, K);
    const Vec3 p = pc.points[3 * 16 + 11];
    CHECK(p.x == doctest::Approx(1.0));
    CHECK(p.y == doctest::Approx(0.0));
    CHECK(p.z == doctest::Approx(1.0));
}

TEST_CASE("backproject slanted plane satisfies the plane equation") {
    SceneSpec spec;
    spec.kind = SceneKind::slanted_plane;
    spec.width = spec.height = 16;
    const auto K = default_intrinsics(16, 16);
    const auto frames = generate(spec, K);
    const PointCloud pc = backproject(frames[0].gt_depth, K);
    REQUIRE(pc.points.size() == 16 * 16);
    for (const Vec3& p : pc.points) {
        CHECK(std::abs(p.z - 0.2 * p.x - 1.0) < 1e-6);
    }
}

TEST_CASE("backproject rejects mismatched rgb and skips invalid pixels") {
    const auto K = make_intrinsics(10, 10, 8, 8, 16, 16);
    DepthMap d = constant_metric_depth(16, 16, 1.0);
    d.valid(3, 3) = 0;
    d.valid(10, 2) = 0;

    const ColorImage rgb_bad(8, 8);
    CHECK_THROWS(backproject(d, K, &rgb_bad));

    ColorImage rgb(16, 16, {9, 9, 9});
    const PointCloud pc = backproject(d, K, &rgb);
    CHECK(pc.points.size() == 16 * 16 - 2);
    CHECK(pc.colors.size() == pc.points.size());
}

TEST_CASE("depth_to_normal on a fronto-parallel plane") {
    const auto K = make_intrinsics(100, 100, 7.5, 7.5, 16, 16);
    const DepthMap d = constant_metric_depth(16, 16, 1.0);
    const NormalMap n = depth_to_normal(d, K);
    for (int v = 1; v < 15; ++v) {
        for (int u = 1; u < 15; ++u) {
            REQUIRE(n.valid(u, v));
            CHECK(std::abs(n.vectors(u, v).x) < 1e-9);
            CHECK(std::abs(n.vectors(u, v).y) < 1e-9);
            CHECK(n.vectors(u, v).z == doctest::Approx(-1.0));
        }
    }
    // border stays invalid
    CHECK_FALSE(n.valid(0, 0));
    CHECK_FALSE(n.valid(15, 7));
}

TEST_CASE("depth_to_normal recovers the analytic slanted-plane normal") {
    SceneSpec spec;
    spec.kind = SceneKind::slanted_plane;
    spec.width = spec.height = 32;
    const auto K = default_intrinsics(32, 32);
    const auto frames = generate(spec, K);
    const NormalMap est = depth_to_normal(frames[0].gt_depth, K);

    const Vec3 expected = frames[0].gt_normal.vectors(16, 16);
    for (int v = 1; v < 31; ++v) {
        for (int u = 1; u < 31; ++u) {
            REQUIRE(est.valid(u, v));
            const double dot = std::clamp(est.vectors(u, v).dot(expected), -1.0, 1.0);
            CHECK(std::acos(dot) * 180.0 / M_PI < 0.5);
        }
    }
}

TEST_CASE("depth_to_normal recovers sphere normals radially") {
    SceneSpec spec;
    spec.kind = SceneKind::sphere;
    spec.width = spec.height = 64;
    const auto K = default_intrinsics(64, 64);
    const auto frames = generate(spec, K);
    const NormalMap est = depth_to_normal(frames[0].gt_depth, K);

    int checked = 0;
    for (int v = 2; v < 62; ++v) {
        for (int u = 2; u < 62; ++u) {
            // interior of the sphere region only: 5x5 neighborhood on-sphere
            bool interior = true;
            for (int dv = -2; dv <= 2 && interior; ++dv) {
                for (int du = -2; du <= 2 && interior; ++du) {
                    if (!frames[0].region(u + du, v + dv)) interior = false;
                }
            }
            if (!interior) continue;
            REQUIRE(est.valid(u, v));
            const double dot = std::clamp(est.vectors(u, v).dot(frames[0].gt_normal.vectors(u, v)), -1.0, 1.0);
            CHECK(std::acos(dot) * 180.0 / M_PI < 1.0);
            ++checked;
        }
    }
    CHECK(checked > 100);
}

TEST_CASE("depth_to_normal output is unit and camera-facing") {
    SceneSpec spec;
    spec.kind = SceneKind::sphere;
    spec.width = spec.height = 48;
    spec.noise_sigma = 0.01;
    spec.seed = 3;
    const auto K = default_intrinsics(48, 48);
    const auto frames = generate(spec, K);
    const NormalMap est = depth_to_normal(frames[0].gen_depth, K);
    for (int v = 0; v < 48; ++v) {
        for (int u = 0; u < 48; ++u) {
            if (!est.valid(u, v)) continue;
            CHECK(std::abs(est.vectors(u, v).norm() - 1.0) <= 1e-6);
            CHECK(est.vectors(u, v).z <= 0.0);
        }
    }
}

TEST_CASE("depth_to_normal marks degenerate pixels invalid instead of throwing") {
    // Depth small enough that the cross product underflows to exactly zero.
    const auto K = make_intrinsics(1.0, 1.0, 7.5, 7.5, 16, 16);
    const DepthMap d = constant_metric_depth(16, 16, 1e-170);
    const NormalMap n = depth_to_normal(d, K);
    for (int v = 0; v < 16; ++v) {
        for (int u = 0; u < 16; ++u) CHECK_FALSE(n.valid(u, v));
    }
}

TEST_CASE("relative_to_metric maps the range linearly") {
    Grid<double> values(4, 1);
    values(0, 0) = 1e-3;  // keep clear of the validity cutoff
    values(1, 0) = 1.0;
    values(2, 0) = 0.5;
    values(3, 0) = 0.25;
    DepthMap rel = make_relative_depth(values, MaskGrid(4, 1, 1));

    SUBCASE("examples") {
        const DepthMap m1 = relative_to_metric(rel, 0.1, 10.0);
        CHECK(m1.values(1, 0) == doctest::Approx(10.0));
        const DepthMap m2 = relative_to_metric(rel, 2.0, 4.0);
        CHECK(m2.values(2, 0) == doctest::Approx(3.0));
        CHECK(m2.values(0, 0) == doctest::Approx(2.0 + 1e-3 * 2.0));
    }
    SUBCASE("r = 0 maps to near") {
        // r = 0 itself is below the validity cutoff, so check the formula at the low end
        const DepthMap m = relative_to_metric(rel, 0.1, 10.0);
        CHECK(m.values(0, 0) == doctest::Approx(0.1 + 1e-3 * 9.9));
        CHECK(m.unit == DepthUnit::metric);
    }
    SUBCASE("bad range") {
        CHECK_THROWS(relative_to_metric(rel, 4.0, 4.0));
        CHECK_THROWS(relative_to_metric(rel, 5.0, 4.0));
    }
    SUBCASE("strictly monotone in r") {
        TestRng rng(5);
        const DepthMap m = relative_to_metric(rel, 0.3, 7.0);
        for (int trial = 0; trial < 100; ++trial) {
            const double a = rng.uniform(1e-3, 1.0);
            const double b = rng.uniform(1e-3, 1.0);
            if (a == b) continue;
            const double ma = 0.3 + a * 6.7;
            const double mb = 0.3 + b * 6.7;
            CHECK(((a < b) == (ma < mb)));
        }
        CHECK(m.values(3, 0) < m.values(2, 0));
        CHECK(m.values(2, 0) < m.values(1, 0));
    }
}

TEST_CASE("make_relative_depth applies the low cutoff") {
    Grid<double> values(3, 1);
    values(0, 0) = 0.0;
    values(1, 0) = 5e-5;
    values(2, 0) = 2e-4;
    const DepthMap d = make_relative_depth(values, MaskGrid(3, 1, 1));
    CHECK_FALSE(d.valid(0, 0));
    CHECK_FALSE(d.valid(1, 0));
    CHECK(d.valid(2, 0));
}

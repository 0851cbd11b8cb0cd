#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dnr/integration.hpp"
#include "dnr/synth.hpp"
#include "support/oracles.hpp"

using namespace dnr;
using dnr::testing::TestRng;

namespace {

NormalMap fronto_normals(int w, int h) {
    return NormalMap{Grid<Vec3>(w, h, {0, 0, -1}), MaskGrid(w, h, 1)};
}

}  // namespace

TEST_CASE("assemble_system on a 1x2 fronto-parallel image") {
    const CameraIntrinsics K{1.0, 1.0, 0.0, 0.0, 2, 1};
    const NormalMap n = fronto_normals(2, 1);
    const SparseConstraintSystem sys = assemble_system(n, K);

    CHECK(sys.num_unknowns == 2);
    REQUIRE(sys.rows.size() == 2);  // forward at pixel 0, backward at pixel 1

    const ConstraintRow& fwd = sys.rows[0];
    CHECK(fwd.p == 0);
    CHECK(fwd.q == 1);
    CHECK(fwd.axis == Axis::u);
    CHECK(fwd.side == Side::plus);
    // tilde_nz = -1, so the forward row carries +1 on p0 and -1 on p1, rhs 0.
    CHECK(fwd.coeff_p == doctest::Approx(1.0));
    CHECK(fwd.coeff_q == doctest::Approx(-1.0));
    CHECK(fwd.rhs == doctest::Approx(0.0));

    const ConstraintRow& bwd = sys.rows[1];
    CHECK(bwd.p == 1);
    CHECK(bwd.q == 0);
    CHECK(bwd.side == Side::minus);
}

TEST_CASE("assemble_system row count on a 3x3 image") {
    const CameraIntrinsics K{10.0, 10.0, 1.0, 1.0, 3, 3};
    const SparseConstraintSystem sys = assemble_system(fronto_normals(3, 3), K);
    CHECK(sys.num_unknowns == 9);
    CHECK(sys.rows.size() == 24);  // both sides of both axes over 6 + 6 edges
}

TEST_CASE("assemble_system drops rows touching invalid pixels") {
    const CameraIntrinsics K{10.0, 10.0, 1.0, 1.0, 3, 3};
    NormalMap n = fronto_normals(3, 3);
    n.valid(1, 1) = 0;  // center invalid: its 8 incident one-sided rows vanish
    const SparseConstraintSystem sys = assemble_system(n, K);
    CHECK(sys.num_unknowns == 8);
    CHECK(sys.rows.size() == 16);
    for (const ConstraintRow& row : sys.rows) {
        CHECK(row.p >= 0);
        CHECK(row.q >= 0);
    }
}

TEST_CASE("assemble_system requires two connected valid pixels") {
    const CameraIntrinsics K{10.0, 10.0, 1.0, 1.0, 3, 3};
    NormalMap n = fronto_normals(3, 3);
    for (int v = 0; v < 3; ++v) {
        for (int u = 0; u < 3; ++u) n.valid(u, v) = 0;
    }
    n.valid(0, 0) = 1;
    CHECK_THROWS(assemble_system(n, K));
    n.valid(2, 2) = 1;  // two pixels, not adjacent
    CHECK_THROWS(assemble_system(n, K));
}

TEST_CASE("assembly is deterministic with the documented row order") {
    TestRng rng(21);
    const CameraIntrinsics K = dnr::testing::simple_intrinsics(6, 6);
    const NormalMap n = dnr::testing::random_normal_map(6, 6, rng);
    const SparseConstraintSystem a = assemble_system(n, K);
    const SparseConstraintSystem b = assemble_system(n, K);

    REQUIRE(a.rows.size() == b.rows.size());
    for (size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].p == b.rows[i].p);
        CHECK(a.rows[i].q == b.rows[i].q);
        CHECK(a.rows[i].coeff_p == b.rows[i].coeff_p);
        CHECK(a.rows[i].rhs == b.rows[i].rhs);
    }
    // raster order of p; per pixel axis u before v, side + before -
    for (size_t i = 1; i < a.rows.size(); ++i) {
        const ConstraintRow& prev = a.rows[i - 1];
        const ConstraintRow& cur = a.rows[i];
        if (cur.p == prev.p) {
            const int rank_prev = (prev.axis == Axis::u ? 0 : 2) + (prev.side == Side::plus ? 0 : 1);
            const int rank_cur = (cur.axis == Axis::u ? 0 : 2) + (cur.side == Side::plus ? 0 : 1);
            CHECK(rank_cur > rank_prev);
        } else {
            CHECK(cur.p > prev.p);
        }
    }
}

TEST_CASE("ground-truth log depth nearly satisfies the slanted-plane system") {
    SceneSpec spec;
    spec.kind = SceneKind::slanted_plane;
    spec.width = spec.height = 16;
    const CameraIntrinsics K = default_intrinsics(16, 16);
    const auto frames = generate(spec, K);
    const SparseConstraintSystem sys = assemble_system(frames[0].gt_normal, K);

    std::vector<double> d_log(sys.num_unknowns);
    for (int i = 0; i < sys.num_unknowns; ++i) {
        const Pixel p = sys.unknown_pixel[i];
        d_log[i] = std::log(frames[0].gt_depth.values(p.u, p.v));
    }
    for (const ConstraintRow& row : sys.rows) {
        CHECK(std::abs(row.residual(d_log)) < 5e-2);
    }
}

TEST_CASE("bilateral weights") {
    const CameraIntrinsics K{1.0, 1.0, 1.0, 0.0, 3, 1};
    const NormalMap n = fronto_normals(3, 1);
    const SparseConstraintSystem sys = assemble_system(n, K);
    REQUIRE(sys.rows.size() == 4);

    SUBCASE("flat iterate gives 0.5 everywhere") {
        const WeightVector w = bilateral_weights(sys, {0.3, 0.3, 0.3}, 2.0);
        for (double x : w.w) CHECK(x == doctest::Approx(0.5));
    }
    SUBCASE("k = 0 gives 0.5 regardless of residuals") {
        const WeightVector w = bilateral_weights(sys, {0.0, 1.0, -3.0}, 0.0);
        for (double x : w.w) CHECK(x == doctest::Approx(0.5));
    }
    SUBCASE("paired weights sum to one exactly and stay inside (0,1)") {
        TestRng rng(33);
        for (int trial = 0; trial < 50; ++trial) {
            const std::vector<double> d{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
            const WeightVector w = bilateral_weights(sys, d, rng.uniform(0.0, 50.0));
            // middle pixel (unknown 1) has both u-sides: rows 1 (+) and 2 (-)
            CHECK(w.w[1] + w.w[2] == 1.0);
            for (double x : w.w) {
                CHECK(x > 0.0);
                CHECK(x < 1.0);
            }
        }
    }
    SUBCASE("lone sides keep weight 0.5") {
        const WeightVector w = bilateral_weights(sys, {5.0, -1.0, 2.0}, 3.0);
        CHECK(w.w[0] == 0.5);   // pixel 0 has only the forward side
        CHECK(w.w[3] == 0.5);   // pixel 2 has only the backward side
    }
}

TEST_CASE("bilateral weight magnitude matches the logistic form") {
    // Stretch the middle unknown so r_+^2 - r_-^2 = 10, with k = 2:
    // residuals r_+ = d2 - d1, r_- = d1 - d0 (tilde_nz = -1 flips twice).
    const CameraIntrinsics K{1.0, 1.0, 1.0, 0.0, 3, 1};
    const SparseConstraintSystem sys = assemble_system(fronto_normals(3, 1), K);
    // choose d so r_- = 1, r_+^2 = 11: d0 = 0, d1 = 1, d2 = 1 + sqrt(11)
    const std::vector<double> d{0.0, 1.0, 1.0 + std::sqrt(11.0)};
    const WeightVector w = bilateral_weights(sys, d, 2.0);
    const double expected = 1.0 / (1.0 + std::exp(20.0));
    CHECK(w.w[1] == doctest::Approx(expected).epsilon(1e-9));
    CHECK(w.w[2] == doctest::Approx(1.0 - expected));
}

TEST_CASE("spatial_energy") {
    const CameraIntrinsics K{1.0, 1.0, 0.0, 0.0, 2, 1};
    const SparseConstraintSystem sys = assemble_system(fronto_normals(2, 1), K);

    SUBCASE("exact solution has zero energy") {
        WeightVector w;
        w.w.assign(sys.rows.size(), 0.5);
        CHECK(spatial_energy(sys, w, {0.7, 0.7}) == 0.0);
    }
    SUBCASE("single weighted row") {
        SparseConstraintSystem one = sys;
        one.rows.resize(1);
        WeightVector w;
        w.w = {0.5};
        // residual = 1*(d0) - 1*(d1) = 2
        CHECK(spatial_energy(one, w, {2.0, 0.0}) == doctest::Approx(2.0));
    }
}

TEST_CASE("spatial_energy equals the dense evaluation on random instances") {
    TestRng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const CameraIntrinsics K = dnr::testing::simple_intrinsics(6, 6);
        NormalMap n = dnr::testing::random_normal_map(6, 6, rng);
        if (trial % 2 == 1) {
            n.valid(rng.uniform_int(0, 5), rng.uniform_int(0, 5)) = 0;
        }
        const SparseConstraintSystem sys = assemble_system(n, K);
        std::vector<double> d(sys.num_unknowns);
        for (double& x : d) x = rng.uniform(-1.0, 1.0);
        const WeightVector w = bilateral_weights(sys, d, rng.uniform(0.0, 4.0));

        const double fast = spatial_energy(sys, w, d);
        const double dense = dnr::testing::dense_weighted_energy(sys, w, d);
        CHECK(std::abs(fast - dense) < 1e-10 * std::max(1.0, dense));
    }
}

TEST_CASE("constant shifts leave residuals and energy unchanged") {
    TestRng rng(13);
    const CameraIntrinsics K = dnr::testing::simple_intrinsics(8, 8);
    const NormalMap n = dnr::testing::random_normal_map(8, 8, rng);
    const SparseConstraintSystem sys = assemble_system(n, K);

    std::vector<double> d(sys.num_unknowns);
    for (double& x : d) x = rng.uniform(-1.0, 1.0);
    std::vector<double> shifted = d;
    for (double& x : shifted) x += 7.25;  // exactly representable shift

    const WeightVector w = bilateral_weights(sys, d, 2.0);
    for (const ConstraintRow& row : sys.rows) {
        CHECK(std::abs(row.residual(d) - row.residual(shifted)) < 1e-10);
    }
    CHECK(spatial_energy(sys, w, d) == doctest::Approx(spatial_energy(sys, w, shifted)).epsilon(1e-12));
}

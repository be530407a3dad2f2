#include <catch2/catch_amalgamated.hpp>

#include "carnotlab/curvature.hpp"

#include <cmath>

using namespace carnotlab;

TEST_CASE("closed forms for f = z") {
    const auto z = TestFunction::coordinate(3, 2);
    const auto ops = make_curvature_ops(z);
    Rng rng(12);
    for (int i = 0; i < 100; ++i) {
        const GroupPoint p{2.0 * rng.normal(), 2.0 * rng.normal(), 2.0 * rng.normal()};
        const FormValue v = gamma_forms(ops, p, 1.0);
        CHECK(v.gamma2_hori == 0.5); // XYz = 1/2, YXz = -1/2, everything else 0
        CHECK(v.gamma2_vert == 0.0);
        CHECK(v.gamma_hori == Catch::Approx((p.x * p.x + p.y * p.y) / 4.0));
        CHECK(v.gamma_vert == 1.0);

        for (double nu : {0.25, 1.0, 4.0}) {
            const CdResult r = check_cd(ops, p, nu);
            const double expected = 0.5 + (1.0 / nu) * ((p.x * p.x + p.y * p.y) / 4.0 + nu);
            CHECK(r.margin == Catch::Approx(expected).epsilon(1e-12));
            CHECK(r.ok);
        }
    }
}

TEST_CASE("constants are flat") {
    const auto c = TestFunction::constant(3, 3.0);
    const CdResult r = check_cd(c, GroupPoint{1, 2, 3}, 0.5);
    CHECK(r.margin == 0.0);
    CHECK(r.ok);
}

TEST_CASE("z-free functions reduce to the flat Hessian") {
    Rng rng(55);
    for (const auto& member : standard_suite()) {
        if (!member.horizontal) continue;
        const auto& f = member.fn;
        const auto ops = make_curvature_ops(f);
        const auto fxx = f.partial(0).partial(0);
        const auto fyy = f.partial(1).partial(1);
        const auto fxy = f.partial(0).partial(1);
        for (int i = 0; i < 20; ++i) {
            const GroupPoint p{rng.normal(), rng.normal(), rng.normal()};
            const FormValue v = gamma_forms(ops, p, 1.0);
            CHECK(v.gamma2_vert == 0.0);
            const double a = fxx.evaluate(p), b = fyy.evaluate(p), c = fxy.evaluate(p);
            CHECK(v.gamma2_hori == Catch::Approx(a * a + b * b + 2.0 * c * c).margin(1e-10));
        }
    }
}

TEST_CASE("both gamma2 routes agree to 1e-10") {
    Rng rng(66);
    int pairs = 0;
    for (const auto& member : standard_suite()) {
        const auto ops = make_curvature_ops(member.fn);
        const auto dual = gamma2_hori_by_definition(member.fn);
        for (int i = 0; i < 50; ++i) {
            const GroupPoint p{1.5 * rng.normal(), 1.5 * rng.normal(), 1.5 * rng.normal()};
            const double direct = gamma_forms(ops, p, 1.0).gamma2_hori;
            CHECK(std::abs(direct - dual.evaluate(p)) <= 1e-10 * (1.0 + std::abs(direct)));
            ++pairs;
        }
    }
    CHECK(pairs >= 1000);
}

TEST_CASE("curvature inequality margin across the sweep") {
    Rng rng(77);
    const auto suite = standard_suite();
    REQUIRE(suite.size() >= 20);
    for (const auto& member : suite) {
        const auto ops = make_curvature_ops(member.fn);
        for (int i = 0; i < 100; ++i) {
            const GroupPoint p{2.0 * rng.normal(), 2.0 * rng.normal(), 2.0 * rng.normal()};
            for (double nu : {0.25, 0.5, 1.0, 2.0, 4.0}) {
                CHECK(check_cd(ops, p, nu).margin >= -1e-10);
            }
        }
    }
}

TEST_CASE("definitional identities of the form value") {
    const auto f = resolve_function("z_gauss4").fn;
    const auto ops = make_curvature_ops(f);
    Rng rng(88);
    for (int i = 0; i < 50; ++i) {
        const GroupPoint p{rng.normal(), rng.normal(), rng.normal()};
        for (double nu : {0.25, 1.0, 4.0}) {
            const FormValue v = gamma_forms(ops, p, nu);
            CHECK(v.gamma_elli == v.gamma_hori + nu * v.gamma_vert);
            CHECK(v.gamma2_mix == v.gamma2_hori + nu * v.gamma2_vert);
        }
    }
    CHECK_THROWS_AS(gamma_forms(ops, GroupPoint{}, 0.0), std::domain_error);
}

TEST_CASE("bi-invariance of the semigroup at the origin") {
    const SeedPlan plan{31415, 256};

    // z-free: the planar endpoint does not feel the composition order
    const auto gx = resolve_function("gauss_r:s=0.5").fn;
    const auto [l0, r0] = bi_invariance_check(gx, plan, 2000, 64, 1, 1);
    CHECK(std::abs(l0.value - r0.value) <= 1e-10);

    // odd coordinate: both sides vanish
    const auto fx = TestFunction::coordinate(3, 0);
    const auto [l1, r1] = bi_invariance_check(fx, plan, 5000, 64, 1, 2);
    CHECK(std::abs(l1.value) <= 4.0 * l1.ci_half_width);
    CHECK(std::abs(r1.value) <= 4.0 * r1.ci_half_width);

    // genuinely z-dependent member: agreement within combined uncertainty
    const auto fz = resolve_function("gauss4_one_plus_z2").fn;
    const auto [l2, r2] = bi_invariance_check(fz, plan, 10000, 64, 1, 3);
    CHECK(std::abs(l2.value - r2.value) <= 3.0 * (l2.ci_half_width + r2.ci_half_width));
}

#include <catch2/catch_amalgamated.hpp>

#include "carnotlab/group.hpp"
#include "carnotlab/rng.hpp"

#include <cmath>

using namespace carnotlab;

namespace {
GroupPoint random_point(Rng& rng, double scale = 2.0) {
    return {scale * rng.normal(), scale * rng.normal(), scale * rng.normal()};
}
} // namespace

TEST_CASE("heisenberg product basics") {
    const GroupPoint a{1, 0, 0}, b{0, 1, 0};
    const GroupPoint ab = multiply(a, b);
    CHECK(ab.x == 1.0);
    CHECK(ab.y == 1.0);
    CHECK(ab.z == 0.5);

    // neutral element on both sides
    Rng rng(12345);
    for (int i = 0; i < 50; ++i) {
        const GroupPoint g = random_point(rng);
        CHECK(multiply(g, GroupPoint{}) == g);
        CHECK(multiply(GroupPoint{}, g) == g);
    }
}

TEST_CASE("inverse cancels exactly") {
    Rng rng(99);
    for (int i = 0; i < 100; ++i) {
        const GroupPoint g = random_point(rng);
        const GroupPoint e = multiply(g, inverse(g));
        CHECK(e.x == 0.0);
        CHECK(e.y == 0.0);
        CHECK(e.z == 0.0);
        const GroupPoint e2 = multiply(inverse(g), g);
        CHECK(e2.z == 0.0);
        CHECK(inverse(inverse(g)) == g);
    }
    CHECK(inverse(GroupPoint{1, 2, 3}) == GroupPoint{-1, -2, -3});
    CHECK(inverse(GroupPoint{}) == GroupPoint{});
}

TEST_CASE("associativity within 1e-12") {
    Rng rng(2024);
    for (int i = 0; i < 10000; ++i) {
        const GroupPoint g = random_point(rng), h = random_point(rng), k = random_point(rng);
        const GroupPoint l = multiply(multiply(g, h), k);
        const GroupPoint r = multiply(g, multiply(h, k));
        CHECK(std::abs(l.x - r.x) <= 1e-12);
        CHECK(std::abs(l.y - r.y) <= 1e-12);
        CHECK(std::abs(l.z - r.z) <= 1e-12);
    }
}

TEST_CASE("dilation") {
    CHECK(dilate(2.0, GroupPoint{1, 1, 1}) == GroupPoint{2, 2, 4});

    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
        const GroupPoint g = random_point(rng);
        CHECK(dilate(1.0, g) == g);

        const double lam = std::exp(rng.normal());
        const double mu = std::exp(rng.normal());
        const GroupPoint h = random_point(rng);

        // group homomorphism
        const GroupPoint lhs = dilate(lam, multiply(g, h));
        const GroupPoint rhs = multiply(dilate(lam, g), dilate(lam, h));
        CHECK(std::abs(lhs.x - rhs.x) <= 1e-12 * (1.0 + std::abs(lhs.x)));
        CHECK(std::abs(lhs.y - rhs.y) <= 1e-12 * (1.0 + std::abs(lhs.y)));
        CHECK(std::abs(lhs.z - rhs.z) <= 1e-12 * (1.0 + std::abs(lhs.z)));

        // composition law
        const GroupPoint c1 = dilate(lam, dilate(mu, g));
        const GroupPoint c2 = dilate(lam * mu, g);
        CHECK(std::abs(c1.z - c2.z) <= 1e-12 * (1.0 + std::abs(c2.z)));
    }

    CHECK_THROWS_AS(dilate(0.0, GroupPoint{}), std::domain_error);
    CHECK_THROWS_AS(dilate(-1.0, GroupPoint{}), std::domain_error);
}

TEST_CASE("pseudo norm") {
    CHECK(pseudo_norm_sq(GroupPoint{3, 4, 0}) == 25.0);
    CHECK(pseudo_norm_sq(GroupPoint{0, 0, -2}) == 2.0);
    CHECK(pseudo_norm_sq(GroupPoint{}) == 0.0);

    // degree-2 homogeneity under dilation, exact up to rounding
    Rng rng(31);
    for (int i = 0; i < 200; ++i) {
        const GroupPoint g = random_point(rng);
        const double lam = std::exp(0.3 * rng.normal());
        const double lhs = pseudo_norm_sq(dilate(lam, g));
        const double rhs = lam * lam * pseudo_norm_sq(g);
        CHECK(lhs == Catch::Approx(rhs).epsilon(1e-13));
    }
}

TEST_CASE("non-finite inputs rejected") {
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(multiply(GroupPoint{inf, 0, 0}, GroupPoint{}), std::invalid_argument);
    CHECK_THROWS_AS(inverse(GroupPoint{0, NAN, 0}), std::invalid_argument);
    CHECK_THROWS_AS(pseudo_norm_sq(GroupPoint{0, 0, inf}), std::invalid_argument);
}

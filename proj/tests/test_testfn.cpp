#include <catch2/catch_amalgamated.hpp>

#include "carnotlab/rng.hpp"
#include "carnotlab/testfn.hpp"

#include <cmath>
#include <vector>

using namespace carnotlab;

namespace {

GroupPoint random_point(Rng& rng, double scale = 1.5) {
    return {scale * rng.normal(), scale * rng.normal(), scale * rng.normal()};
}

double fd_partial(const TestFunction& f, const GroupPoint& p, int axis, double h = 1e-5) {
    double lo[3] = {p.x, p.y, p.z}, hi[3] = {p.x, p.y, p.z};
    lo[axis] -= h;
    hi[axis] += h;
    return (f.evaluate(std::span<const double>(hi, 3)) -
            f.evaluate(std::span<const double>(lo, 3))) /
           (2.0 * h);
}

// max |f - g| over a fixed cloud of random points
double max_abs_diff(const TestFunction& f, const TestFunction& g, int n_points,
                    std::uint64_t seed) {
    Rng rng(seed);
    double m = 0.0;
    for (int i = 0; i < n_points; ++i) {
        const GroupPoint p = random_point(rng);
        m = std::max(m, std::abs(f.evaluate(p) - g.evaluate(p)));
    }
    return m;
}

} // namespace

TEST_CASE("evaluate basics") {
    const auto x = TestFunction::coordinate(3, 0);
    CHECK(x.evaluate(GroupPoint{2, 0, 0}) == 2.0);

    const std::size_t xy[] = {0, 1};
    const auto g = detail::radial_gaussian(3, xy, 1.0); // exp(-(x^2+y^2))
    CHECK(g.evaluate(GroupPoint{}) == 1.0);
    CHECK(g.evaluate(GroupPoint{1, 0, 0}) == Catch::Approx(std::exp(-1.0)));

    const auto z = TestFunction::coordinate(3, 2);
    CHECK(z.evaluate(GroupPoint{1, 1, 0.5}) == 0.5);
}

TEST_CASE("evaluate overflow reported") {
    // exp(+x) at huge x overflows to inf -> error
    const auto f = detail::exp_linear(3, 0, 1.0);
    CHECK_THROWS_AS(f.evaluate(GroupPoint{1e9, 0, 0}), std::range_error);
}

TEST_CASE("symbolic partials") {
    const auto xy = TestFunction::polynomial(Poly::monomial(3, 0) * Poly::monomial(3, 1));
    const auto dxy = xy.partial(0);
    CHECK(dxy.evaluate(GroupPoint{5, 7, 0}) == 7.0);

    // d/dx exp(-x^2) = -2x exp(-x^2)
    const std::size_t xs[] = {0};
    const auto gx = detail::radial_gaussian(3, xs, 1.0);
    const auto dgx = gx.partial(0);
    const auto expected = gx.mul_poly(Poly::monomial(3, 0, 1, -2.0));
    CHECK(max_abs_diff(dgx, expected, 100, 77) <= 1e-14);
}

TEST_CASE("partials match central finite differences") {
    Rng rng(321);
    const auto suite = standard_suite();
    int checked = 0;
    for (const auto& member : suite) {
        TestFunction d[3] = {member.fn.partial(0), member.fn.partial(1), member.fn.partial(2)};
        for (int i = 0; i < 50; ++i) {
            const GroupPoint p = random_point(rng);
            const double pt[3] = {p.x, p.y, p.z};
            for (int axis = 0; axis < 3; ++axis) {
                const double exact = d[axis].evaluate(std::span<const double>(pt, 3));
                const double fd = fd_partial(member.fn, p, axis);
                CHECK(std::abs(exact - fd) <= 1e-6 * (1.0 + std::abs(exact)));
                ++checked;
            }
        }
    }
    CHECK(checked >= 1000);
}

TEST_CASE("partials commute symbolically") {
    for (const auto& member : standard_suite()) {
        const auto dxy = member.fn.partial(0).partial(1);
        const auto dyx = member.fn.partial(1).partial(0);
        CHECK(dxy.poly().max_coeff_diff(dyx.poly()) <= 1e-12);
    }
}

TEST_CASE("field action on z") {
    const auto z = TestFunction::coordinate(3, 2);
    const auto xz = z.apply_field(Field::X); // -y/2
    const auto yz = z.apply_field(Field::Y); // x/2
    CHECK(xz.evaluate(GroupPoint{3, 4, 9}) == -2.0);
    CHECK(yz.evaluate(GroupPoint{3, 4, 9}) == 1.5);
}

TEST_CASE("commutation relations as TestFunction identities") {
    const auto suite = standard_suite();
    REQUIRE(suite.size() >= 20);
    for (const auto& member : suite) {
        const auto& f = member.fn;
        const auto xy_yx =
            field_product(f, {Field::X, Field::Y}) - field_product(f, {Field::Y, Field::X});
        const auto zf = f.apply_field(Field::Z);
        CHECK(max_abs_diff(xy_yx, zf, 50, 1000 + member.name.size()) <= 1e-10);

        // [X,Z] = [Y,Z] = 0 as exact polynomial identities
        const auto xz_zx =
            field_product(f, {Field::X, Field::Z}) - field_product(f, {Field::Z, Field::X});
        const auto yz_zy =
            field_product(f, {Field::Y, Field::Z}) - field_product(f, {Field::Z, Field::Y});
        const auto zero = Poly::constant(3, 0.0);
        CHECK(xz_zx.poly().max_coeff_diff(zero) <= 1e-12);
        CHECK(yz_zy.poly().max_coeff_diff(zero) <= 1e-12);

        // right-invariant fields: [Xhat, Yhat] = -Z
        const auto hat_comm = field_product(f, {Field::XHat, Field::YHat}) -
                              field_product(f, {Field::YHat, Field::XHat});
        const auto neg_zf = zf * -1.0;
        CHECK(max_abs_diff(hat_comm, neg_zf, 50, 2000 + member.name.size()) <= 1e-10);
    }
}

TEST_CASE("horizontal reduction: X equals d/dx on z-free members") {
    for (const auto& member : standard_suite()) {
        if (!member.horizontal) continue;
        const auto xf = member.fn.apply_field(Field::X);
        const auto dxf = member.fn.partial(0);
        CHECK(xf.poly().max_coeff_diff(dxf.poly()) <= 1e-14);
    }
}

TEST_CASE("standard suite composition") {
    const auto suite = standard_suite();
    CHECK(suite.size() >= 10);

    for (const auto& member : suite) {
        // horizontal tag means no z dependence anywhere
        if (member.horizontal) {
            CHECK(member.fn.poly().degree(2) == 0);
            CHECK(member.fn.envelope_l()[2] == 0.0);
            for (int j = 0; j < 3; ++j) CHECK(member.fn.envelope_q()[2 * 3 + j] == 0.0);
        }
        CHECK(member.fn.is_integrable());
    }
}

TEST_CASE("integrability rule") {
    // exp(z): linear exponent on the vertical coordinate, rejected
    CHECK_FALSE(detail::exp_linear(3, 2, 1.0).is_integrable());
    // exp(+x^2): positive quadratic, rejected
    std::vector<double> qpos(9, 0.0);
    qpos[0] = 1.0;
    CHECK_FALSE(detail::envelope_only(3, qpos, std::vector<double>(3, 0.0)).is_integrable());
    // z * exp(-z^2/4): decaying vertical envelope, accepted
    const std::size_t zz[] = {2};
    CHECK(detail::radial_gaussian(3, zz, 0.25)
              .mul_poly(Poly::monomial(3, 2))
              .is_integrable());
    // pure polynomial in z: accepted (heat-kernel tails kill polynomials)
    CHECK(TestFunction::coordinate(3, 2).is_integrable());
    // exp(a x / 2): linear exponent on a horizontal coordinate, accepted
    CHECK(detail::exp_linear(3, 0, 0.5).is_integrable());
}

TEST_CASE("sums require matching envelopes") {
    const std::size_t xy[] = {0, 1};
    const auto a = detail::radial_gaussian(3, xy, 0.25);
    const auto b = detail::radial_gaussian(3, xy, 0.5);
    CHECK_THROWS_AS(a + b, std::invalid_argument);
    CHECK_NOTHROW(a + a * 2.0);
    // products always work; envelopes add
    const auto ab = a * b;
    CHECK(ab.envelope_q()[0] == -0.75);
}

TEST_CASE("resolve by name") {
    const auto f = resolve_function("exp_ax_half:a=0.5");
    CHECK(f.horizontal);
    CHECK(f.fn.evaluate(GroupPoint{2, 0, 0}) == Catch::Approx(std::exp(0.5)));

    const auto g = resolve_function("gauss_r:s=0.3");
    CHECK(g.fn.evaluate(GroupPoint{1, 1, 5}) == Catch::Approx(std::exp(-0.6)));

    const auto named = resolve_function("z_gauss4");
    CHECK_FALSE(named.horizontal);

    CHECK_THROWS_AS(resolve_function("no_such_function"), std::invalid_argument);
    CHECK_THROWS_AS(resolve_function("gauss_r:s=-1"), std::invalid_argument);
}

TEST_CASE("carnot suite over d+m variables") {
    const auto spec = CarnotSpec::heisenberg();
    const auto suite = carnot_suite(spec);
    CHECK(suite.size() >= 8);
    for (const auto& member : suite) {
        CHECK(member.fn.nvars() == 3);
        CHECK(member.fn.is_integrable(spec.d()));
    }
}

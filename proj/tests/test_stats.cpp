#include <catch2/catch_amalgamated.hpp>

#include "carnotlab/rng.hpp"
#include "carnotlab/stats.hpp"

#include <cmath>
#include <vector>

using namespace carnotlab;

TEST_CASE("phi with the 0 log 0 convention") {
    CHECK(phi_entropy(0.0) == 0.0);
    CHECK(phi_entropy(1.0) == 0.0);
    CHECK(phi_entropy(std::exp(1.0)) == Catch::Approx(std::exp(1.0)));
    CHECK_THROWS_AS(phi_entropy(-0.1), std::invalid_argument);
}

TEST_CASE("kahan summation survives cancellation") {
    std::vector<double> v{1e16, 1.0, -1e16, 1.0};
    CHECK(kahan_total(v) == 2.0);
}

TEST_CASE("entropy estimator basics") {
    // constant inputs -> 0 (Phi(E f) = E Phi(f))
    std::vector<double> c(1000, 0.37);
    const McEstimate e = mc_entropy(c, 1);
    CHECK(std::abs(e.value) <= 1e-12);
    CHECK(e.n_samples == 1000);

    // two-point masses {u, u} -> 0
    std::vector<double> two{2.5, 2.5};
    CHECK(std::abs(mc_entropy(two, 1).value) <= 1e-12);

    CHECK_THROWS_AS(mc_entropy({}, 1), std::invalid_argument);
    std::vector<double> neg{1.0, -0.5};
    CHECK_THROWS_AS(mc_entropy(neg, 1), std::invalid_argument);
}

TEST_CASE("entropy against the Gaussian closed form") {
    // f^2 = exp(a x), x ~ N(0,1), a = 1: Ent = (a^2/2) e^{a^2/2} = 0.824360...
    const double a = 1.0;
    const double expected = (a * a / 2.0) * std::exp(a * a / 2.0);
    const std::size_t n = 100000;
    Rng rng(2026);
    std::vector<double> f2(n);
    for (auto& v : f2) v = std::exp(a * rng.normal());
    const McEstimate e = mc_entropy(f2, 7);
    CHECK(std::abs(e.value - expected) <= 5.0 * e.ci_half_width);
    CHECK(e.ci_half_width > 0.0);
}

TEST_CASE("entropy is nonnegative and positively homogeneous") {
    Rng rng(5);
    std::vector<double> v(5000);
    for (auto& x : v) x = std::exp(0.4 * rng.normal());
    const double ent = mc_entropy(v, 3).value;
    CHECK(ent >= -1e-12);

    const double c = 3.7;
    std::vector<double> scaled(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) scaled[i] = c * v[i];
    const double ent_scaled = mc_entropy(scaled, 3).value;
    CHECK(ent_scaled == Catch::Approx(c * ent).epsilon(1e-10));
}

TEST_CASE("variance estimator") {
    std::vector<double> c(100, 1.23);
    CHECK(std::abs(mc_variance(c, 1).value) <= 1e-12);

    Rng rng(6);
    std::vector<double> v(50000);
    for (auto& x : v) x = rng.normal();
    const McEstimate e = mc_variance(v, 9);
    CHECK(std::abs(e.value - 1.0) <= 4.0 * e.ci_half_width);
    CHECK(e.value >= 0.0);

    std::vector<double> scaled(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) scaled[i] = -2.0 * v[i];
    CHECK(mc_variance(scaled, 9).value == Catch::Approx(4.0 * e.value).epsilon(1e-10));
}

TEST_CASE("bootstrap is bit-reproducible and shrinks like 1/sqrt(n)") {
    Rng rng(808);
    std::vector<double> big(40000);
    for (auto& x : big) x = std::exp(0.5 * rng.normal());
    const std::span<const double> small(big.data(), 10000);

    const McEstimate a = mc_entropy(big, 77);
    const McEstimate b = mc_entropy(big, 77);
    CHECK(a.value == b.value);
    CHECK(a.ci_half_width == b.ci_half_width);

    const McEstimate s = mc_entropy(small, 77);
    const double ratio = s.ci_half_width / a.ci_half_width;
    CHECK(ratio > 1.4);
    CHECK(ratio < 2.9);
}

TEST_CASE("joint bootstrap over shared indices") {
    // ratio of means of two perfectly correlated columns is exactly 1
    std::vector<double> u(500);
    Rng rng(4);
    for (auto& x : u) x = 1.0 + 0.2 * rng.normal();
    const McEstimate e = bootstrap_of_means(
        {u, u}, [](std::span<const double> m) { return m[0] / m[1]; }, 5);
    CHECK(e.value == 1.0);
    CHECK(e.ci_half_width <= 1e-15);
}

TEST_CASE("quantiles") {
    std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    CHECK(quantile_sorted(v, 0.0) == 1.0);
    CHECK(quantile_sorted(v, 1.0) == 4.0);
    CHECK(quantile_sorted(v, 0.5) == Catch::Approx(2.5));
}

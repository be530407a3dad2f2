#include <catch2/catch_amalgamated.hpp>

#include "carnotlab/bank.hpp"
#include "carnotlab/inequalities.hpp"

#include <cmath>

using namespace carnotlab;

namespace {

LsiRunConfig small_config(std::uint64_t seed, std::size_t n_paths, double beta = 0.0) {
    LsiRunConfig cfg;
    cfg.plan = SeedPlan{seed, 256};
    cfg.n_paths = n_paths;
    cfg.substeps = 16;
    cfg.t_order = 8;
    cfg.beta = beta;
    cfg.threads = 1;
    return cfg;
}

CarnotSpec free_d3_m3() {
    std::vector<std::vector<double>> B(3, std::vector<double>(9, 0.0));
    auto set = [&](std::size_t l, std::size_t p, std::size_t q) {
        B[l][p * 3 + q] = 1.0;
        B[l][q * 3 + p] = -1.0;
    };
    set(0, 0, 1);
    set(1, 0, 2);
    set(2, 1, 2);
    return CarnotSpec::validated(3, 3, std::move(B));
}

} // namespace

TEST_CASE("verdict classification") {
    const McEstimate lhs{1.0, 0.05, 100, 1};
    CHECK(classify(lhs, McEstimate{1.2, 0.05, 100, 1}) == Verdict::holds);
    CHECK(classify(lhs, McEstimate{0.95, 0.05, 100, 1}) == Verdict::holds); // within 1 CI
    CHECK(classify(lhs, McEstimate{0.75, 0.05, 100, 1}) == Verdict::inconclusive);
    CHECK(classify(lhs, McEstimate{0.5, 0.05, 100, 1}) == Verdict::violated);
}

TEST_CASE("theorem1 on a constant function") {
    const auto report = check_theorem1(resolve_function("const_1"), small_config(11, 2000));
    CHECK(std::abs(report.lhs.value) <= 1e-12);
    CHECK(report.rhs.value >= 0.0);
    CHECK(report.verdict == Verdict::holds);
    // bookkeeping identity
    CHECK(report.deficit == report.rhs.value - report.lhs.value);
}

TEST_CASE("theorem1 near-equality on the horizontal exponential family") {
    const auto f = resolve_function("exp_ax_half:a=0.5");
    const auto report = check_theorem1(f, small_config(21, 20000));
    const double a = 0.5;
    const double closed_form = (a * a / 2.0) * std::exp(a * a / 2.0);
    CHECK(report.verdict == Verdict::holds);
    CHECK(std::abs(report.lhs.value - closed_form) <= 5.0 * report.lhs.ci_half_width);
    CHECK(report.rhs.value / report.lhs.value == Catch::Approx(1.0).margin(0.06));
    // quadrature is exact in t for horizontal members, so the Richardson
    // doubling must agree tightly
    REQUIRE(report.params.contains("rhs_doubled"));
    CHECK(report.params.at("rhs_doubled") ==
          Catch::Approx(report.rhs.value).epsilon(1e-12));
}

TEST_CASE("theorem1 on a genuinely vertical member holds") {
    const auto report =
        check_theorem1(resolve_function("z_gauss4"), small_config(31, 20000));
    CHECK(report.verdict == Verdict::holds);
    CHECK(report.lhs.value > 0.0);
}

TEST_CASE("poincare: f = x is an equality with unit energy") {
    const auto report = check_poincare(resolve_function("coord_x"), small_config(41, 20000));
    CHECK(report.rhs.value == Catch::Approx(1.0).margin(1e-12)); // g is identically 1
    CHECK(report.rhs.ci_half_width <= 1e-12);
    CHECK(std::abs(report.lhs.value - 1.0) <= 4.0 * report.lhs.ci_half_width);
    CHECK(report.verdict != Verdict::violated);
}

TEST_CASE("poincare: f = z matches the walk variance") {
    const auto cfg = small_config(51, 20000, 1.0);
    const auto report = check_poincare(resolve_function("coord_z"), cfg);
    // Var(Z_1) = beta^2 + 1/4 at beta = 1
    CHECK(std::abs(report.lhs.value - 1.25) <= 4.0 * report.lhs.ci_half_width + 0.01);
    CHECK(report.verdict == Verdict::holds);
}

TEST_CASE("corollary behavior") {
    LsiRunConfig cfg = small_config(61, 20000);
    const auto bank = make_endpoint_bank(cfg);

    // z-free member: C is irrelevant, reduces to the horizontal case
    const auto hor = resolve_function("exp_ax_half:a=0.5");
    const auto r1 = check_corollary(hor, 1.0, bank, cfg.plan.master_seed);
    const auto r2 = check_corollary(hor, 100.0, bank, cfg.plan.master_seed);
    CHECK(r1.rhs.value == r2.rhs.value);
    CHECK(r1.verdict == Verdict::holds);

    // vertical member: doubling C increases the deficit
    const auto z = resolve_function("z_gauss4");
    const auto rz1 = check_corollary(z, 2.0, bank, cfg.plan.master_seed);
    const auto rz2 = check_corollary(z, 4.0, bank, cfg.plan.master_seed);
    CHECK(rz2.deficit > rz1.deficit);
    CHECK(rz1.verdict == Verdict::holds);

    CHECK_THROWS_AS(check_corollary(z, 0.0, bank, 1), std::invalid_argument);

    LsiRunConfig cfgb = small_config(61, 100, 1.0);
    const auto bank_b1 = make_endpoint_bank(cfgb);
    CHECK_THROWS_AS(check_corollary(z, 1.0, bank_b1, 1), std::invalid_argument);
}

TEST_CASE("corollary weight composition from the bridge constant") {
    CHECK(corollary_weight_from_bridge(1.0) == Catch::Approx(2.5));
    CHECK_THROWS_AS(corollary_weight_from_bridge(0.0), std::invalid_argument);
}

TEST_CASE("li symmetrized inequality") {
    LsiRunConfig cfg = small_config(71, 20000);
    const auto bank = make_endpoint_bank(cfg);

    // equality family at the sharp constant 2
    const auto hor = resolve_function("exp_ax_half:a=0.5");
    const auto r = check_li_symmetrized(hor, 2.0, bank, cfg.plan.master_seed);
    CHECK(r.rhs.value / r.lhs.value == Catch::Approx(1.0).margin(0.06));

    // vertical member with the default working constant: report only
    const auto z = resolve_function("z_gauss4");
    const auto rz = check_li_symmetrized(z, 4.0, bank, cfg.plan.master_seed);
    CHECK(rz.params.at("C_LSI") == 4.0);
    CHECK(std::isfinite(rz.deficit));

    CHECK_THROWS_AS(check_li_symmetrized(z, -1.0, bank, 1), std::invalid_argument);
}

TEST_CASE("curvature-route inequalities") {
    LsiRunConfig cfg = small_config(81, 20000);
    const auto bank = make_endpoint_bank(cfg);

    // f = x: the sublaplacian energy is identically 1, so the RHS is the
    // prefactor itself: 2 nu (e^{1/nu} - 1) = 2(e-1) at nu = 1
    const auto fx = resolve_function("coord_x");
    const auto r1 = check_bg(fx, 1.0, BgVariant::sublaplacian, bank, cfg.plan.master_seed);
    CHECK(r1.rhs.value == Catch::Approx(2.0 * (std::exp(1.0) - 1.0)).epsilon(1e-12));
    CHECK(r1.rhs.ci_half_width <= 1e-12);
    CHECK(r1.verdict == Verdict::holds);

    // prefactor decreases monotonically to 2 as nu grows
    const auto r_big = check_bg(fx, 1e6, BgVariant::sublaplacian, bank, cfg.plan.master_seed);
    CHECK(r_big.rhs.value == Catch::Approx(2.0).epsilon(1e-5));
    CHECK(r_big.rhs.value < r1.rhs.value);

    // weighted variant across nu and a vertical member
    const auto z = resolve_function("gauss4_one_plus_z2");
    for (double nu : {0.5, 1.0, 2.0}) {
        const auto rv = check_bg(z, nu, BgVariant::weighted, bank, cfg.plan.master_seed);
        CHECK(rv.verdict == Verdict::holds);
    }
    CHECK_THROWS_AS(check_bg(fx, 0.0, BgVariant::weighted, bank, 1), std::invalid_argument);
}

TEST_CASE("finite-n inequality") {
    // n = 1 is the Gaussian logarithmic Sobolev inequality in exponential
    // coordinates: near-equality for the exponential family
    const auto f = resolve_function("exp_ax_half:a=0.5");
    const auto r1 = check_finite_n(f, 1, 0.0, small_config(91, 20000));
    CHECK(r1.verdict == Verdict::holds);
    CHECK(r1.rhs.value / r1.lhs.value == Catch::Approx(1.0).margin(0.06));

    // small n across a vertical member: holds
    for (std::size_t n : {2ul, 4ul, 8ul}) {
        const auto r = check_finite_n(resolve_function("z_gauss4"), n, 0.0,
                                      small_config(92 + n, 10000));
        CHECK(r.verdict == Verdict::holds);
    }

    // beta > 0 also holds
    const auto rb = check_finite_n(resolve_function("coord_z"), 4, 1.0,
                                   small_config(99, 10000));
    CHECK(rb.verdict == Verdict::holds);
}

TEST_CASE("best constant over horizontal members approaches 2") {
    LsiRunConfig cfg = small_config(101, 20000);
    std::vector<FnDerivs> fns;
    std::vector<std::string> horizontal_names;
    for (const auto& m : standard_suite())
        if (m.horizontal) fns.push_back(make_derivs(m));
    const auto cols = joint_pass(cfg, fns);

    const McEstimate best = estimate_best_constant(cols, cfg.plan.master_seed);
    CHECK(best.value >= 1.8);
    CHECK(best.value <= 2.0 + 3.0 * best.ci_half_width);

    // monotone nondecreasing as the family grows
    const std::span<const JointColumns> first_three(cols.data(), 3);
    const McEstimate smaller = estimate_best_constant(first_three, cfg.plan.master_seed);
    CHECK(smaller.value <= best.value + 1e-15);
}

TEST_CASE("joint columns from a stored bank") {
    const SeedPlan plan{141, 256};
    const int t_order = 4;
    const auto bank = make_bank(plan, 4000, 2 * t_order, 16, 0.0, 1);

    // horizontal member: the energy ignores the companions entirely
    const auto hor = make_derivs(resolve_function("exp_ax_half:a=0.5"));
    const auto hcol = joint_columns_from_bank(bank, hor, t_order);
    for (std::size_t i = 0; i < 50; ++i) {
        const GroupPoint h1 = bank[i].point_at(bank[i].size() - 1);
        const double dx = hor.dx.evaluate(h1), dy = hor.dy.evaluate(h1);
        CHECK(hcol.q1[i] == Catch::Approx(dx * dx + dy * dy));
    }

    // f = z: E q1 = 1/2 at beta = 0 (E[(X1-2Xt)^2 + (Y1-2Yt)^2]/4 = 1/2)
    const auto z = make_derivs(resolve_function("coord_z"));
    const auto zcol = joint_columns_from_bank(bank, z, t_order);
    const McEstimate m = mc_mean(zcol.q1, 1);
    CHECK(std::abs(m.value - 0.5) <= 4.0 * m.ci_half_width);

    // endpoint view matches point_at on the last grid index
    const auto endpoints = endpoint_bank_from_bank(bank);
    CHECK(endpoints.pts.size() == bank.size());
    CHECK(endpoints.pts[7] == bank[7].point_at(bank[7].size() - 1));

    // grid/order mismatch is rejected
    CHECK_THROWS_AS(joint_columns_from_bank(bank, hor, t_order + 1), std::invalid_argument);
}

TEST_CASE("theorem energy dominates its beta = 0 form by the vertical square") {
    Rng rng(151);
    const auto d = make_derivs(resolve_function("z_gauss4"));
    for (int i = 0; i < 100; ++i) {
        const GroupPoint p{rng.normal(), rng.normal(), rng.normal()};
        const double dx = d.dx.evaluate(p), dy = d.dy.evaluate(p), dz = d.dz.evaluate(p);
        const double xt = rng.normal(), yt = rng.normal();
        const double beta = std::abs(rng.normal());
        const double with_beta = theorem_g(dx, dy, dz, p.x, p.y, xt, yt, beta);
        const double without = theorem_g(dx, dy, dz, p.x, p.y, xt, yt, 0.0);
        CHECK(with_beta == Catch::Approx(without + beta * beta * dz * dz).margin(1e-14));
        CHECK(with_beta >= without);
    }
}

TEST_CASE("reflection-paired cross terms cancel bit-exactly") {
    LsiRunConfig cfg = small_config(111, 2000);
    const auto bank = make_endpoint_bank(cfg);
    for (const auto& m : standard_suite()) {
        const auto d = make_derivs(m);
        CHECK(reflection_paired_cross_term(d, bank.pts) == 0.0);
    }
}

TEST_CASE("carnot check reproduces the heisenberg check bit for bit") {
    const CarnotSpec spec = CarnotSpec::heisenberg();
    LsiRunConfig cfg = small_config(121, 500);

    for (const char* name : {"exp_ax_half:a=0.5", "z_gauss4", "coord_z"}) {
        const auto f = resolve_function(name);
        const FnDerivs hd[] = {make_derivs(f)};
        const auto hcols = joint_pass(cfg, hd);
        const CarnotFnDerivs cd[] = {make_carnot_derivs(f, spec)};
        const auto ccols = carnot_joint_pass(spec, cfg, cd);

        CHECK(hcols[0].f2 == ccols[0].f2);
        CHECK(hcols[0].q1 == ccols[0].q1);
        CHECK(hcols[0].q2 == ccols[0].q2);

        const auto hr = check_theorem1_from_columns(hcols[0], cfg);
        const auto cr = check_carnot_from_columns(ccols[0], cfg, spec);
        CHECK(hr.lhs.value == cr.lhs.value);
        CHECK(hr.lhs.ci_half_width == cr.lhs.ci_half_width);
        CHECK(hr.rhs.value == cr.rhs.value);
        CHECK(hr.rhs.ci_half_width == cr.rhs.ci_half_width);
        CHECK(hr.deficit == cr.deficit);
    }
}

TEST_CASE("carnot theorem on the free rank-two group") {
    const CarnotSpec spec = free_d3_m3();
    LsiRunConfig cfg = small_config(131, 8000);
    const auto suite = carnot_suite(spec);

    // horizontal member reduces to the optimal Gaussian inequality in d = 3
    for (const auto& m : suite) {
        if (m.name != "exp_ax1_half:a=0.5") continue;
        const auto r = check_carnot_theorem(spec, m, cfg);
        CHECK(r.verdict == Verdict::holds);
        CHECK(r.rhs.value / r.lhs.value == Catch::Approx(1.0).margin(0.08));
    }

    // vertical member holds
    for (const auto& m : suite) {
        if (m.name != "z1_gauss4") continue;
        const auto r = check_carnot_theorem(spec, m, cfg);
        CHECK(r.verdict == Verdict::holds);
    }

    // beta > 0 is rejected for the rank-two construction
    LsiRunConfig bad = small_config(1, 10, 1.0);
    const CarnotFnDerivs cd[] = {make_carnot_derivs(suite[0], spec)};
    CHECK_THROWS_AS(carnot_joint_pass(spec, bad, cd), std::invalid_argument);
}

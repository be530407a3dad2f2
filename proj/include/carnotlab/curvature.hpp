#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "carnotlab/estimators.hpp"
#include "carnotlab/group.hpp"
#include "carnotlab/parallel.hpp"
#include "carnotlab/sampler.hpp"
#include "carnotlab/stats.hpp"
#include "carnotlab/testfn.hpp"

namespace carnotlab {

// Pointwise values of the operator algebra built on L = X^2 + Y^2 (the
// factor-2 rescaling of the generator used for the curvature inequality;
// the relation to the generator (X^2 + Y^2 + beta^2 Z^2)/2 is a time change):
//   gamma_hori  = (Xf)^2 + (Yf)^2          gamma_vert = (Zf)^2
//   gamma_elli  = gamma_hori + nu * gamma_vert
//   gamma2_hori = (X^2 f)^2 + (Y^2 f)^2 + (XYf)^2 + (YXf)^2
//                 - 2 (Xf)(YZf) + 2 (Yf)(XZf)
//   gamma2_vert = (XZf)^2 + (YZf)^2
//   gamma2_mix  = gamma2_hori + nu * gamma2_vert
struct FormValue {
    GroupPoint point;
    double nu = 1.0;
    double gamma_hori = 0.0, gamma_vert = 0.0, gamma_elli = 0.0;
    double gamma2_hori = 0.0, gamma2_vert = 0.0, gamma2_mix = 0.0;
};

// All field applications of one function needed by the forms, derived once.
struct CurvatureOps {
    TestFunction xf, yf, zf, xxf, yyf, xyf, yxf, xzf, yzf;
};

inline CurvatureOps make_curvature_ops(const TestFunction& f) {
    TestFunction xf = f.apply_field(Field::X);
    TestFunction yf = f.apply_field(Field::Y);
    TestFunction zf = f.apply_field(Field::Z);
    return {xf,
            yf,
            zf,
            xf.apply_field(Field::X),
            yf.apply_field(Field::Y),
            yf.apply_field(Field::X), // XYf: Y first, then X
            xf.apply_field(Field::Y), // YXf
            zf.apply_field(Field::X), // XZf
            zf.apply_field(Field::Y)};
}

inline FormValue gamma_forms(const CurvatureOps& ops, const GroupPoint& p, double nu) {
    if (!(nu > 0.0)) throw std::domain_error("gamma_forms: nu must be > 0");
    const double xf = ops.xf.evaluate(p), yf = ops.yf.evaluate(p), zf = ops.zf.evaluate(p);
    const double xxf = ops.xxf.evaluate(p), yyf = ops.yyf.evaluate(p);
    const double xyf = ops.xyf.evaluate(p), yxf = ops.yxf.evaluate(p);
    const double xzf = ops.xzf.evaluate(p), yzf = ops.yzf.evaluate(p);

    FormValue v;
    v.point = p;
    v.nu = nu;
    v.gamma_hori = xf * xf + yf * yf;
    v.gamma_vert = zf * zf;
    v.gamma_elli = v.gamma_hori + nu * v.gamma_vert;
    v.gamma2_hori = xxf * xxf + yyf * yyf + xyf * xyf + yxf * yxf - 2.0 * xf * yzf +
                    2.0 * yf * xzf;
    v.gamma2_vert = xzf * xzf + yzf * yzf;
    v.gamma2_mix = v.gamma2_hori + nu * v.gamma2_vert;
    return v;
}

inline FormValue gamma_forms(const TestFunction& f, const GroupPoint& p, double nu) {
    return gamma_forms(make_curvature_ops(f), p, nu);
}

// The generalized curvature lower bound: gamma2_mix >= -(1/nu) gamma_elli.
struct CdResult {
    double margin = 0.0; // gamma2_mix + (1/nu) gamma_elli
    bool ok = false;     // margin >= -1e-10
};

inline CdResult check_cd(const CurvatureOps& ops, const GroupPoint& p, double nu) {
    const FormValue v = gamma_forms(ops, p, nu);
    CdResult r;
    r.margin = v.gamma2_mix + (1.0 / nu) * v.gamma_elli;
    r.ok = r.margin >= -1e-10;
    return r;
}

inline CdResult check_cd(const TestFunction& f, const GroupPoint& p, double nu) {
    return check_cd(make_curvature_ops(f), p, nu);
}

// Second evaluation route for gamma2_hori, straight from the definition
// (1/2)(L Gamma(f,f) - 2 Gamma(f, Lf)) with Gamma(f,g) = Xf Xg + Yf Yg and
// L = X^2 + Y^2, kept fully symbolic. Independent of the expanded form above.
inline TestFunction gamma2_hori_by_definition(const TestFunction& f) {
    auto X = [](const TestFunction& g) { return g.apply_field(Field::X); };
    auto Y = [](const TestFunction& g) { return g.apply_field(Field::Y); };
    auto L = [&](const TestFunction& g) { return X(X(g)) + Y(Y(g)); };

    const TestFunction xf = X(f), yf = Y(f);
    const TestFunction gamma = xf * xf + yf * yf;
    const TestFunction lf = L(f);
    const TestFunction gamma_f_lf = xf * X(lf) + yf * Y(lf);
    return (L(gamma) - gamma_f_lf * 2.0) * 0.5;
}

// Compares E f(H_1) under the left-composed and right-composed product
// constructions on shared increment streams (the bi-invariance consequence
// P_t f(0) = P-hat_t f(0); both runs share seeds, so the difference is pure
// construction order). Requires beta = 0.
inline std::pair<McEstimate, McEstimate> bi_invariance_check(const TestFunction& f,
                                                             const SeedPlan& plan,
                                                             std::size_t n_paths,
                                                             std::size_t n_steps, int threads,
                                                             std::uint64_t master_seed) {
    if (n_paths == 0) throw std::invalid_argument("bi_invariance_check: no paths");
    std::vector<double> left(n_paths), right(n_paths);
    parallel_chunks(n_paths, plan.chunk_size, threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const std::uint64_t base = plan.path_base(i);
            left[i] = f.evaluate(walk_endpoint(n_steps, 0.0, base, false));
            right[i] = f.evaluate(walk_endpoint(n_steps, 0.0, base, true));
        }
    });
    return {mc_mean(left, tag_seed(master_seed, "bi/left")),
            mc_mean(right, tag_seed(master_seed, "bi/right"))};
}

} // namespace carnotlab

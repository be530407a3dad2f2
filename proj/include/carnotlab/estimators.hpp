#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "carnotlab/group.hpp"
#include "carnotlab/sampler.hpp"
#include "carnotlab/stats.hpp"
#include "carnotlab/testfn.hpp"

namespace carnotlab {

// FNV-1a, used to derive estimator seeds from stable string tags.
inline std::uint64_t stable_hash64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t tag_seed(std::uint64_t master, std::string_view tag) {
    return child_seed(master, stable_hash64(tag));
}

// ---------------------------------------------------------------------------
// Pointwise gradient energies
// ---------------------------------------------------------------------------

// Pointwise quadratic forms in the first derivatives of f:
//   Gamma      (Xf)^2 + (Yf)^2 + beta^2 (Zf)^2
//   Vertical   (Zf)^2
//   WeightedTa Gamma + a(p) * (Zf)^2
//   Euclidean  (d_x f)^2 + (d_y f)^2
struct EnergyForm {
    enum class Kind { Gamma, Vertical, WeightedTa, Euclidean } kind = Kind::Gamma;
    double beta = 0.0;
    std::function<double(const GroupPoint&)> weight; // required for WeightedTa
};

// First-derivative bundle of one test function, precomputed once.
struct FnDerivs {
    std::string name;
    bool horizontal = false;
    TestFunction f, dx, dy, dz;
};

inline FnDerivs make_derivs(const NamedTestFunction& m) {
    if (m.fn.nvars() != 3)
        throw std::invalid_argument("make_derivs: expected a 3-variable test function");
    return {m.name, m.horizontal, m.fn, m.fn.partial(0), m.fn.partial(1), m.fn.partial(2)};
}

// g(h, h') of the main inequality, with all derivatives taken at h = (x,y,z)
// and only the coordinates (x', y') of the companion h' entering:
//   (d_x f + (y-2y')/2 d_z f)^2 + (d_y f - (x-2x')/2 d_z f)^2 + beta^2 (d_z f)^2.
//
// Companion-sign convention: the weights are the distributional limits of the
// signed prefix sums -(1/sqrt n) sum_j eps_ij y_j of the walk, which converge
// to 2Y_t - Y_1 (not Y_1 - 2Y_t); the finite-n energy, exact by the chain
// rule on the product construction, is the oracle that fixes this sign. At
// companion e the form reduces to the right-invariant fields,
// (Xhat f)^2 + (Yhat f)^2 + beta^2 (Zf)^2.
inline double theorem_g(double dx, double dy, double dz, double x1, double y1, double xt,
                        double yt, double beta) {
    const double u = x1 - 2.0 * xt;
    const double v = y1 - 2.0 * yt;
    const double t1 = dx + 0.5 * v * dz;
    const double t2 = dy - 0.5 * u * dz;
    double val = t1 * t1;
    val += t2 * t2;
    if (beta > 0.0) val += beta * beta * dz * dz;
    return val;
}

// Sample-mean energy of a pointwise form over an endpoint bank.
inline McEstimate energy(const TestFunction& f, const EnergyForm& form,
                         std::span<const GroupPoint> points, std::uint64_t seed) {
    if (points.empty()) throw std::invalid_argument("energy: empty sample");
    if (!f.is_integrable())
        throw std::invalid_argument("energy: test function not integrable against gamma");

    std::vector<double> vals(points.size());
    switch (form.kind) {
        case EnergyForm::Kind::Gamma: {
            const TestFunction xf = f.apply_field(Field::X), yf = f.apply_field(Field::Y),
                               zf = f.apply_field(Field::Z);
            const double b2 = form.beta * form.beta;
            for (std::size_t i = 0; i < points.size(); ++i) {
                const double a = xf.evaluate(points[i]), b = yf.evaluate(points[i]),
                             c = zf.evaluate(points[i]);
                vals[i] = a * a + b * b + b2 * c * c;
            }
            break;
        }
        case EnergyForm::Kind::Vertical: {
            const TestFunction zf = f.apply_field(Field::Z);
            for (std::size_t i = 0; i < points.size(); ++i) {
                const double c = zf.evaluate(points[i]);
                vals[i] = c * c;
            }
            break;
        }
        case EnergyForm::Kind::WeightedTa: {
            if (!form.weight) throw std::invalid_argument("energy: WeightedTa needs a weight");
            const TestFunction xf = f.apply_field(Field::X), yf = f.apply_field(Field::Y),
                               zf = f.apply_field(Field::Z);
            const double b2 = form.beta * form.beta;
            for (std::size_t i = 0; i < points.size(); ++i) {
                const double a = xf.evaluate(points[i]), b = yf.evaluate(points[i]),
                             c = zf.evaluate(points[i]);
                vals[i] = a * a + b * b + b2 * c * c + form.weight(points[i]) * c * c;
            }
            break;
        }
        case EnergyForm::Kind::Euclidean: {
            const TestFunction dxf = f.partial(0), dyf = f.partial(1);
            for (std::size_t i = 0; i < points.size(); ++i) {
                const double a = dxf.evaluate(points[i]), b = dyf.evaluate(points[i]);
                vals[i] = a * a + b * b;
            }
            break;
        }
    }
    return mc_mean(vals, seed);
}

// Energy of the main inequality: per-trajectory midpoint quadrature of
// g(H_1, H_t) over the joint samples' time nodes, without the prefactor 2.
inline McEstimate energy_theorem1_g(const TestFunction& f, double beta,
                                    std::span<const JointSample> samples, std::uint64_t seed) {
    if (samples.empty()) throw std::invalid_argument("energy_theorem1_g: empty sample");
    if (!f.is_integrable())
        throw std::invalid_argument("energy_theorem1_g: test function not integrable");
    const TestFunction dxf = f.partial(0), dyf = f.partial(1), dzf = f.partial(2);
    std::vector<double> vals(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& js = samples[i];
        const double dx = dxf.evaluate(js.h1), dy = dyf.evaluate(js.h1),
                     dz = dzf.evaluate(js.h1);
        double acc = 0.0;
        for (const auto& ht : js.ht)
            acc += theorem_g(dx, dy, dz, js.h1.x, js.h1.y, ht.x, ht.y, beta);
        vals[i] = acc / static_cast<double>(js.ht.size());
    }
    return mc_mean(vals, seed);
}

// ---------------------------------------------------------------------------
// Brownian bridge moments by k-nearest-neighbor conditioning
// ---------------------------------------------------------------------------

// Default neighbor count, balancing k-NN bias against variance.
inline std::size_t default_knn(std::size_t n_paths) {
    const double k = std::pow(static_cast<double>(n_paths), 0.6) / 10.0;
    return std::max<std::size_t>(30, static_cast<std::size_t>(std::llround(k)));
}

namespace detail {
inline std::size_t grid_index_of(const PathSample& ps, double t) {
    for (std::size_t k = 0; k < ps.grid.size(); ++k)
        if (std::abs(ps.grid[k] - t) <= 1e-12) return k;
    throw std::invalid_argument("bridge_moment: time not on the path grid");
}
} // namespace detail

// E(X_t^2 + Y_t^2 | H_1 = h), estimated by averaging over the k paths whose
// endpoints are nearest to the target. Nearness is measured by the pseudo-
// norm of inverse(target)*H_1; with euclidean_conditioning the area is
// ignored and only the planar endpoint enters (the regime with a Euclidean
// closed-form oracle).
inline McEstimate bridge_moment(double t, const GroupPoint& target,
                                std::span<const PathSample> paths, std::size_t k,
                                std::uint64_t seed, bool euclidean_conditioning = false) {
    if (paths.empty()) throw std::invalid_argument("bridge_moment: no paths");
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("bridge_moment: t outside [0,1]");
    if (k < 30) throw std::invalid_argument("bridge_moment: k must be at least 30");
    if (k > paths.size()) throw std::invalid_argument("bridge_moment: k exceeds path count");

    const std::size_t ti = detail::grid_index_of(paths[0], t);
    const std::size_t last = paths[0].size() - 1;

    std::vector<std::pair<double, double>> dist_val(paths.size()); // (distance, X_t^2+Y_t^2)
    for (std::size_t i = 0; i < paths.size(); ++i) {
        const auto& ps = paths[i];
        const GroupPoint h1 = ps.point_at(last);
        double dist;
        if (euclidean_conditioning) {
            const double ex = h1.x - target.x, ey = h1.y - target.y;
            dist = ex * ex + ey * ey;
        } else {
            dist = pseudo_norm_sq(multiply(inverse(target), h1));
        }
        const double rx = ps.bx[ti], ry = ps.by[ti];
        dist_val[i] = {dist, rx * rx + ry * ry};
    }
    std::nth_element(dist_val.begin(), dist_val.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     dist_val.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<double> vals(k);
    for (std::size_t i = 0; i < k; ++i) vals[i] = dist_val[i].second;
    // stable order for reproducibility regardless of nth_element internals
    std::sort(vals.begin(), vals.end());
    return mc_mean(vals, seed);
}

// Fitted constants of the bridge control bound.
struct BridgeFit {
    double c_pointwise = 0.0;  // smallest C with moment <= C (t^2 N^2(h) + t) on the grid
    double c_integrated = 0.0; // smallest C with  int_0^1 moment dt <= C (1+x^2+y^2+|z|)
};

// The t_grid entries act as equal-weight quadrature nodes for the integrated
// bound (midpoint nodes of (0,1) are the intended input).
inline BridgeFit bridge_lemma_fit(std::span<const PathSample> paths,
                                  std::span<const double> t_grid,
                                  std::span<const GroupPoint> targets, std::size_t k,
                                  std::uint64_t seed, bool euclidean_conditioning = false) {
    if (t_grid.empty() || targets.empty())
        throw std::invalid_argument("bridge_lemma_fit: degenerate grids");
    for (double t : t_grid)
        if (!(t > 0.0 && t <= 1.0))
            throw std::invalid_argument("bridge_lemma_fit: t nodes must lie in (0,1]");
    BridgeFit fit;
    for (const auto& h : targets) {
        const double n2 = pseudo_norm_sq(h);
        KahanSum integral;
        for (double t : t_grid) {
            const double m = bridge_moment(t, h, paths, k, seed, euclidean_conditioning).value;
            fit.c_pointwise = std::max(fit.c_pointwise, m / (t * t * n2 + t));
            integral.add(m);
        }
        const double integrated = integral.value() / static_cast<double>(t_grid.size());
        fit.c_integrated = std::max(
            fit.c_integrated, integrated / (1.0 + h.x * h.x + h.y * h.y + std::abs(h.z)));
    }
    return fit;
}

// ---------------------------------------------------------------------------
// Heat-kernel shape check (beta = 0)
// ---------------------------------------------------------------------------

// Sandwich fit of the sub-elliptic kernel bound at t = 1 with the pseudo-norm
// standing in for the Carnot-Caratheodory distance: the eq-uivalence constants
// are absorbed into the fitted C1, C2, so this checks shape, not magnitude.
struct HeatBoundFit {
    double c1_hat = 0.0;
    double c2_hat = 0.0;
    double region = 0.0;          // max pseudo-norm of the evaluation window
    double t = 1.0;
    double slope = 0.0;           // OLS slope of log-density against N^2/4
    double frac_in_sandwich = 0.0;
    bool max_at_origin = false;
    std::size_t n_eval = 0;
};

namespace detail {
struct Kde3 {
    std::span<const GroupPoint> pts;
    double hx, hy, hz, norm;

    static Kde3 fit(std::span<const GroupPoint> pts) {
        const double n = static_cast<double>(pts.size());
        auto sd = [&](auto getter) {
            double m = 0.0, s = 0.0;
            for (const auto& p : pts) m += getter(p);
            m /= n;
            for (const auto& p : pts) s += (getter(p) - m) * (getter(p) - m);
            return std::sqrt(s / n);
        };
        const double bw = std::pow(n, -1.0 / 7.0); // Scott's rule in dimension 3
        Kde3 k{pts, 0, 0, 0, 0};
        k.hx = bw * sd([](const GroupPoint& p) { return p.x; });
        k.hy = bw * sd([](const GroupPoint& p) { return p.y; });
        k.hz = bw * sd([](const GroupPoint& p) { return p.z; });
        k.norm = 1.0 / (n * std::pow(2.0 * M_PI, 1.5) * k.hx * k.hy * k.hz);
        return k;
    }

    double density(const GroupPoint& g) const {
        KahanSum s;
        for (const auto& p : pts) {
            const double ux = (g.x - p.x) / hx, uy = (g.y - p.y) / hy, uz = (g.z - p.z) / hz;
            s.add(std::exp(-0.5 * (ux * ux + uy * uy + uz * uz)));
        }
        return norm * s.value();
    }
};
} // namespace detail

// Shape of the fitted sandwich at t = 1 with pseudo-norm N:
//   m(g) = exp(-N(g)^2 / 4) / sqrt(1 + r N(g)).
inline double heat_shape(const GroupPoint& g) {
    const double n2 = pseudo_norm_sq(g);
    const double r = std::sqrt(g.x * g.x + g.y * g.y);
    return std::exp(-n2 / 4.0) / std::sqrt(1.0 + r * std::sqrt(n2));
}

// Kernel-density fit over endpoints of beta = 0 trajectories at t = 1.
// Evaluation points are a deterministic subsample of the endpoints inside
// the window {N(g) <= region}, plus the origin.
inline HeatBoundFit heat_shape_check(std::span<const GroupPoint> endpoints, double region,
                                     std::size_t max_eval_points = 400) {
    if (endpoints.size() < 1000)
        throw std::invalid_argument("heat_shape_check: needs at least 1000 endpoints");
    if (!(region > 0.0)) throw std::invalid_argument("heat_shape_check: region must be > 0");

    std::vector<GroupPoint> eval;
    for (const auto& p : endpoints) {
        if (pseudo_norm_sq(p) <= region * region) eval.push_back(p);
        if (eval.size() >= max_eval_points) break;
    }
    if (eval.size() < 100)
        throw std::invalid_argument("heat_shape_check: insufficient samples in window");

    const auto kde = detail::Kde3::fit(endpoints);

    std::vector<double> ratios(eval.size()), logdens(eval.size()), regressor(eval.size());
    double max_density = 0.0;
    for (std::size_t i = 0; i < eval.size(); ++i) {
        const double d = kde.density(eval[i]);
        ratios[i] = d / heat_shape(eval[i]);
        logdens[i] = std::log(std::max(d, 1e-300));
        regressor[i] = pseudo_norm_sq(eval[i]) / 4.0;
        max_density = std::max(max_density, d);
    }

    HeatBoundFit fit;
    fit.region = region;
    fit.n_eval = eval.size();
    std::vector<double> sorted = ratios;
    std::sort(sorted.begin(), sorted.end());
    fit.c1_hat = quantile_sorted(sorted, 0.005);
    fit.c2_hat = quantile_sorted(sorted, 0.995);
    std::size_t inside = 0;
    for (double r : ratios)
        if (r >= fit.c1_hat && r <= fit.c2_hat) ++inside;
    fit.frac_in_sandwich = static_cast<double>(inside) / static_cast<double>(ratios.size());

    // OLS slope of log p against N^2/4; negative slope = Gaussian-type decay
    const double mx = mean_of(regressor), my = mean_of(logdens);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < eval.size(); ++i) {
        sxx += (regressor[i] - mx) * (regressor[i] - mx);
        sxy += (regressor[i] - mx) * (logdens[i] - my);
    }
    fit.slope = sxy / sxx;
    fit.max_at_origin = kde.density(GroupPoint{}) >= max_density;
    return fit;
}

// Mass of the kernel-density estimate inside the window {N <= R}, by
// deterministic resampling from the KDE mixture.
inline double kde_mass_in_window(std::span<const GroupPoint> endpoints, double region,
                                 std::uint64_t seed, std::size_t n_draws = 20000) {
    const auto kde = detail::Kde3::fit(endpoints);
    Rng rng(child_seed(seed, 0x1de));
    std::size_t inside = 0;
    for (std::size_t i = 0; i < n_draws; ++i) {
        const auto& p = endpoints[static_cast<std::size_t>(rng.uniform() *
                                                           double(endpoints.size()))];
        const GroupPoint g{p.x + kde.hx * rng.normal(), p.y + kde.hy * rng.normal(),
                           p.z + kde.hz * rng.normal()};
        if (pseudo_norm_sq(g) <= region * region) ++inside;
    }
    return static_cast<double>(inside) / static_cast<double>(n_draws);
}

} // namespace carnotlab

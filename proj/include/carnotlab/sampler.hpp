#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "carnotlab/carnot.hpp"
#include "carnotlab/group.hpp"
#include "carnotlab/parallel.hpp"
#include "carnotlab/rng.hpp"

namespace carnotlab {

// One simulated trajectory of the group-valued Brownian motion, observed on
// a grid 0 = t_0 < t_1 < ... <= 1. Columns: planar Brownian coordinates,
// accumulated algebraic area, vertical Brownian component. The group point
// at grid index k has z-coordinate area[k] + beta * w[k].
//
// The area column is produced by exact group products of the fine Gaussian
// increments; that product IS the construction, no separate area scheme.
struct PathSample {
    std::vector<double> grid;
    std::vector<double> bx, by, area, w;
    double beta = 0.0;

    std::size_t size() const { return grid.size(); }

    GroupPoint point_at(std::size_t k) const {
        return {bx[k], by[k], area[k] + beta * w[k]};
    }
};

// Per-path stream layout (part of the reproducibility contract):
//   base  = SeedPlan::path_base(path_index)
//   horizontal stream = Rng(child_seed(base, 0)), drawing the planar (or
//       d-dimensional) increments in coordinate order per fine step;
//   vertical stream   = Rng(child_seed(base, 1)), drawing one increment per
//       grid cell, used only when beta > 0.
inline constexpr std::uint64_t kHorizontalStream = 0;
inline constexpr std::uint64_t kVerticalStream = 1;

struct WalkIncrements {
    std::vector<double> x, y, z;
};

// The i.i.d. Gaussian triples with covariance diag(1, 1, beta^2) driving a
// length-n walk. Exposed so tests can replay a walk symbolically.
inline WalkIncrements walk_increments(std::size_t n, double beta, std::uint64_t base_seed) {
    if (n == 0) throw std::invalid_argument("walk_increments: n must be >= 1");
    if (!(beta >= 0.0)) throw std::invalid_argument("walk_increments: beta must be >= 0");
    WalkIncrements inc;
    inc.x.resize(n);
    inc.y.resize(n);
    inc.z.assign(n, 0.0);
    Rng hor(child_seed(base_seed, kHorizontalStream));
    for (std::size_t i = 0; i < n; ++i) {
        inc.x[i] = hor.normal();
        inc.y[i] = hor.normal();
    }
    if (beta > 0.0) {
        Rng ver(child_seed(base_seed, kVerticalStream));
        for (std::size_t i = 0; i < n; ++i) inc.z[i] = beta * ver.normal();
    }
    return inc;
}

// S_n: the n-fold group product of the dilated increments
// (x_i/sqrt(n), y_i/sqrt(n), z_i/sqrt(n)).
inline GroupPoint walk_from_increments(const WalkIncrements& inc) {
    const std::size_t n = inc.x.size();
    const double root = std::sqrt(static_cast<double>(n));
    GroupPoint s{};
    for (std::size_t i = 0; i < n; ++i)
        s = detail::mul_unchecked(s, {inc.x[i] / root, inc.y[i] / root, inc.z[i] / root});
    return s;
}

inline GroupPoint walk_sample(std::size_t n, double beta, std::uint64_t seed) {
    return walk_from_increments(walk_increments(n, beta, seed));
}

// Algebraic area A_n = (1/2n) sum_{i,j} x_i eps_{ij} y_j of the walk with
// increments (x_i, y_i), eps_{ij} = sign(j - i). Prefix-sum form, O(n).
// Antisymmetric under swapping the inputs; zero on collinear increments.
inline double area_formula(std::span<const double> xs, std::span<const double> ys) {
    const std::size_t n = xs.size();
    if (n == 0) throw std::invalid_argument("area_formula: empty input");
    if (ys.size() != n) throw std::invalid_argument("area_formula: length mismatch");
    double suffix = 0.0;
    for (double v : ys) suffix += v;
    double prefix = 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        suffix -= ys[i];
        acc += xs[i] * (suffix - prefix);
        prefix += ys[i];
    }
    return acc / (2.0 * static_cast<double>(n));
}

// Path on grid {0} + obs_times, each cell subdivided into `substeps` fine
// Gaussian steps accumulated by exact group products.
inline PathSample sample_path_at(std::span<const double> obs_times, int substeps, double beta,
                                 std::uint64_t base_seed) {
    if (obs_times.empty()) throw std::invalid_argument("sample_path_at: no observation times");
    if (substeps < 1) throw std::invalid_argument("sample_path_at: substeps must be >= 1");
    if (!(beta >= 0.0)) throw std::invalid_argument("sample_path_at: beta must be >= 0");
    double prev = 0.0;
    for (double t : obs_times) {
        if (!(t > prev)) throw std::invalid_argument("sample_path_at: times must be increasing and > 0");
        prev = t;
    }

    PathSample ps;
    ps.beta = beta;
    const std::size_t k = obs_times.size();
    ps.grid.reserve(k + 1);
    ps.bx.reserve(k + 1);
    ps.by.reserve(k + 1);
    ps.area.reserve(k + 1);
    ps.w.reserve(k + 1);
    ps.grid.push_back(0.0);
    ps.bx.push_back(0.0);
    ps.by.push_back(0.0);
    ps.area.push_back(0.0);
    ps.w.push_back(0.0);

    Rng hor(child_seed(base_seed, kHorizontalStream));
    Rng ver(child_seed(base_seed, kVerticalStream));

    GroupPoint state{};
    double wsum = 0.0;
    double t_prev = 0.0;
    for (double t : obs_times) {
        const double dt = (t - t_prev) / static_cast<double>(substeps);
        const double sd = std::sqrt(dt);
        for (int s = 0; s < substeps; ++s) {
            const double dx = sd * hor.normal();
            const double dy = sd * hor.normal();
            state = detail::mul_unchecked(state, {dx, dy, 0.0});
        }
        if (beta > 0.0) wsum += std::sqrt(t - t_prev) * ver.normal();
        ps.grid.push_back(t);
        ps.bx.push_back(state.x);
        ps.by.push_back(state.y);
        ps.area.push_back(state.z);
        ps.w.push_back(wsum);
        t_prev = t;
    }
    return ps;
}

// Uniform grid k/K, k = 1..K.
inline std::vector<double> uniform_grid(std::size_t K) {
    std::vector<double> g(K);
    for (std::size_t k = 1; k <= K; ++k) g[k - 1] = static_cast<double>(k) / double(K);
    return g;
}

inline PathSample path_sample(std::size_t K, int substeps, double beta, std::uint64_t seed) {
    if (K == 0) throw std::invalid_argument("path_sample: K must be >= 1");
    const auto grid = uniform_grid(K);
    return sample_path_at(grid, substeps, beta, seed);
}

struct JointSample {
    GroupPoint h1;
    std::vector<GroupPoint> ht; // one per requested time, same trajectory
};

// (H_1, H_t for t in ts) read off one trajectory. ts must be sorted,
// strictly increasing, inside (0, 1].
inline JointSample joint_sample(std::span<const double> ts, double beta, std::uint64_t seed,
                                int substeps = 64) {
    if (ts.empty()) throw std::invalid_argument("joint_sample: empty time list");
    double prev = 0.0;
    for (double t : ts) {
        if (!(t > prev) || t > 1.0)
            throw std::invalid_argument("joint_sample: times must be increasing, in (0,1]");
        prev = t;
    }
    std::vector<double> obs(ts.begin(), ts.end());
    const bool has_one = obs.back() == 1.0;
    if (!has_one) obs.push_back(1.0);

    const PathSample ps = sample_path_at(obs, substeps, beta, seed);
    JointSample js;
    js.h1 = ps.point_at(ps.size() - 1);
    js.ht.reserve(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) js.ht.push_back(ps.point_at(i + 1));
    return js;
}

// Rank-two Carnot trajectory: d-dimensional Brownian path with m vertical
// components accumulated via the group product of fine increments. The
// vertical components come out as z_l(t) = (1/2) sum_{p<q} b^(l)_{pq}
// (int x_p dx_q - int x_q dx_p); the 1/2 is forced by the group law (see
// the product construction), and fixes the sign/normalization convention:
// with the d=2, m=1 spec B = [[0,-1],[1,0]] this reproduces the Heisenberg
// (bx, by, area) columns bit for bit on a shared seed.
struct CarnotPathSample {
    std::vector<double> grid;
    std::size_t d = 0, m = 0;
    std::vector<double> x; // (grid.size()) x d, row-major
    std::vector<double> z; // (grid.size()) x m, row-major

    CarnotPoint point_at(std::size_t k) const {
        CarnotPoint p;
        p.x.assign(x.begin() + static_cast<std::ptrdiff_t>(k * d),
                   x.begin() + static_cast<std::ptrdiff_t>((k + 1) * d));
        p.z.assign(z.begin() + static_cast<std::ptrdiff_t>(k * m),
                   z.begin() + static_cast<std::ptrdiff_t>((k + 1) * m));
        return p;
    }
};

inline CarnotPathSample sample_carnot_path_at(const CarnotSpec& spec,
                                              std::span<const double> obs_times, int substeps,
                                              std::uint64_t base_seed) {
    if (obs_times.empty())
        throw std::invalid_argument("sample_carnot_path_at: no observation times");
    if (substeps < 1) throw std::invalid_argument("sample_carnot_path_at: substeps must be >= 1");
    double prev = 0.0;
    for (double t : obs_times) {
        if (!(t > prev))
            throw std::invalid_argument("sample_carnot_path_at: times must be increasing, > 0");
        prev = t;
    }

    const std::size_t d = spec.d(), m = spec.m();
    CarnotPathSample ps;
    ps.d = d;
    ps.m = m;
    ps.grid.reserve(obs_times.size() + 1);
    ps.grid.push_back(0.0);
    ps.x.assign(d, 0.0);
    ps.z.assign(m, 0.0);

    Rng hor(child_seed(base_seed, kHorizontalStream));
    std::vector<double> state_x(d, 0.0), state_z(m, 0.0), step(d);
    double t_prev = 0.0;
    for (double t : obs_times) {
        const double dt = (t - t_prev) / static_cast<double>(substeps);
        const double sd = std::sqrt(dt);
        for (int s = 0; s < substeps; ++s) {
            for (std::size_t p = 0; p < d; ++p) step[p] = sd * hor.normal();
            detail::carnot_mul_into(spec, state_x, state_z, step.data());
        }
        ps.grid.push_back(t);
        ps.x.insert(ps.x.end(), state_x.begin(), state_x.end());
        ps.z.insert(ps.z.end(), state_z.begin(), state_z.end());
        t_prev = t;
    }
    return ps;
}

inline CarnotPathSample carnot_path_sample(const CarnotSpec& spec, std::size_t K, int substeps,
                                           std::uint64_t seed) {
    if (K == 0) throw std::invalid_argument("carnot_path_sample: K must be >= 1");
    const auto grid = uniform_grid(K);
    return sample_carnot_path_at(spec, grid, substeps, seed);
}

// Endpoint of a fine walk with increments composed in chronological order
// (left construction, the default) or reversed (right construction). The two
// agree in law; the right construction realizes the right-invariant
// semigroup started at the origin.
inline GroupPoint walk_endpoint(std::size_t n_steps, double beta, std::uint64_t base_seed,
                                bool right_composed) {
    if (n_steps == 0) throw std::invalid_argument("walk_endpoint: n_steps must be >= 1");
    Rng hor(child_seed(base_seed, kHorizontalStream));
    const double sd = std::sqrt(1.0 / static_cast<double>(n_steps));
    GroupPoint state{};
    for (std::size_t i = 0; i < n_steps; ++i) {
        const GroupPoint inc{sd * hor.normal(), sd * hor.normal(), 0.0};
        state = right_composed ? detail::mul_unchecked(inc, state)
                               : detail::mul_unchecked(state, inc);
    }
    if (beta > 0.0) {
        Rng ver(child_seed(base_seed, kVerticalStream));
        state.z += beta * ver.normal();
    }
    return state;
}

} // namespace carnotlab

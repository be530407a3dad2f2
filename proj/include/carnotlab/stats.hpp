#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "carnotlab/rng.hpp"

namespace carnotlab {

// A Monte Carlo estimate with a bootstrap confidence half-width (percentile
// method, 200 resamples, 95% by default). Every reported number carries its
// sample count and the seed it was derived from.
struct McEstimate {
    double value = 0.0;
    double ci_half_width = 0.0;
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
};

// Neumaier-compensated summation.
class KahanSum {
  public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double kahan_total(std::span<const double> v) {
    KahanSum s;
    for (double x : v) s.add(x);
    return s.value();
}

inline double mean_of(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("mean_of: empty input");
    return kahan_total(v) / static_cast<double>(v.size());
}

// Phi(u) = u log u with the standard convention 0 log 0 = 0.
inline double phi_entropy(double u) {
    if (u < 0.0) throw std::invalid_argument("phi_entropy: negative input");
    return u == 0.0 ? 0.0 : u * std::log(u);
}

inline double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile_sorted: empty input");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    if (i + 1 < sorted.size()) return sorted[i] * (1.0 - frac) + sorted[i + 1] * frac;
    return sorted.back();
}

// Percentile bootstrap for a statistic that is a function of column means.
// `columns` are equal-length per-sample value arrays; `combine` maps the
// vector of column means to the statistic. Resampling draws shared indices
// across columns, so jointly defined statistics (ratios, entropies) stay
// coherent. Sequential by construction: bit-reproducible for a given seed.
inline McEstimate bootstrap_of_means(const std::vector<std::span<const double>>& columns,
                                     const std::function<double(std::span<const double>)>& combine,
                                     std::uint64_t seed, int n_resamples = 200,
                                     double confidence = 0.95) {
    if (columns.empty()) throw std::invalid_argument("bootstrap_of_means: no columns");
    const std::size_t n = columns.front().size();
    if (n == 0) throw std::invalid_argument("bootstrap_of_means: empty sample");
    for (const auto& c : columns)
        if (c.size() != n) throw std::invalid_argument("bootstrap_of_means: ragged columns");

    const std::size_t k = columns.size();
    std::vector<double> means(k);
    for (std::size_t j = 0; j < k; ++j) means[j] = mean_of(columns[j]);
    const double value = combine(means);

    Rng rng(child_seed(seed, 0xb007));
    std::vector<double> stats(static_cast<std::size_t>(n_resamples));
    std::vector<double> sums(k);
    for (auto& stat : stats) {
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t idx = static_cast<std::size_t>(rng.uniform() * double(n));
            for (std::size_t j = 0; j < k; ++j) sums[j] += columns[j][idx];
        }
        for (std::size_t j = 0; j < k; ++j) sums[j] /= double(n);
        stat = combine(sums);
    }
    std::sort(stats.begin(), stats.end());
    const double alpha = (1.0 - confidence) / 2.0;
    const double lo = quantile_sorted(stats, alpha);
    const double hi = quantile_sorted(stats, 1.0 - alpha);
    return {value, 0.5 * (hi - lo), n, seed};
}

// Plug-in mean with bootstrap CI.
inline McEstimate mc_mean(std::span<const double> values, std::uint64_t seed) {
    return bootstrap_of_means({values}, [](std::span<const double> m) { return m[0]; }, seed);
}

// Plug-in entropy of nonnegative inputs: mean(Phi(v)) - Phi(mean(v)).
// Nonnegative by Jensen up to CI. Inputs are typically f^2 samples.
inline McEstimate mc_entropy(std::span<const double> values, std::uint64_t seed) {
    if (values.empty()) throw std::invalid_argument("mc_entropy: empty input");
    std::vector<double> phis(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) phis[i] = phi_entropy(values[i]);
    return bootstrap_of_means(
        {values, phis},
        [](std::span<const double> m) { return m[1] - phi_entropy(m[0]); }, seed);
}

// Plug-in variance: mean(v^2) - mean(v)^2.
inline McEstimate mc_variance(std::span<const double> values, std::uint64_t seed) {
    if (values.empty()) throw std::invalid_argument("mc_variance: empty input");
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) sq[i] = values[i] * values[i];
    return bootstrap_of_means(
        {values, sq}, [](std::span<const double> m) { return m[1] - m[0] * m[0]; }, seed);
}

} // namespace carnotlab

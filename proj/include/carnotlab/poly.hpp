#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>

namespace carnotlab {

// Sparse multivariate polynomial with real coefficients. The variable count
// is fixed per instance (up to kMaxVars); exponent vectors are the map keys.
class Poly {
  public:
    static constexpr std::size_t kMaxVars = 12;
    using Expo = std::array<std::uint8_t, kMaxVars>;

    explicit Poly(std::size_t nvars) : nvars_(nvars) {
        if (nvars == 0 || nvars > kMaxVars)
            throw std::invalid_argument("Poly: unsupported variable count");
    }

    static Poly constant(std::size_t nvars, double c) {
        Poly p(nvars);
        if (c != 0.0) p.terms_[Expo{}] = c;
        return p;
    }

    static Poly monomial(std::size_t nvars, std::size_t var, unsigned degree = 1,
                         double coeff = 1.0) {
        Poly p(nvars);
        if (var >= nvars) throw std::invalid_argument("Poly::monomial: variable out of range");
        if (coeff != 0.0) {
            Expo e{};
            e[var] = static_cast<std::uint8_t>(degree);
            p.terms_[e] = coeff;
        }
        return p;
    }

    std::size_t nvars() const { return nvars_; }
    std::size_t term_count() const { return terms_.size(); }
    bool is_zero() const { return terms_.empty(); }

    void add_term(const Expo& e, double coeff) {
        auto [it, inserted] = terms_.try_emplace(e, coeff);
        if (!inserted) {
            it->second += coeff;
            if (it->second == 0.0) terms_.erase(it);
        }
    }

    Poly& operator+=(const Poly& o) {
        check_same(o);
        for (const auto& [e, c] : o.terms_) add_term(e, c);
        return *this;
    }

    Poly operator+(const Poly& o) const {
        Poly r = *this;
        r += o;
        return r;
    }

    Poly operator-() const {
        Poly r = *this;
        for (auto& [e, c] : r.terms_) c = -c;
        return r;
    }

    Poly operator-(const Poly& o) const { return *this + (-o); }

    Poly operator*(double s) const {
        Poly r(nvars_);
        if (s != 0.0)
            for (const auto& [e, c] : terms_) r.terms_[e] = c * s;
        return r;
    }

    Poly operator*(const Poly& o) const {
        check_same(o);
        Poly r(nvars_);
        for (const auto& [ea, ca] : terms_) {
            for (const auto& [eb, cb] : o.terms_) {
                Expo e{};
                for (std::size_t v = 0; v < nvars_; ++v) {
                    const unsigned s = unsigned(ea[v]) + unsigned(eb[v]);
                    if (s > 255) throw std::overflow_error("Poly: degree overflow");
                    e[v] = static_cast<std::uint8_t>(s);
                }
                r.add_term(e, ca * cb);
            }
        }
        return r;
    }

    Poly partial(std::size_t var) const {
        if (var >= nvars_) throw std::invalid_argument("Poly::partial: variable out of range");
        Poly r(nvars_);
        for (const auto& [e, c] : terms_) {
            if (e[var] == 0) continue;
            Expo d = e;
            d[var] = static_cast<std::uint8_t>(e[var] - 1);
            r.add_term(d, c * double(e[var]));
        }
        return r;
    }

    double evaluate(std::span<const double> v) const {
        if (v.size() != nvars_) throw std::invalid_argument("Poly::evaluate: point size mismatch");
        double sum = 0.0;
        for (const auto& [e, c] : terms_) {
            double t = c;
            for (std::size_t var = 0; var < nvars_; ++var) {
                const double base = v[var];
                for (unsigned k = 0; k < e[var]; ++k) t *= base;
            }
            sum += t;
        }
        return sum;
    }

    unsigned degree(std::size_t var) const {
        unsigned d = 0;
        for (const auto& [e, c] : terms_) d = std::max(d, unsigned(e[var]));
        return d;
    }

    // Max |coefficient| difference against another polynomial.
    double max_coeff_diff(const Poly& o) const {
        check_same(o);
        double m = 0.0;
        for (const auto& [e, c] : terms_) {
            const auto it = o.terms_.find(e);
            m = std::max(m, std::abs(c - (it == o.terms_.end() ? 0.0 : it->second)));
        }
        for (const auto& [e, c] : o.terms_)
            if (!terms_.contains(e)) m = std::max(m, std::abs(c));
        return m;
    }

    const std::map<Expo, double>& terms() const { return terms_; }

  private:
    void check_same(const Poly& o) const {
        if (nvars_ != o.nvars_) throw std::invalid_argument("Poly: variable count mismatch");
    }

    std::size_t nvars_;
    std::map<Expo, double> terms_;
};

inline Poly operator*(double s, const Poly& p) { return p * s; }

} // namespace carnotlab

#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "carnotlab/carnot.hpp"
#include "carnotlab/group.hpp"
#include "carnotlab/poly.hpp"
#include "carnotlab/smalleig.hpp"

namespace carnotlab {

// Left-invariant canonical fields X, Y, Z and their right-invariant
// counterparts on H:
//   X = d/dx - (y/2) d/dz,  Y = d/dy + (x/2) d/dz,  Z = d/dz,
//   Xhat = d/dx + (y/2) d/dz,  Yhat = d/dy - (x/2) d/dz.
enum class Field { X, Y, Z, XHat, YHat };

// A member of the differentiation-closed family P(v) * exp(v'Qv + l.v + c):
// sparse polynomial times quadratic-exponential envelope. The family is
// closed under partial derivatives, multiplication by polynomials, products
// (envelopes add) and sums of members sharing one envelope, which covers
// every operator used here with exact coefficient arithmetic.
//
// Instances are immutable and safe to share across threads.
class TestFunction {
  public:
    TestFunction(Poly poly, std::vector<double> Q, std::vector<double> l, double c)
        : poly_(std::move(poly)), Q_(std::move(Q)), l_(std::move(l)), c_(c) {
        const std::size_t n = poly_.nvars();
        if (Q_.size() != n * n || l_.size() != n)
            throw std::invalid_argument("TestFunction: envelope size mismatch");
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < i; ++j)
                if (Q_[i * n + j] != Q_[j * n + i])
                    throw std::invalid_argument("TestFunction: envelope Q must be symmetric");
    }

    static TestFunction polynomial(Poly p) {
        const std::size_t n = p.nvars();
        return {std::move(p), std::vector<double>(n * n, 0.0), std::vector<double>(n, 0.0), 0.0};
    }

    static TestFunction constant(std::size_t nvars, double value) {
        return polynomial(Poly::constant(nvars, value));
    }

    static TestFunction coordinate(std::size_t nvars, std::size_t var) {
        return polynomial(Poly::monomial(nvars, var));
    }

    std::size_t nvars() const { return poly_.nvars(); }
    const Poly& poly() const { return poly_; }
    const std::vector<double>& envelope_q() const { return Q_; }
    const std::vector<double>& envelope_l() const { return l_; }
    double envelope_c() const { return c_; }

    bool same_envelope(const TestFunction& o) const {
        return Q_ == o.Q_ && l_ == o.l_ && c_ == o.c_;
    }

    double envelope_exponent(std::span<const double> v) const {
        const std::size_t n = nvars();
        double e = c_;
        for (std::size_t i = 0; i < n; ++i) {
            double row = l_[i];
            for (std::size_t j = 0; j < n; ++j) row += Q_[i * n + j] * v[j];
            e += row * v[i];
        }
        return e;
    }

    double evaluate(std::span<const double> v) const {
        const double r = poly_.evaluate(v) * std::exp(envelope_exponent(v));
        if (!std::isfinite(r))
            throw std::range_error("TestFunction::evaluate: overflow (non-finite value)");
        return r;
    }

    double evaluate(const GroupPoint& p) const {
        const double v[3] = {p.x, p.y, p.z};
        return evaluate(std::span<const double>(v, 3));
    }

    // Exact symbolic derivative: (dP + P * dE) exp(E), dE linear.
    TestFunction partial(std::size_t var) const {
        const std::size_t n = nvars();
        if (var >= n) throw std::invalid_argument("TestFunction::partial: variable out of range");
        Poly denv(n);
        for (std::size_t j = 0; j < n; ++j) {
            const double coeff = 2.0 * Q_[var * n + j];
            if (coeff != 0.0) denv += Poly::monomial(n, j, 1, coeff);
        }
        if (l_[var] != 0.0) denv += Poly::constant(n, l_[var]);
        return {poly_.partial(var) + poly_ * denv, Q_, l_, c_};
    }

    TestFunction apply_field(Field field) const {
        if (nvars() != 3)
            throw std::invalid_argument("TestFunction::apply_field: requires 3 variables");
        const auto half_y = [&](double s) { return Poly::monomial(3, 1, 1, s); };
        const auto half_x = [&](double s) { return Poly::monomial(3, 0, 1, s); };
        switch (field) {
            case Field::X: return partial(0) + partial(2).mul_poly(half_y(-0.5));
            case Field::Y: return partial(1) + partial(2).mul_poly(half_x(0.5));
            case Field::Z: return partial(2);
            case Field::XHat: return partial(0) + partial(2).mul_poly(half_y(0.5));
            case Field::YHat: return partial(1) + partial(2).mul_poly(half_x(-0.5));
        }
        throw std::logic_error("apply_field: unreachable");
    }

    TestFunction mul_poly(const Poly& p) const { return {poly_ * p, Q_, l_, c_}; }

    TestFunction operator*(double s) const { return {poly_ * s, Q_, l_, c_}; }

    TestFunction operator+(const TestFunction& o) const {
        if (!same_envelope(o))
            throw std::invalid_argument("TestFunction: sum requires identical envelopes");
        return {poly_ + o.poly_, Q_, l_, c_};
    }

    TestFunction operator-(const TestFunction& o) const { return *this + (o * -1.0); }

    TestFunction operator*(const TestFunction& o) const {
        const std::size_t n = nvars();
        if (n != o.nvars()) throw std::invalid_argument("TestFunction: variable count mismatch");
        std::vector<double> q(n * n), l(n);
        for (std::size_t i = 0; i < n * n; ++i) q[i] = Q_[i] + o.Q_[i];
        for (std::size_t i = 0; i < n; ++i) l[i] = l_[i] + o.l_[i];
        return {poly_ * o.poly_, std::move(q), std::move(l), c_ + o.c_};
    }

    // Conservative integrability test against the heat-kernel law gamma.
    // Horizontal coordinates have Gaussian tails, so any linear exponent is
    // fine there; vertical coordinates (index >= vertical_begin) only have
    // exponential tails with an unknown rate, so the envelope must either be
    // strictly negative-quadratic in that coordinate or not involve it at
    // all. Polynomial growth is always admissible. Moment weights (any fixed
    // polynomial order) do not change the verdict.
    bool is_integrable(std::size_t vertical_begin = 2) const {
        const std::size_t n = nvars();
        auto ev = detail::symmetric_eigenvalues(Q_, n);
        for (double lam : ev)
            if (lam > 1e-12) return false;
        for (std::size_t k = vertical_begin; k < n; ++k) {
            if (Q_[k * n + k] < -1e-12) continue;
            bool row_zero = true;
            for (std::size_t j = 0; j < n; ++j)
                if (Q_[k * n + j] != 0.0) row_zero = false;
            if (!row_zero || l_[k] != 0.0) return false;
        }
        return true;
    }

  private:
    Poly poly_;
    std::vector<double> Q_; // symmetric, row-major
    std::vector<double> l_;
    double c_;
};

inline TestFunction operator*(double s, const TestFunction& f) { return f * s; }

// Operator-order composition: field_product(f, {X, Y}) is XYf, i.e. Y acts
// first. Keeps call sites readable where second-order products appear.
inline TestFunction field_product(const TestFunction& f, std::initializer_list<Field> ops) {
    TestFunction g = f;
    for (auto it = std::rbegin(ops); it != std::rend(ops); ++it) g = g.apply_field(*it);
    return g;
}

struct NamedTestFunction {
    std::string name;
    bool horizontal = false; // true when the function ignores every vertical coordinate
    TestFunction fn;
};

namespace detail {

inline TestFunction envelope_only(std::size_t nvars, std::vector<double> Q,
                                  std::vector<double> l, double c = 0.0) {
    return {Poly::constant(nvars, 1.0), std::move(Q), std::move(l), c};
}

// exp(-s * (sum of squares over vars))
inline TestFunction radial_gaussian(std::size_t nvars, std::span<const std::size_t> vars,
                                    double s) {
    std::vector<double> Q(nvars * nvars, 0.0);
    for (std::size_t v : vars) Q[v * nvars + v] = -s;
    return envelope_only(nvars, std::move(Q), std::vector<double>(nvars, 0.0));
}

inline TestFunction exp_linear(std::size_t nvars, std::size_t var, double coeff) {
    std::vector<double> l(nvars, 0.0);
    l[var] = coeff;
    return envelope_only(nvars, std::vector<double>(nvars * nvars, 0.0), std::move(l));
}

} // namespace detail

// The default test-function suite on H. A fixed, deterministic stand-in for
// the Schwartz class: results verified on it are evidence at desk scale, not
// a proof over all of Schwartz space. Members tagged `horizontal` do not
// depend on z.
inline std::vector<NamedTestFunction> standard_suite() {
    using detail::exp_linear;
    using detail::radial_gaussian;
    constexpr std::size_t n = 3;
    const std::size_t xy[] = {0, 1};
    const std::size_t xyz[] = {0, 1, 2};
    const std::size_t zz[] = {2};

    const auto x = Poly::monomial(n, 0);
    const auto y = Poly::monomial(n, 1);
    const auto z = Poly::monomial(n, 2);
    const auto one = Poly::constant(n, 1.0);

    const TestFunction g4 = radial_gaussian(n, xyz, 0.25); // exp(-(x^2+y^2+z^2)/4)

    std::vector<NamedTestFunction> suite;
    auto add = [&](std::string name, bool horizontal, TestFunction f) {
        suite.push_back({std::move(name), horizontal, std::move(f)});
    };

    add("const_1", true, TestFunction::constant(n, 1.0));
    add("coord_x", true, TestFunction::coordinate(n, 0));
    add("coord_y", true, TestFunction::coordinate(n, 1));
    add("coord_z", false, TestFunction::coordinate(n, 2));
    add("exp_ax_half:a=0.25", true, exp_linear(n, 0, 0.125));
    add("exp_ax_half:a=0.5", true, exp_linear(n, 0, 0.25));
    add("exp_ax_half:a=1", true, exp_linear(n, 0, 0.5));
    add("gauss_r:s=0.25", true, radial_gaussian(n, xy, 0.25));
    add("gauss_r:s=0.5", true, radial_gaussian(n, xy, 0.5));
    add("z_gauss4", false, g4.mul_poly(z));
    add("gauss4_one_plus_z2", false, g4.mul_poly(one + z * z));
    add("coord_xy", true, TestFunction::polynomial(x * y));
    add("x2_minus_y2", true, TestFunction::polynomial(x * x - y * y));
    add("hermite_x2", true, TestFunction::polynomial(x * x - one));
    add("z2_gauss4", false, g4.mul_poly(z * z));
    add("x_gauss_r", true, radial_gaussian(n, xy, 0.5).mul_poly(x));
    add("y_gauss_r", true, radial_gaussian(n, xy, 0.5).mul_poly(y));
    add("xz_gauss4", false, g4.mul_poly(x * z));
    add("sum_xyz_gauss4", false, g4.mul_poly(x + y + z));
    add("z_gauss_z", false, radial_gaussian(n, zz, 0.25).mul_poly(z));
    add("poly_mix_gauss4", false, g4.mul_poly(one + x + z * z));
    add("quad_gauss4", false, g4.mul_poly(x * x + y * y + z * z));
    return suite;
}

// Suite over R^(d+m) for a rank-two Carnot group; mirrors the H suite with
// horizontal coordinates first, vertical coordinates after.
inline std::vector<NamedTestFunction> carnot_suite(const CarnotSpec& spec) {
    using detail::radial_gaussian;
    const std::size_t d = spec.d(), m = spec.m(), n = d + m;
    if (n > Poly::kMaxVars)
        throw std::invalid_argument("carnot_suite: too many variables");

    std::vector<std::size_t> hor(d), all(n);
    for (std::size_t i = 0; i < d; ++i) hor[i] = i;
    for (std::size_t i = 0; i < n; ++i) all[i] = i;

    const auto one = Poly::constant(n, 1.0);
    const auto x1 = Poly::monomial(n, 0);
    const auto z1 = Poly::monomial(n, d);
    const TestFunction g4 = radial_gaussian(n, all, 0.25);

    std::vector<NamedTestFunction> suite;
    auto add = [&](std::string name, bool horizontal, TestFunction f) {
        suite.push_back({std::move(name), horizontal, std::move(f)});
    };

    add("const_1", true, TestFunction::constant(n, 1.0));
    for (std::size_t p = 0; p < d; ++p)
        add("coord_x" + std::to_string(p + 1), true, TestFunction::coordinate(n, p));
    for (std::size_t l = 0; l < m; ++l)
        add("coord_z" + std::to_string(l + 1), false, TestFunction::coordinate(n, d + l));
    add("exp_ax1_half:a=0.5", true, detail::exp_linear(n, 0, 0.25));
    add("gauss_x:s=0.25", true, radial_gaussian(n, hor, 0.25));
    add("gauss_x:s=0.5", true, radial_gaussian(n, hor, 0.5));
    add("z1_gauss4", false, g4.mul_poly(z1));
    add("gauss4_one_plus_z1sq", false, g4.mul_poly(one + z1 * z1));
    add("x1z1_gauss4", false, g4.mul_poly(x1 * z1));
    return suite;
}

// Resolve a suite member by name, including parametric families addressed as
// "family:key=value" (e.g. "exp_ax_half:a=0.5", "gauss_r:s=0.3").
inline NamedTestFunction resolve_function(const std::string& name) {
    for (auto& member : standard_suite())
        if (member.name == name) return member;

    const auto colon = name.find(':');
    if (colon != std::string::npos) {
        const std::string family = name.substr(0, colon);
        const std::string params = name.substr(colon + 1);
        const auto eq = params.find('=');
        if (eq != std::string::npos) {
            const std::string key = params.substr(0, eq);
            double value = 0.0;
            try {
                value = std::stod(params.substr(eq + 1));
            } catch (const std::exception&) {
                throw std::invalid_argument("resolve_function: bad parameter in '" + name + "'");
            }
            if (family == "exp_ax_half" && key == "a")
                return {name, true, detail::exp_linear(3, 0, value / 2.0)};
            if (family == "gauss_r" && key == "s") {
                if (!(value > 0.0))
                    throw std::invalid_argument("resolve_function: gauss_r needs s > 0");
                const std::size_t xy[] = {0, 1};
                return {name, true, detail::radial_gaussian(3, xy, value)};
            }
        }
    }
    throw std::invalid_argument("resolve_function: unknown test function '" + name + "'");
}

} // namespace carnotlab

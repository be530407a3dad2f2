#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "carnotlab/group.hpp"
#include "carnotlab/smalleig.hpp"

namespace carnotlab {

// A point of a rank-two homogeneous Carnot group: d horizontal and m
// vertical coordinates.
struct CarnotPoint {
    std::vector<double> x;
    std::vector<double> z;

    bool operator==(const CarnotPoint&) const = default;
};

// Defining data of a rank-two homogeneous Carnot group on R^d x R^m:
// m linearly independent skew-symmetric d x d matrices B^(l), giving the
// product (x,z)*(x',z') = (x+x', z + z' + <Bx,x'>/2) componentwise in l.
//
// Construct through `validated` (or the file parser); that enforces
// skew-symmetry and linear independence of the B^(l). The thresholds are
// parameters with defaults loose enough for hand-entered matrices.
class CarnotSpec {
  public:
    static CarnotSpec validated(std::size_t d, std::size_t m,
                                std::vector<std::vector<double>> B,
                                double skew_tol = 1e-12, double indep_tol = 1e-10) {
        if (d == 0 || m == 0) throw std::invalid_argument("CarnotSpec: d and m must be positive");
        if (B.size() != m) throw std::invalid_argument("CarnotSpec: expected m matrices");
        for (const auto& mat : B) {
            if (mat.size() != d * d)
                throw std::invalid_argument("CarnotSpec: matrix is not d x d");
            for (double v : mat)
                if (!std::isfinite(v)) throw std::invalid_argument("CarnotSpec: non-finite entry");
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j)
                    if (std::abs(mat[i * d + j] + mat[j * d + i]) > skew_tol)
                        throw std::invalid_argument("CarnotSpec: matrix not skew-symmetric");
        }
        // Smallest singular value of the m x d^2 stacking, via the m x m Gram
        // matrix. Rejects rank-deficient families.
        std::vector<double> gram(m * m, 0.0);
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b) {
                double s = 0.0;
                for (std::size_t k = 0; k < d * d; ++k) s += B[a][k] * B[b][k];
                gram[a * m + b] = s;
            }
        const auto ev = detail::symmetric_eigenvalues(gram, m);
        const double lam_min = *std::min_element(ev.begin(), ev.end());
        if (!(lam_min > 0.0) || std::sqrt(std::max(lam_min, 0.0)) <= indep_tol)
            throw std::invalid_argument("CarnotSpec: matrices are not linearly independent");

        CarnotSpec spec;
        spec.d_ = d;
        spec.m_ = m;
        spec.B_ = std::move(B);
        return spec;
    }

    // The d=2, m=1 spec with B = [[0,-1],[1,0]], which reproduces the
    // Heisenberg group law on identified coordinates.
    static CarnotSpec heisenberg() {
        return validated(2, 1, {{0.0, -1.0, 1.0, 0.0}});
    }

    std::size_t d() const { return d_; }
    std::size_t m() const { return m_; }
    const std::vector<double>& B(std::size_t l) const { return B_.at(l); }
    double b(std::size_t l, std::size_t p, std::size_t q) const { return B_.at(l)[p * d_ + q]; }

    CarnotPoint origin() const {
        return {std::vector<double>(d_, 0.0), std::vector<double>(m_, 0.0)};
    }

    void check_point(const CarnotPoint& g) const {
        if (g.x.size() != d_ || g.z.size() != m_)
            throw std::invalid_argument("CarnotPoint: dimension mismatch with spec");
        for (double v : g.x)
            if (!std::isfinite(v)) throw std::invalid_argument("CarnotPoint: non-finite entry");
        for (double v : g.z)
            if (!std::isfinite(v)) throw std::invalid_argument("CarnotPoint: non-finite entry");
    }

  private:
    CarnotSpec() = default;
    std::size_t d_ = 0;
    std::size_t m_ = 0;
    std::vector<std::vector<double>> B_;
};

namespace detail {
// z-increments <B^(l) x, x'>/2 accumulated into z, no shape checks.
inline void carnot_mul_into(const CarnotSpec& spec, std::vector<double>& x,
                            std::vector<double>& z, const double* hx) {
    const std::size_t d = spec.d(), m = spec.m();
    for (std::size_t l = 0; l < m; ++l) {
        const auto& B = spec.B(l);
        double s = 0.0;
        for (std::size_t p = 0; p < d; ++p) {
            double row = 0.0;
            for (std::size_t q = 0; q < d; ++q) row += B[p * d + q] * x[q];
            s += row * hx[p];
        }
        z[l] += 0.5 * s;
    }
    for (std::size_t p = 0; p < d; ++p) x[p] += hx[p];
}
} // namespace detail

inline CarnotPoint carnot_multiply(const CarnotSpec& spec, const CarnotPoint& g,
                                   const CarnotPoint& h) {
    spec.check_point(g);
    spec.check_point(h);
    const std::size_t d = spec.d(), m = spec.m();
    CarnotPoint out = g;
    for (std::size_t l = 0; l < m; ++l) {
        const auto& B = spec.B(l);
        double s = 0.0;
        for (std::size_t p = 0; p < d; ++p) {
            double row = 0.0;
            for (std::size_t q = 0; q < d; ++q) row += B[p * d + q] * g.x[q];
            s += row * h.x[p];
        }
        out.z[l] = g.z[l] + h.z[l] + 0.5 * s;
    }
    for (std::size_t p = 0; p < d; ++p) out.x[p] = g.x[p] + h.x[p];
    return out;
}

inline CarnotPoint carnot_inverse(const CarnotSpec& spec, const CarnotPoint& g) {
    spec.check_point(g);
    CarnotPoint out = g;
    for (auto& v : out.x) v = -v;
    for (auto& v : out.z) v = -v;
    return out;
}

inline CarnotPoint carnot_dilate(const CarnotSpec& spec, double lambda, const CarnotPoint& g) {
    if (!(lambda > 0.0)) throw std::domain_error("carnot_dilate: lambda must be > 0");
    spec.check_point(g);
    CarnotPoint out = g;
    for (auto& v : out.x) v *= lambda;
    for (auto& v : out.z) v *= lambda * lambda;
    return out;
}

inline double carnot_pseudo_norm_sq(const CarnotSpec& spec, const CarnotPoint& g) {
    spec.check_point(g);
    double r2 = 0.0;
    for (double v : g.x) r2 += v * v;
    double zn = 0.0;
    for (double v : g.z) zn += v * v;
    return r2 + std::sqrt(zn);
}

// --- spec file format ------------------------------------------------------
//
//   # comment
//   d = 2
//   m = 1
//   B1 =
//   0 -1
//   1  0
//
// Keys d and m must come before the matrix blocks; block Bl is followed by d
// rows of d whitespace-separated reals. Errors carry 1-based line numbers.

class CarnotSpecParseError : public std::runtime_error {
  public:
    CarnotSpecParseError(int line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    int line() const { return line_; }

  private:
    int line_;
};

inline CarnotSpec parse_carnot_spec(std::istream& in) {
    std::size_t d = 0, m = 0;
    std::vector<std::vector<double>> B;
    std::string line;
    int lineno = 0;
    int pending_matrix = -1; // index of matrix currently being filled
    std::size_t pending_rows = 0;

    auto strip = [](std::string s) {
        const auto hash = s.find('#');
        if (hash != std::string::npos) s.erase(hash);
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return std::string{};
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    };

    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = strip(line);
        if (s.empty()) continue;

        if (pending_matrix >= 0) {
            std::istringstream row(s);
            std::vector<double> vals;
            double v;
            while (row >> v) vals.push_back(v);
            if (!row.eof())
                throw CarnotSpecParseError(lineno, "expected numeric matrix row");
            if (vals.size() != d)
                throw CarnotSpecParseError(lineno, "expected " + std::to_string(d) +
                                                       " entries in matrix row, got " +
                                                       std::to_string(vals.size()));
            auto& mat = B[static_cast<std::size_t>(pending_matrix)];
            mat.insert(mat.end(), vals.begin(), vals.end());
            if (++pending_rows == d) {
                pending_matrix = -1;
                pending_rows = 0;
            }
            continue;
        }

        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw CarnotSpecParseError(lineno, "expected 'key = value'");
        const std::string key = strip(s.substr(0, eq));
        const std::string val = strip(s.substr(eq + 1));

        if (key == "d" || key == "m") {
            std::size_t parsed = 0;
            try {
                if (!val.empty() && val[0] == '-') throw std::invalid_argument("negative");
                parsed = std::stoul(val);
            } catch (const std::exception&) {
                throw CarnotSpecParseError(lineno, "invalid integer for key '" + key + "'");
            }
            if (parsed == 0)
                throw CarnotSpecParseError(lineno, "'" + key + "' must be positive");
            (key == "d" ? d : m) = parsed;
        } else if (key.size() >= 2 && key[0] == 'B') {
            if (d == 0 || m == 0)
                throw CarnotSpecParseError(lineno, "d and m must be set before matrix blocks");
            std::size_t l = 0;
            try {
                l = std::stoul(key.substr(1));
            } catch (const std::exception&) {
                throw CarnotSpecParseError(lineno, "invalid matrix key '" + key + "'");
            }
            if (l < 1 || l > m)
                throw CarnotSpecParseError(lineno, "matrix index out of range 1.." +
                                                       std::to_string(m));
            if (!val.empty())
                throw CarnotSpecParseError(lineno, "matrix block must start on the next line");
            if (B.size() < m) B.resize(m);
            if (!B[l - 1].empty())
                throw CarnotSpecParseError(lineno, "duplicate matrix block B" + std::to_string(l));
            pending_matrix = static_cast<int>(l - 1);
            pending_rows = 0;
        } else {
            throw CarnotSpecParseError(lineno, "unknown key '" + key + "'");
        }
    }

    if (pending_matrix >= 0)
        throw CarnotSpecParseError(lineno, "unterminated matrix block");
    if (d == 0 || m == 0) throw CarnotSpecParseError(lineno, "missing d or m");
    if (B.size() != m)
        throw CarnotSpecParseError(lineno, "expected " + std::to_string(m) + " matrix blocks");
    for (std::size_t l = 0; l < m; ++l)
        if (B[l].size() != d * d)
            throw CarnotSpecParseError(lineno, "matrix B" + std::to_string(l + 1) +
                                                   " incomplete");
    try {
        return CarnotSpec::validated(d, m, std::move(B));
    } catch (const std::invalid_argument& e) {
        throw CarnotSpecParseError(lineno, e.what());
    }
}

inline CarnotSpec parse_carnot_spec_string(const std::string& text) {
    std::istringstream in(text);
    return parse_carnot_spec(in);
}

} // namespace carnotlab

#pragma once

#include <cmath>
#include <stdexcept>

namespace carnotlab {

// A point of the Heisenberg group H in exponential coordinates.
//
// H is identified with R^3 carrying the product
//   (x,y,z)*(x',y',z') = (x+x', y+y', z+z' + (x y' - y x')/2),
// inverse (-x,-y,-z) and neutral element e = (0,0,0). Only exponential
// coordinates are used here; the entries (a,b,c) of the upper-triangular
// matrix model relate to them by a = x, b = y, c = z + x y / 2.
struct GroupPoint {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    bool operator==(const GroupPoint&) const = default;
};

inline bool is_finite(const GroupPoint& g) {
    return std::isfinite(g.x) && std::isfinite(g.y) && std::isfinite(g.z);
}

namespace detail {
// Group product without the finiteness check, for sampler inner loops.
inline GroupPoint mul_unchecked(const GroupPoint& g, const GroupPoint& h) {
    return {g.x + h.x, g.y + h.y, g.z + h.z + 0.5 * (g.x * h.y - g.y * h.x)};
}
} // namespace detail

inline GroupPoint multiply(const GroupPoint& g, const GroupPoint& h) {
    if (!is_finite(g) || !is_finite(h))
        throw std::invalid_argument("multiply: non-finite group point");
    return detail::mul_unchecked(g, h);
}

inline GroupPoint inverse(const GroupPoint& g) {
    if (!is_finite(g)) throw std::invalid_argument("inverse: non-finite group point");
    return {-g.x, -g.y, -g.z};
}

// Anisotropic dilation (x,y,z) -> (l x, l y, l^2 z), a group automorphism.
inline GroupPoint dilate(double lambda, const GroupPoint& g) {
    if (!(lambda > 0.0)) throw std::domain_error("dilate: lambda must be > 0");
    if (!is_finite(g)) throw std::invalid_argument("dilate: non-finite group point");
    return {lambda * g.x, lambda * g.y, lambda * lambda * g.z};
}

// Squared homogeneous pseudo-norm N(g)^2 = x^2 + y^2 + |z|. Equivalent to
// the squared Carnot-Caratheodory distance d(e,g)^2 up to two-sided
// constants; those constants are carried by every consumer explicitly, the
// exact distance is never computed.
inline double pseudo_norm_sq(const GroupPoint& g) {
    if (!is_finite(g)) throw std::invalid_argument("pseudo_norm_sq: non-finite group point");
    return g.x * g.x + g.y * g.y + std::abs(g.z);
}

} // namespace carnotlab

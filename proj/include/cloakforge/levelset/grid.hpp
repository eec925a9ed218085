#pragma once

// Scalar fields on a regular lattice over the design domain. Values are
// stored row by row: index j * nx + i for the point origin + h (i, j).

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <vector>

#include "cloakforge/common.hpp"

namespace cloakforge::levelset {

struct Lattice {
    std::size_t nx = 0;
    std::size_t ny = 0;
    double h = 1.0;
    Vec2 origin = Vec2::Zero();

    std::size_t size() const { return nx * ny; }
    std::size_t index(std::size_t i, std::size_t j) const { return j * nx + i; }
    Vec2 point(std::size_t i, std::size_t j) const {
        return origin + h * Vec2(static_cast<double>(i), static_cast<double>(j));
    }
    Vec2 point(std::size_t k) const { return point(k % nx, k / nx); }
    Vec2 upper() const { return point(nx - 1, ny - 1); }

    bool contains(const Vec2& x) const {
        const Vec2 hi = upper();
        return x.x() >= origin.x() && x.y() >= origin.y() && x.x() <= hi.x() && x.y() <= hi.y();
    }

    bool operator==(const Lattice& o) const {
        return nx == o.nx && ny == o.ny && h == o.h && origin == o.origin;
    }

    void validate() const {
        if (nx < 2 || ny < 2) throw ConfigError("lattice: need at least 2 points per axis");
        if (!(h > 0.0)) throw ConfigError("lattice: spacing must be positive");
    }

    /// Lattice covering [lo, hi] with spacing close to `h` (exact end points).
    static Lattice covering(const Vec2& lo, const Vec2& hi, std::size_t nx, std::size_t ny) {
        Lattice l;
        l.nx = nx;
        l.ny = ny;
        l.origin = lo;
        l.h = (hi.x() - lo.x()) / static_cast<double>(nx - 1);
        if (std::abs((hi.y() - lo.y()) / static_cast<double>(ny - 1) - l.h) > 1e-12 * l.h)
            throw ConfigError("lattice: spacing differs between axes");
        return l;
    }
};

struct GridValues {
    Lattice lattice;
    std::vector<double> values;

    GridValues() = default;
    GridValues(const Lattice& l, double fill) : lattice(l), values(l.size(), fill) {}

    std::size_t nx() const { return lattice.nx; }
    std::size_t ny() const { return lattice.ny; }
    double h() const { return lattice.h; }
    double& operator()(std::size_t i, std::size_t j) { return values[lattice.index(i, j)]; }
    double operator()(std::size_t i, std::size_t j) const { return values[lattice.index(i, j)]; }

    /// Bilinear interpolation; x must lie in the lattice hull.
    double interpolate(const Vec2& x) const {
        const Vec2 s = (x - lattice.origin) / lattice.h;
        const double fx = std::clamp(s.x(), 0.0, static_cast<double>(lattice.nx - 1));
        const double fy = std::clamp(s.y(), 0.0, static_cast<double>(lattice.ny - 1));
        const std::size_t i = std::min(static_cast<std::size_t>(fx), lattice.nx - 2);
        const std::size_t j = std::min(static_cast<std::size_t>(fy), lattice.ny - 2);
        const double u = fx - static_cast<double>(i), v = fy - static_cast<double>(j);
        return (1 - u) * (1 - v) * (*this)(i, j) + u * (1 - v) * (*this)(i + 1, j) + u * v * (*this)(i + 1, j + 1) +
               (1 - u) * v * (*this)(i, j + 1);
    }
};

/// phi in [-1, 1]; phi < 0 is material (Omega_2), phi > 0 vacuum.
struct LevelSetGrid : GridValues {
    using GridValues::GridValues;
    void clip() {
        for (auto& v : values) v = std::clamp(v, -1.0, 1.0);
    }
};

/// Topological derivative samples on a level-set lattice.
struct TDField : GridValues {
    using GridValues::GridValues;
};

enum class Phase { omega1, gamma_d, omega2 };

/// Region of x from the sign of the interpolated level set; points outside
/// the lattice are vacuum.
inline Phase classify(const LevelSetGrid& grid, const Vec2& x) {
    if (!grid.lattice.contains(x)) return Phase::omega1;
    const double v = grid.interpolate(x);
    if (std::abs(v) < 1e-12) return Phase::gamma_d;
    return v < 0.0 ? Phase::omega2 : Phase::omega1;
}

/// Header `nx ny h ox oy`, then one lattice row per line.
inline void write_grid(std::ostream& os, const GridValues& g) {
    const auto& l = g.lattice;
    os << std::setprecision(17) << l.nx << ' ' << l.ny << ' ' << l.h << ' ' << l.origin.x() << ' ' << l.origin.y()
       << '\n';
    for (std::size_t j = 0; j < l.ny; ++j) {
        for (std::size_t i = 0; i < l.nx; ++i) os << (i ? " " : "") << g(i, j);
        os << '\n';
    }
}

template <class Grid = LevelSetGrid>
Grid read_grid(std::istream& is) {
    Lattice l;
    if (!(is >> l.nx >> l.ny >> l.h >> l.origin.x() >> l.origin.y())) throw Error("grid: bad header");
    l.validate();
    Grid g(l, 0.0);
    for (auto& v : g.values)
        if (!(is >> v)) throw Error("grid: truncated values");
    return g;
}

}  // namespace cloakforge::levelset

#pragma once

// Reaction-diffusion update of the level set
//   d phi / dt = C sgn(phi) T + tau l^2 lap(phi)
// with implicit diffusion, explicit reaction and zero-flux walls, and the
// initial configuration from a topological-derivative field.

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "cloakforge/levelset/grid.hpp"

namespace cloakforge::levelset {

struct RDParams {
    double C = 1.0;    // reaction scale
    double tau = 0.0;  // regularization
    double l = 1.0;    // characteristic length
    double dt = 0.1;
    std::size_t steps = 1;
};

namespace detail {

// Lumped mass M and finite-volume stiffness K of the lattice; boundary
// cells are halved (quartered at corners) and so are the faces along the
// walls, which gives zero normal flux.
struct LatticeOperators {
    Eigen::VectorXd mass;
    Eigen::SparseMatrix<double> stiffness;

    explicit LatticeOperators(const Lattice& l) {
        const Index n = static_cast<Index>(l.size());
        mass.resize(n);
        std::vector<Eigen::Triplet<double>> trip;
        auto frac = [](std::size_t k, std::size_t m) { return (k == 0 || k + 1 == m) ? 0.5 : 1.0; };
        for (std::size_t j = 0; j < l.ny; ++j)
            for (std::size_t i = 0; i < l.nx; ++i) {
                const auto p = static_cast<Index>(l.index(i, j));
                mass[p] = l.h * l.h * frac(i, l.nx) * frac(j, l.ny);
                auto link = [&](std::size_t i2, std::size_t j2, double w) {
                    const auto q = static_cast<Index>(l.index(i2, j2));
                    trip.emplace_back(p, p, w);
                    trip.emplace_back(p, q, -w);
                };
                // Face weight = face length / h; faces along a wall are half length.
                if (i + 1 < l.nx) link(i + 1, j, frac(j, l.ny));
                if (i > 0) link(i - 1, j, frac(j, l.ny));
                if (j + 1 < l.ny) link(i, j + 1, frac(i, l.nx));
                if (j > 0) link(i, j - 1, frac(i, l.nx));
            }
        stiffness.resize(n, n);
        stiffness.setFromTriplets(trip.begin(), trip.end());
    }
};

inline void diffuse(LevelSetGrid& g, const Eigen::VectorXd& rhs_increment, double coeff) {
    const Lattice& l = g.lattice;
    const LatticeOperators ops(l);
    const Index n = static_cast<Index>(l.size());
    Eigen::Map<Eigen::VectorXd> phi(g.values.data(), n);
    Eigen::VectorXd rhs = ops.mass.cwiseProduct(phi + rhs_increment);
    if (coeff == 0.0) {
        phi = rhs.cwiseQuotient(ops.mass);
        return;
    }
    Eigen::SparseMatrix<double> A = coeff * ops.stiffness;
    for (Index k = 0; k < n; ++k) A.coeffRef(k, k) += ops.mass[k];
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
    if (solver.info() != Eigen::Success) throw SolverError("rd_update: diffusion matrix factorization failed");
    phi = solver.solve(rhs);
}

}  // namespace detail

/// `steps` implicit-Euler steps; phi is clipped to [-1, 1] after each one.
/// sgn(0) is taken as +1.
inline LevelSetGrid rd_update(LevelSetGrid grid, const TDField& td, const RDParams& p) {
    if (!(p.dt > 0.0)) throw Error("rd_update: dt must be positive");
    if (p.tau < 0.0) throw Error("rd_update: tau must be non-negative");
    if (!(td.lattice == grid.lattice)) throw Error("rd_update: lattice mismatch");
    const Index n = static_cast<Index>(grid.values.size());
    for (std::size_t s = 0; s < p.steps; ++s) {
        Eigen::VectorXd react(n);
        for (Index k = 0; k < n; ++k) {
            const double sgn = grid.values[static_cast<std::size_t>(k)] < 0.0 ? -1.0 : 1.0;
            react[k] = p.dt * p.C * sgn * td.values[static_cast<std::size_t>(k)];
        }
        detail::diffuse(grid, react, p.dt * p.tau * p.l * p.l);
        grid.clip();
    }
    return grid;
}

/// Material (phi = -1) where T <= 0 inside the disc, vacuum (+1) elsewhere,
/// followed by one implicit diffusion pass of strength `smoothing` (units of
/// length squared; 0 disables it).
inline LevelSetGrid init_from_td(const TDField& td, const Vec2& center, double radius, double smoothing) {
    LevelSetGrid g(td.lattice, 1.0);
    for (std::size_t k = 0; k < g.values.size(); ++k)
        if (td.values[k] <= 0.0 && (td.lattice.point(k) - center).norm() <= radius) g.values[k] = -1.0;
    if (smoothing > 0.0) {
        detail::diffuse(g, Eigen::VectorXd::Zero(static_cast<Index>(g.values.size())), smoothing);
        g.clip();
    }
    return g;
}

/// Lattice points forced to vacuum (e.g. the PEC and its surroundings).
struct KeepOut {
    std::vector<char> mask;

    bool empty() const { return std::find(mask.begin(), mask.end(), 1) == mask.end(); }

    void add_disc(const Lattice& l, const Vec2& center, double radius) {
        if (mask.size() != l.size()) mask.assign(l.size(), 0);
        for (std::size_t k = 0; k < l.size(); ++k)
            if ((l.point(k) - center).norm() <= radius) mask[k] = 1;
    }

    void apply(LevelSetGrid& g) const {
        for (std::size_t k = 0; k < mask.size(); ++k)
            if (mask[k]) g.values[k] = 1.0;
    }
    void apply(TDField& t) const {
        for (std::size_t k = 0; k < mask.size(); ++k)
            if (mask[k]) t.values[k] = 0.0;
    }
};

}  // namespace cloakforge::levelset

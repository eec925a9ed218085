#pragma once

// Topological derivative for inserting a small dielectric disc,
//   T(x) = Re[omega^2 (eps2 - eps1) u(x) u~(x)],
// from the forward field u and the adjoint field u~. Inside the material
// the same perturbation removes dielectric, so the sign flips there.

#include "cloakforge/bem2d/field.hpp"
#include "cloakforge/levelset/grid.hpp"

namespace cloakforge::sens {

using bem2d::Region;

inline double td_value(const Complex& u, const Complex& ua, double eps1, double eps2, double omega) {
    return (omega * omega * (eps2 - eps1) * u * ua).real();
}

/// Pointwise formula; `regions` selects the sign (removal inside Omega_2).
inline std::vector<double> topological_derivative(const CVector& u, const CVector& ua,
                                                  const std::vector<Region>& regions, const bem2d::Media& media) {
    if (u.size() != ua.size() || u.size() != static_cast<Index>(regions.size()))
        throw Error("topological_derivative: mismatched samples");
    std::vector<double> t(regions.size());
    for (std::size_t p = 0; p < regions.size(); ++p) {
        const double f = td_value(u[static_cast<Index>(p)], ua[static_cast<Index>(p)], media.outer.eps,
                                  media.inner.eps, media.omega());
        t[p] = regions[p] == Region::inner ? -f : f;
    }
    return t;
}

/// TD on a lattice from forward/adjoint samples taken on that same lattice.
inline levelset::TDField topological_derivative_field(const levelset::Lattice& forward_lattice,
                                                      const levelset::Lattice& adjoint_lattice, const CVector& u,
                                                      const CVector& ua, const std::vector<Region>& regions,
                                                      const bem2d::Media& media) {
    if (!(forward_lattice == adjoint_lattice)) throw Error("topological_derivative_field: lattice mismatch");
    if (u.size() != static_cast<Index>(forward_lattice.size()))
        throw Error("topological_derivative_field: sample count does not match the lattice");
    levelset::TDField td(forward_lattice, 0.0);
    td.values = topological_derivative(u, ua, regions, media);
    return td;
}

enum class PointClass { outer, inner, pec, near };

/// Position of points relative to a closed mesh: inside a PEC loop, inside a
/// dielectric loop, in vacuum, or within half an element length of the
/// boundary. Inside/outside use ray-crossing parity per interface.
inline std::vector<PointClass> classify_points(const bem2d::BoundaryMesh& mesh, const std::vector<Vec2>& pts) {
    std::vector<PointClass> out(pts.size(), PointClass::outer);
    for (std::size_t p = 0; p < pts.size(); ++p) {
        const Vec2& x = pts[p];
        bool in_d = false, in_p = false, near = false;
        for (std::size_t e = 0; e < mesh.size(); ++e) {
            const Vec2& a = mesh.a(e);
            const Vec2& b = mesh.b(e);
            if (bem2d::point_segment_distance(x, a, b) < 0.5 * mesh.length(e)) near = true;
            if ((a.y() > x.y()) != (b.y() > x.y())) {
                const double xc = a.x() + (x.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
                if (xc > x.x()) (mesh.tag(e) == bem2d::Interface::pec ? in_p : in_d) ^= true;
            }
        }
        if (in_p)
            out[p] = PointClass::pec;
        else if (near)
            out[p] = PointClass::near;
        else
            out[p] = in_d ? PointClass::inner : PointClass::outer;
    }
    return out;
}

}  // namespace cloakforge::sens

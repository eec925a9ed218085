#pragma once

// Partial-wave series for plane-wave scattering by a circular cylinder
// centred at the origin (reference solution for the boundary solver).

#include <cmath>
#include <vector>

#include "cloakforge/bem2d/green.hpp"
#include "cloakforge/bem2d/media.hpp"

namespace cloakforge::bem2d {

enum class CylinderKind { pec, dielectric };

struct MieCoefficients {
    std::vector<Complex> a;  // scattered, outside
    std::vector<Complex> c;  // transmitted, inside (dielectric only)
};

namespace detail {

inline double jn_prime(int n, double z) { return 0.5 * (bessel_j(n - 1, z) - bessel_j(n + 1, z)); }
inline Complex hn_prime(int n, double z) { return 0.5 * (hankel(n - 1, z) - hankel(n + 1, z)); }

inline void mie_coefficient(CylinderKind kind, int n, double radius, const Media& media, Complex& a, Complex& c) {
    const double k1 = media.k1(), k2 = media.k2();
    const double x1 = k1 * radius, x2 = k2 * radius;
    const double J = bessel_j(n, x1);
    const Complex H = hankel(n, x1);
    if (kind == CylinderKind::pec) {
        a = -J / H;
        c = 0.0;
        return;
    }
    const double Jp = jn_prime(n, x1);
    const Complex Hp = hn_prime(n, x1);
    const double J2 = bessel_j(n, x2), J2p = jn_prime(n, x2);
    const double p1 = k1 / media.outer.mu, p2 = k2 / media.inner.mu;
    a = (p2 * J * J2p - p1 * Jp * J2) / (p1 * Hp * J2 - p2 * H * J2p);
    if (std::abs(J2) >= std::abs(J2p))
        c = (J + a * H) / J2;
    else
        c = p1 * (Jp + a * Hp) / (p2 * J2p);
}

}  // namespace detail

/// Total field at the probes for incidence exp(i k1 d.x), d = (cos alpha,
/// sin alpha). Terms are added until the largest contribution over all
/// probes stays below 1e-12 (relative to the unit incident amplitude) for
/// three consecutive orders beyond k r_max; exceeding `max_terms` raises.
inline CVector mie_reference(CylinderKind kind, double radius, const Media& media, const std::vector<Vec2>& probes,
                             int max_terms = 400, double alpha = 0.0) {
    if (!(radius > 0.0)) throw Error("mie_reference: radius must be positive");
    media.validate();
    const double k1 = media.k1(), k2 = media.k2();
    CVector out = CVector::Zero(static_cast<Index>(probes.size()));
    double rmax = radius;
    for (const auto& p : probes) rmax = std::max(rmax, p.norm());
    const double kr = std::max(k1, kind == CylinderKind::dielectric ? k2 : 0.0) * rmax;

    int quiet = 0;
    for (int n = 0; n <= max_terms; ++n) {
        Complex a, c;
        detail::mie_coefficient(kind, n, radius, media, a, c);
        const Complex in = std::pow(I, n);
        double biggest = 0.0;
        for (std::size_t q = 0; q < probes.size(); ++q) {
            const double r = probes[q].norm();
            const double th = std::atan2(probes[q].y(), probes[q].x()) - alpha;
            const double ang = n == 0 ? 1.0 : 2.0 * std::cos(n * th);
            Complex term;
            if (r >= radius) {
                term = in * (bessel_j(n, k1 * r) + (r > 0.0 ? a * hankel(n, k1 * r) : Complex(0.0))) * ang;
            } else if (kind == CylinderKind::dielectric) {
                term = in * c * bessel_j(n, k2 * r) * ang;
            } else {
                term = 0.0;
            }
            out[static_cast<Index>(q)] += term;
            biggest = std::max(biggest, std::abs(term));
        }
        if (n > kr && biggest < 1e-12) {
            if (++quiet >= 3) return out;
        } else {
            quiet = 0;
        }
    }
    throw Error("mie_reference: series did not converge within max_terms");
}

}  // namespace cloakforge::bem2d

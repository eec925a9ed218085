#pragma once

// Hankel functions and the 2D Helmholtz fundamental solution
// G(x, y) = (i/4) H0(k |x - y|), time dependence exp(-i omega t).

#include <boost/math/special_functions/bessel.hpp>

#include "cloakforge/common.hpp"

namespace cloakforge::bem2d {

namespace detail {
using bessel_policy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;
}

/// H0^(1)(z) and H1^(1)(z) for z > 0.
struct Hankel01 {
    Complex h0;
    Complex h1;
};

inline Hankel01 hankel01(double z) {
    const detail::bessel_policy pol;
    return {Complex(boost::math::cyl_bessel_j(0, z, pol), boost::math::cyl_neumann(0, z, pol)),
            Complex(boost::math::cyl_bessel_j(1, z, pol), boost::math::cyl_neumann(1, z, pol))};
}

/// H_n^(1)(z), integer order, z > 0.
inline Complex hankel(int n, double z) {
    const detail::bessel_policy pol;
    return {boost::math::cyl_bessel_j(n, z, pol), boost::math::cyl_neumann(n, z, pol)};
}

inline double bessel_j(int n, double z) { return boost::math::cyl_bessel_j(n, z, detail::bessel_policy{}); }

inline Complex green(double k, double r) {
    if (!(r > 0.0)) throw Error("singular evaluation");
    const double z = k * r;
    const detail::bessel_policy pol;
    return 0.25 * I * Complex(boost::math::cyl_bessel_j(0, z, pol), boost::math::cyl_neumann(0, z, pol));
}

inline Complex green(double k, const Vec2& x, const Vec2& y) { return green(k, (x - y).norm()); }

/// Kernel values needed by the collocation and field operators at one pair
/// (x, y) with source normal ny.
struct KernelSample {
    Complex g;      // G
    Complex dny;    // dG/dn_y
    CVec2 gradx;    // grad_x G
};

inline KernelSample kernel_sample(double k, const Vec2& x, const Vec2& y, const Vec2& ny) {
    const Vec2 d = x - y;
    const double r = d.norm();
    if (!(r > 0.0)) throw Error("singular evaluation");
    const Hankel01 h = hankel01(k * r);
    const Complex c = 0.25 * I * k * h.h1 / r;
    KernelSample s;
    s.g = 0.25 * I * h.h0;
    s.dny = c * d.dot(ny);
    s.gradx = -c * d.cast<Complex>();
    return s;
}

/// grad_x G
inline CVec2 green_grad(double k, const Vec2& x, const Vec2& y) {
    const Vec2 d = x - y;
    const double r = d.norm();
    if (!(r > 0.0)) throw Error("singular evaluation");
    const Hankel01 h = hankel01(k * r);
    return (-0.25 * I * k * h.h1 / r) * d.cast<Complex>();
}

/// dG/dn_y
inline Complex green_dn(double k, const Vec2& x, const Vec2& y, const Vec2& ny) {
    return kernel_sample(k, x, y, ny).dny;
}

/// grad_x dG/dn_y
inline CVec2 green_grad_dn(double k, const Vec2& x, const Vec2& y, const Vec2& ny) {
    const Vec2 d = x - y;
    const double r = d.norm();
    if (!(r > 0.0)) throw Error("singular evaluation");
    const Hankel01 h = hankel01(k * r);
    const Vec2 rh = d / r;
    const double rn = rh.dot(ny);
    const Complex a = 0.25 * I * k;
    return a * (k * h.h0 * rn * rh.cast<Complex>() + (h.h1 / r) * (ny - 2.0 * rn * rh).cast<Complex>());
}

}  // namespace cloakforge::bem2d

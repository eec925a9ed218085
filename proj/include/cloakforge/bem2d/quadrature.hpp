#pragma once

// Element integrals of the Helmholtz kernels over straight segments with
// constant densities.

#include <array>

#include <boost/math/quadrature/gauss.hpp>

#include "cloakforge/bem2d/green.hpp"

namespace cloakforge::bem2d {

/// Gauss-Legendre rule on [0, 1].
template <unsigned N>
struct UnitGauss {
    std::array<double, N> t{};
    std::array<double, N> w{};

    UnitGauss() {
        using G = boost::math::quadrature::gauss<double, N>;
        const auto& x = G::abscissa();
        const auto& wt = G::weights();
        std::size_t k = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] == 0.0) {
                t[k] = 0.5;
                w[k++] = 0.5 * wt[i];
                continue;
            }
            t[k] = 0.5 * (1.0 - x[i]);
            w[k++] = 0.5 * wt[i];
            t[k] = 0.5 * (1.0 + x[i]);
            w[k++] = 0.5 * wt[i];
        }
    }

    static const UnitGauss& get() {
        static const UnitGauss g;
        return g;
    }
};

/// Integrals over one element [a, b] with a constant density, seen from a
/// target point x.
struct ElementIntegrals {
    Complex s0{};              // int G
    Complex dc{};              // int dG/dn_y
    CVec2 gx = CVec2::Zero();  // int grad_x G
    CVec2 grad_a = CVec2::Zero();  // grad_x G(x, a)
    CVec2 grad_b = CVec2::Zero();  // grad_x G(x, b)
    CVec2 hc = CVec2::Zero();  // int grad_x dG/dn_y   (only with gradients)
    bool near_singular = false;
};

struct QuadratureOptions {
    bool gradients = false;  // fill hc
    bool endpoints = true;   // fill grad_a, grad_b
    int max_depth = 24;
};

inline double point_segment_distance(const Vec2& x, const Vec2& a, const Vec2& b) {
    const Vec2 d = b - a;
    const double t = std::clamp((x - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
    return (x - (a + t * d)).norm();
}

namespace detail {

template <unsigned N>
void accumulate_panel(double k, const Vec2& x, const Vec2& a, const Vec2& b, const Vec2& ny, double len,
                      double t0, double t1, bool grads, ElementIntegrals& out) {
    const auto& q = UnitGauss<N>::get();
    const double h = t1 - t0;
    const Vec2 d = b - a;
    for (unsigned i = 0; i < N; ++i) {
        const double t = t0 + h * q.t[i];
        const double w = q.w[i] * h * len;
        const Vec2 y = a + t * d;
        const Vec2 rv = x - y;
        const double r = rv.norm();
        if (!(r > 0.0)) throw Error("singular evaluation");
        const Hankel01 hk = hankel01(k * r);
        const Complex g = 0.25 * I * hk.h0;
        const Complex c = 0.25 * I * k * hk.h1 / r;
        out.s0 += w * g;
        out.dc += (w * c) * rv.dot(ny);
        out.gx -= (w * c) * rv.cast<Complex>();
        if (grads) {
            const Vec2 rh = rv / r;
            const double rn = rh.dot(ny);
            out.hc += (w * 0.25 * I * k) * (k * hk.h0 * rn * rh.cast<Complex>() +
                                             (hk.h1 / r) * (ny - 2.0 * rn * rh).cast<Complex>());
        }
    }
}

inline void graded(double k, const Vec2& x, const Vec2& a, const Vec2& b, const Vec2& ny, double len, double t0,
                   double t1, int depth, const QuadratureOptions& opt, ElementIntegrals& out) {
    const Vec2 pa = a + t0 * (b - a);
    const Vec2 pb = a + t1 * (b - a);
    const double lp = (t1 - t0) * len;
    const double dist = point_segment_distance(x, pa, pb);
    // Far panels: the Gauss error decays like (4 dist / lp)^(-2n).
    if (dist >= 16.0 * lp) {
        accumulate_panel<2>(k, x, a, b, ny, len, t0, t1, opt.gradients, out);
    } else if (dist >= 8.0 * lp) {
        accumulate_panel<3>(k, x, a, b, ny, len, t0, t1, opt.gradients, out);
    } else if (dist >= 4.0 * lp) {
        accumulate_panel<4>(k, x, a, b, ny, len, t0, t1, opt.gradients, out);
    } else if (dist >= 2.0 * lp) {
        accumulate_panel<8>(k, x, a, b, ny, len, t0, t1, opt.gradients, out);
    } else if (dist >= lp || depth >= opt.max_depth) {
        if (dist < lp) out.near_singular = true;
        accumulate_panel<16>(k, x, a, b, ny, len, t0, t1, opt.gradients, out);
    } else {
        const double tm = 0.5 * (t0 + t1);
        graded(k, x, a, b, ny, len, t0, tm, depth + 1, opt, out);
        graded(k, x, a, b, ny, len, tm, t1, depth + 1, opt, out);
    }
}

// int_0^h J0(k r) ln r dr by the power series of J0.
inline double j0_log_moment(double k, double h) {
    const double lh = std::log(h);
    double c = 1.0;  // (-1)^m (k/2)^{2m} / (m!)^2
    double hp = h;   // h^{2m+1}
    double sum = 0.0;
    for (int m = 0; m < 60; ++m) {
        const double p1 = 2.0 * m + 1.0;
        const double term = c * hp * (lh / p1 - 1.0 / (p1 * p1));
        sum += term;
        if (std::abs(term) <= 1e-18 * std::abs(sum) && m > 2) break;
        c *= -(k * k / 4.0) / ((m + 1.0) * (m + 1.0));
        hp *= h * h;
    }
    return sum;
}

}  // namespace detail

/// Integrals of element [a, b] seen from a point x off the element.
inline ElementIntegrals element_integrals(double k, const Vec2& a, const Vec2& b, const Vec2& x,
                                          const QuadratureOptions& opt = {}) {
    const double len = (b - a).norm();
    const Vec2 t = (b - a) / len;
    const Vec2 ny(t.y(), -t.x());
    ElementIntegrals out;
    detail::graded(k, x, a, b, ny, len, 0.0, 1.0, 0, opt, out);
    if (opt.endpoints) {
        out.grad_a = green_grad(k, x, a);
        out.grad_b = green_grad(k, x, b);
    }
    return out;
}

/// Single-layer integral of G over the half-length h on one side of the
/// collocation point: -(1/2pi) J0(kr) ln r analytically, smooth remainder by
/// 16-point Gauss.
inline Complex self_half_single_layer(double k, double h) {
    const auto& q = UnitGauss<16>::get();
    Complex rem = 0.0;
    for (unsigned i = 0; i < 16; ++i) {
        const double r = h * q.t[i];
        rem += q.w[i] * h * (green(k, r) + std::log(r) * bessel_j(0, k * r) / (2.0 * pi));
    }
    return rem - detail::j0_log_moment(k, h) / (2.0 * pi);
}

/// Integrals of an element seen from its own midpoint. The double-layer and
/// gradient terms vanish on a straight element (the latter as a principal
/// value).
inline ElementIntegrals self_integrals(double k, const Vec2& a, const Vec2& b) {
    const double len = (b - a).norm();
    const Vec2 x = 0.5 * (a + b);
    ElementIntegrals out;
    out.s0 = 2.0 * self_half_single_layer(k, 0.5 * len);
    out.grad_a = green_grad(k, x, a);
    out.grad_b = green_grad(k, x, b);
    return out;
}

}  // namespace cloakforge::bem2d

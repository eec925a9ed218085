#pragma once

#include <cmath>
#include <string>

#include "cloakforge/common.hpp"

namespace cloakforge::bem2d {

/// Homogeneous isotropic medium with relative permittivity and permeability.
struct Medium {
    double eps = 1.0;
    double mu = 1.0;
    double omega = 0.2;

    double k() const { return omega * std::sqrt(mu * eps); }
};

/// Vacuum region (outer, index 1) and the dielectric material (inner, index 2).
struct Media {
    Medium outer;
    Medium inner;

    Media() = default;
    Media(double omega, double eps2, double mu2 = 1.0, double eps1 = 1.0, double mu1 = 1.0)
        : outer{eps1, mu1, omega}, inner{eps2, mu2, omega} {}

    double k1() const { return outer.k(); }
    double k2() const { return inner.k(); }
    double omega() const { return outer.omega; }

    void validate() const {
        for (const Medium* m : {&outer, &inner})
            if (!(m->eps > 0.0) || !(m->mu > 0.0) || !(m->omega > 0.0))
                throw ConfigError("media: eps, mu and omega must be positive");
        if (outer.omega != inner.omega) throw ConfigError("media: both regions must share omega");
    }
};

}  // namespace cloakforge::bem2d

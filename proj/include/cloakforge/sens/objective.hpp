#pragma once

// Cloaking objectives and the adjoint point sources they induce.
//   conventional: J = sum_m |u(x_m) - u_inc(x_m)|^2 over the outer points
//   modified:     J + sum_n |u(x_n)|^2 over the inner points

#include <vector>

#include "cloakforge/common.hpp"

namespace cloakforge::sens {

enum class Variant { conventional, modified };

inline const char* to_string(Variant v) { return v == Variant::conventional ? "conventional" : "modified"; }

struct ObjectiveSpec {
    Variant variant = Variant::conventional;
    std::vector<Vec2> outer;  // x_m^1
    std::vector<Vec2> inner;  // x_n^2, modified variant only

    void validate() const {
        if (outer.empty()) throw ConfigError("objective: no outer observation points");
        if (variant == Variant::modified && inner.empty())
            throw ConfigError("objective: modified variant needs inner observation points");
    }

    /// Outer points followed by the inner ones (if used).
    std::vector<Vec2> points() const {
        std::vector<Vec2> p = outer;
        if (variant == Variant::modified) p.insert(p.end(), inner.begin(), inner.end());
        return p;
    }
};

struct ObjectiveTerms {
    double outer = 0.0;
    double inner = 0.0;
    double total() const { return outer + inner; }
};

inline ObjectiveTerms objective_terms(const ObjectiveSpec& spec, const CVector& u_outer, const CVector& uinc_outer,
                                      const CVector& u_inner = {}) {
    if (u_outer.size() != static_cast<Index>(spec.outer.size()) || uinc_outer.size() != u_outer.size())
        throw Error("objective: outer field count mismatch");
    ObjectiveTerms t;
    t.outer = (u_outer - uinc_outer).squaredNorm();
    if (spec.variant == Variant::modified) {
        if (u_inner.size() != static_cast<Index>(spec.inner.size())) throw Error("objective: inner field count mismatch");
        t.inner = u_inner.squaredNorm();
    }
    return t;
}

inline double objective_value(const ObjectiveSpec& spec, const CVector& u_outer, const CVector& uinc_outer,
                              const CVector& u_inner = {}) {
    return objective_terms(spec, u_outer, uinc_outer, u_inner).total();
}

struct AdjointSource {
    std::vector<Vec2> points;
    CVector weights;
};

/// Weights w with dJ = Re[sum w du]: 2 conj(u - u_inc) at outer points and
/// 2 conj(u) at inner points.
inline AdjointSource adjoint_source_weights(const ObjectiveSpec& spec, const CVector& u_outer,
                                            const CVector& uinc_outer, const CVector& u_inner = {}) {
    if (u_outer.size() != static_cast<Index>(spec.outer.size()) || uinc_outer.size() != u_outer.size())
        throw Error("adjoint source: outer field count mismatch");
    AdjointSource s;
    s.points = spec.points();
    s.weights.resize(static_cast<Index>(s.points.size()));
    const Index m = u_outer.size();
    s.weights.head(m) = 2.0 * (u_outer - uinc_outer).conjugate();
    if (spec.variant == Variant::modified) {
        if (u_inner.size() != static_cast<Index>(spec.inner.size()))
            throw Error("adjoint source: inner field count mismatch");
        s.weights.tail(u_inner.size()) = 2.0 * u_inner.conjugate();
    }
    return s;
}

}  // namespace cloakforge::sens

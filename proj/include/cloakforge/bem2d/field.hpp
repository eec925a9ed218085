#pragma once

// Incident fields and evaluation of the integral representations
//   region 1: u = u_inc + mu1 S1 (w_p + w_d) - D1 u_d
//   region 2: u = D2 u_d - mu2 S2 w_d
// at points away from the boundary.

#include <utility>

#include "cloakforge/bem2d/system.hpp"

namespace cloakforge::bem2d {

enum class Region { outer, inner };  // Omega_1 (vacuum), Omega_2 (dielectric)

struct FieldValue {
    Complex u;
    CVec2 grad;
};

/// Plane wave exp(i k1 d.x).
inline FieldValue incident_plane(const Vec2& x, const Vec2& direction, double k1) {
    if (std::abs(direction.norm() - 1.0) > 1e-12) throw Error("incident_plane: direction must be a unit vector");
    const Complex u = std::exp(I * k1 * direction.dot(x));
    return {u, (I * k1 * u) * direction.cast<Complex>()};
}

/// Entries of the representation formulas: row p is an evaluation point,
/// column g a boundary unknown.
class PotentialKernel {
public:
    PotentialKernel(const BoundarySystem& sys, const std::vector<Vec2>& points, const std::vector<Region>& regions)
        : sys_(&sys), points_(&points), regions_(&regions) {}

    void fill(std::span<const std::size_t> rows, std::span<const std::size_t> cols, CMatrix& out) const {
        const auto& mesh = sys_->mesh();
        const auto& dofs = sys_->dofs();
        const auto& media = sys_->media();
        const double mu1 = media.outer.mu, mu2 = media.inner.mu;
        std::vector<std::size_t> elems;
        for (auto c : cols) elems.push_back(dofs.element_of(c));
        std::sort(elems.begin(), elems.end());
        elems.erase(std::unique(elems.begin(), elems.end()), elems.end());
        std::vector<ElementIntegrals> rec(elems.size());
        QuadratureOptions far_only;
        far_only.endpoints = false;
        for (std::size_t ra = 0; ra < rows.size(); ++ra) {
            const std::size_t p = rows[ra];
            const Vec2& x = (*points_)[p];
            const bool outer = (*regions_)[p] == Region::outer;
            const double k = outer ? media.k1() : media.k2();
            for (std::size_t q = 0; q < elems.size(); ++q) {
                const std::size_t e = elems[q];
                const bool pec = mesh.tag(e) == Interface::pec;
                if (!outer && pec) continue;  // PEC densities do not radiate into Omega_2
                if (!(point_segment_distance(x, mesh.a(e), mesh.b(e)) > 0.0))
                    throw Error("eval_field: point on the boundary");
                rec[q] = element_integrals(k, mesh.a(e), mesh.b(e), x, far_only);
            }
            for (std::size_t cb = 0; cb < cols.size(); ++cb) {
                const auto [kind, i] = dofs.split(cols[cb]);
                const std::size_t q = static_cast<std::size_t>(
                    std::lower_bound(elems.begin(), elems.end(), dofs.element_of(cols[cb])) - elems.begin());
                const ElementIntegrals& r = rec[q];
                Complex v;
                switch (kind) {
                    case DofMap::Kind::w_p:
                        v = outer ? mu1 * r.s0 : Complex(0.0);
                        break;
                    case DofMap::Kind::u_d:
                        v = outer ? -r.dc : r.dc;
                        break;
                    case DofMap::Kind::w_d:
                        v = outer ? mu1 * r.s0 : -mu2 * r.s0;
                        break;
                }
                (void)i;
                out(static_cast<Index>(ra), static_cast<Index>(cb)) = v;
            }
        }
    }

private:
    const BoundarySystem* sys_;
    const std::vector<Vec2>* points_;
    const std::vector<Region>* regions_;
};

/// Linear map from stacked boundary densities to field values (and,
/// optionally, gradients) at fixed points. Built once per geometry and
/// reused for the forward and adjoint densities. The hmatrix backend
/// compresses the value map with ACA (gradients need the dense backend).
class FieldOperator {
public:
    FieldOperator() = default;

    FieldOperator(const BoundarySystem& sys, std::vector<Vec2> points, std::vector<Region> regions,
                  bool gradients = false, unsigned workers = 1, Backend backend = Backend::dense,
                  const HMatrixOptions& hopt = {})
        : points_(std::move(points)), regions_(std::move(regions)), gradients_(gradients) {
        if (points_.size() != regions_.size()) throw Error("eval_field: points/regions size mismatch");
        if (gradients_ && backend != Backend::dense) throw Error("eval_field: gradients need the dense backend");
        const auto& mesh = sys.mesh();
        near_.assign(points_.size(), 0);
        for (std::size_t p = 0; p < points_.size(); ++p)
            for (std::size_t e = 0; e < mesh.size(); ++e)
                if (point_segment_distance(points_[p], mesh.a(e), mesh.b(e)) < 0.5 * mesh.length(e)) {
                    near_[p] = 1;
                    break;
                }
        if (points_.empty()) {
            V_ = CMatrix::Zero(0, static_cast<Index>(sys.size()));
            return;
        }
        if (backend == Backend::hmatrix) {
            const PotentialKernel kernel(sys, points_, regions_);
            auto rt = std::make_shared<const hmat::ClusterTree>(hmat::PointCloud::from_points(points_), hopt.n_min);
            auto ct = std::make_shared<const hmat::ClusterTree>(sys.dofs().point_cloud(mesh), hopt.n_min);
            hmat_ = hmat::assemble_hmatrix(kernel, rt, ct, hopt.eta, hopt.tol, workers);
            return;
        }
        build_dense(sys, workers);
    }

    std::size_t size() const { return points_.size(); }
    const std::vector<Vec2>& points() const { return points_; }
    const std::vector<Region>& regions() const { return regions_; }
    bool has_gradients() const { return gradients_; }

    /// Per-point flag: the point lies within 0.5 element lengths of the
    /// boundary (near-singular evaluation).
    const std::vector<char>& near_flags() const { return near_; }

    /// Scattered part (region 1) or full field (region 2), one column per
    /// density column.
    CMatrix values(const CMatrix& density) const {
        if (hmat_) return hmat_->multiply(density);
        return V_ * density;
    }
    CVector values(const CVector& density) const {
        if (hmat_) return hmat_->multiply(density);
        return V_ * density;
    }
    std::pair<CVector, CVector> gradients(const CVector& density) const {
        if (!gradients_) throw Error("eval_field: operator built without gradients");
        return {Gx_ * density, Gy_ * density};
    }

private:
    void build_dense(const BoundarySystem& sys, unsigned workers) {
        const auto& mesh = sys.mesh();
        const auto& dofs = sys.dofs();
        const auto& media = sys.media();
        const Index np = static_cast<Index>(points_.size());
        const Index n = static_cast<Index>(dofs.size());
        V_ = CMatrix::Zero(np, n);
        if (gradients_) {
            Gx_ = CMatrix::Zero(np, n);
            Gy_ = CMatrix::Zero(np, n);
        }
        QuadratureOptions qo;
        qo.gradients = gradients_;
        qo.endpoints = false;
        const double mu1 = media.outer.mu, mu2 = media.inner.mu;

        detail::parallel_for(points_.size(), workers, [&](std::size_t p) {
            const Vec2& x = points_[p];
            const bool outer = regions_[p] == Region::outer;
            const double k = outer ? media.k1() : media.k2();
            const Index row = static_cast<Index>(p);
            auto put = [&](Index col, const Complex& v, const CVec2& g) {
                V_(row, col) += v;
                if (gradients_) {
                    Gx_(row, col) += g.x();
                    Gy_(row, col) += g.y();
                }
            };
            auto integrals = [&](std::size_t e) {
                if (!(point_segment_distance(x, mesh.a(e), mesh.b(e)) > 0.0))
                    throw Error("eval_field: point on the boundary");
                return element_integrals(k, mesh.a(e), mesh.b(e), x, qo);
            };
            if (outer) {
                for (std::size_t j = 0; j < dofs.n_pec(); ++j) {
                    const auto r = integrals(dofs.pec_element(j));
                    put(static_cast<Index>(dofs.wp(j)), mu1 * r.s0, mu1 * r.gx);
                }
            }
            for (std::size_t kk = 0; kk < dofs.n_diel(); ++kk) {
                const auto r = integrals(dofs.diel_element(kk));
                const Index cu = static_cast<Index>(dofs.ud(kk));
                const Index cw = static_cast<Index>(dofs.wd(kk));
                if (outer) {
                    put(cu, -r.dc, -r.hc);
                    put(cw, mu1 * r.s0, mu1 * r.gx);
                } else {
                    put(cu, r.dc, r.hc);
                    put(cw, -mu2 * r.s0, -mu2 * r.gx);
                }
            }
        });
    }

    std::vector<Vec2> points_;
    std::vector<Region> regions_;
    bool gradients_ = false;
    CMatrix V_, Gx_, Gy_;
    std::optional<hmat::HMatrix> hmat_;
    std::vector<char> near_;
};

struct FieldSamples {
    CVector u;
    CVector dudx;  // empty unless gradients were requested
    CVector dudy;
    std::vector<char> near_singular;
};

/// Total field at points of one region; `incident(x)` supplies the incident
/// value and gradient added in region 1.
template <class Incident>
FieldSamples eval_field(const BoundarySystem& sys, const BoundarySolution& sol, const std::vector<Vec2>& points,
                        Region region, bool gradients, Incident&& incident) {
    FieldOperator op(sys, points, std::vector<Region>(points.size(), region), gradients);
    const CVector x = sol.stacked();
    FieldSamples s;
    s.u = op.values(x);
    if (gradients) std::tie(s.dudx, s.dudy) = op.gradients(x);
    if (region == Region::outer) {
        for (std::size_t p = 0; p < points.size(); ++p) {
            const FieldValue f = incident(points[p]);
            s.u[static_cast<Index>(p)] += f.u;
            if (gradients) {
                s.dudx[static_cast<Index>(p)] += f.grad.x();
                s.dudy[static_cast<Index>(p)] += f.grad.y();
            }
        }
    }
    s.near_singular = op.near_flags();
    return s;
}

/// Field radiated in vacuum by point sources: sum_m G1(x, x_m) weight_m,
/// with its gradient.
class PointSourceField {
public:
    PointSourceField(double k1, std::vector<Vec2> sources, CVector weights)
        : k_(k1), src_(std::move(sources)), w_(std::move(weights)) {
        if (static_cast<Index>(src_.size()) != w_.size()) throw Error("adjoint_incident: weight count mismatch");
    }

    FieldValue operator()(const Vec2& x) const {
        FieldValue f{0.0, CVec2::Zero()};
        for (std::size_t m = 0; m < src_.size(); ++m) {
            const Complex wm = w_[static_cast<Index>(m)];
            if (wm == 0.0) continue;
            const double r = (x - src_[m]).norm();
            if (!(r > 0.0)) throw Error("singular source evaluation");
            const auto s = kernel_sample(k_, x, src_[m], Vec2::UnitX());
            f.u += s.g * wm;
            f.grad += s.gradx * wm;
        }
        return f;
    }

private:
    double k_;
    std::vector<Vec2> src_;
    CVector w_;
};

/// Adjoint incident field at target points; the hmatrix backend compresses
/// the target/source interaction matrix with ACA.
inline CVector adjoint_incident(const std::vector<Vec2>& targets, const std::vector<Vec2>& obs,
                                const CVector& weights, double k1, Backend backend = Backend::dense,
                                const HMatrixOptions& hopt = {}) {
    if (static_cast<Index>(obs.size()) != weights.size()) throw Error("adjoint_incident: weight count mismatch");
    for (const auto& t : targets)
        for (const auto& o : obs)
            if (t == o) throw Error("singular source evaluation");
    if (backend == Backend::dense || targets.empty() || obs.empty()) {
        CVector out = CVector::Zero(static_cast<Index>(targets.size()));
        for (std::size_t p = 0; p < targets.size(); ++p)
            for (std::size_t m = 0; m < obs.size(); ++m)
                out[static_cast<Index>(p)] += green(k1, targets[p], obs[m]) * weights[static_cast<Index>(m)];
        return out;
    }
    auto rt = std::make_shared<const hmat::ClusterTree>(hmat::PointCloud::from_points(targets), hopt.n_min);
    auto ct = std::make_shared<const hmat::ClusterTree>(hmat::PointCloud::from_points(obs), hopt.n_min);
    auto kernel = hmat::EntryKernel{[&](std::size_t i, std::size_t j) { return green(k1, targets[i], obs[j]); }};
    const auto h = hmat::assemble_hmatrix(kernel, rt, ct, hopt.eta, hopt.tol);
    return h.multiply(weights);
}

}  // namespace cloakforge::bem2d

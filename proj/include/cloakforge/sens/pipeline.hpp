#pragma once

// Forward solve, objective, adjoint solve and lattice topological
// derivative for one configuration. The system is factorized once and the
// factors serve both right-hand sides.

#include <chrono>
#include <memory>

#include "cloakforge/levelset/evolve.hpp"
#include "cloakforge/sens/objective.hpp"
#include "cloakforge/sens/topological.hpp"

namespace cloakforge::sens {

struct Scene {
    bem2d::Media media{0.2, 2.0};
    Vec2 direction = Vec2::UnitX();
    ObjectiveSpec objective;
    bem2d::AssemblyOptions assembly;
    bem2d::Backend field_backend = bem2d::Backend::hmatrix;  // lattice evaluation
    bem2d::HMatrixOptions field_hmat{2.0, 64, 1e-5, true};
};

struct StepTimings {
    double assemble = 0.0;
    double factor = 0.0;
    double solve = 0.0;
    double field = 0.0;
    double td = 0.0;
    double total() const { return assemble + factor + solve + field + td; }
};

namespace detail {

class Stopwatch {
public:
    Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
    double lap() {
        const auto t = std::chrono::steady_clock::now();
        const double s = std::chrono::duration<double>(t - t0_).count();
        t0_ = t;
        return s;
    }

private:
    std::chrono::steady_clock::time_point t0_;
};

}  // namespace detail

/// Lattice samples of the forward (column 0) and adjoint (column 1) fields.
struct LatticeFields {
    levelset::Lattice lattice;
    std::vector<PointClass> cls;
    std::vector<Region> regions;
    std::vector<char> filled;  // has a field value (evaluated or copied)
    CMatrix fields;
};

/// One configuration: assembled and factorized on construction.
class Analysis {
public:
    Analysis(bem2d::BoundaryMesh mesh, const Scene& scene, StepTimings* timings = nullptr)
        : scene_(scene), timings_(timings ? timings : &own_) {
        scene_.objective.validate();
        detail::Stopwatch sw;
        if (!mesh.empty()) sys_ = std::make_unique<bem2d::BoundarySystem>(std::move(mesh), scene_.media, scene_.assembly);
        timings_->assemble += sw.lap();
        if (sys_) sys_->factorize();
        timings_->factor += sw.lap();
    }

    bool empty() const { return !sys_; }
    const bem2d::BoundarySystem& system() const { return *sys_; }
    std::size_t factorization_count() const { return sys_ ? sys_->factorization_count() : 0; }

    bem2d::FieldValue incident(const Vec2& x) const {
        return bem2d::incident_plane(x, scene_.direction, scene_.media.k1());
    }

    /// Forward solve and objective at the observation points.
    ObjectiveTerms forward() {
        detail::Stopwatch sw;
        if (sys_) {
            auto inc = [&](const Vec2& x) {
                const auto f = incident(x);
                return std::make_pair(f.u, f.grad);
            };
            const CVector b = bem2d::build_rhs(sys_->mesh(), sys_->dofs(), scene_.media, inc);
            forward_ = sys_->solve(CMatrix(b)).col(0);
        }
        timings_->solve += sw.lap();
        const auto& spec = scene_.objective;
        uinc_outer_.resize(static_cast<Index>(spec.outer.size()));
        for (std::size_t m = 0; m < spec.outer.size(); ++m) uinc_outer_[static_cast<Index>(m)] = incident(spec.outer[m]).u;
        u_outer_ = total_field(spec.outer, forward_, [&](const Vec2& x) { return incident(x).u; });
        if (spec.variant == Variant::modified)
            u_inner_ = total_field(spec.inner, forward_, [&](const Vec2& x) { return incident(x).u; });
        timings_->field += sw.lap();
        terms_ = objective_terms(spec, u_outer_, uinc_outer_, u_inner_);
        solved_ = true;
        return terms_;
    }

    const ObjectiveTerms& terms() const { return terms_; }
    const CVector& u_outer() const { return u_outer_; }
    const CVector& u_inner() const { return u_inner_; }
    const CVector& forward_density() const { return forward_; }

    /// Adjoint solve (once per configuration).
    void solve_adjoint() {
        if (!solved_) forward();
        if (adjoint_done_) return;
        detail::Stopwatch sw;
        source_ = adjoint_source_weights(scene_.objective, u_outer_, uinc_outer_, u_inner_);
        if (sys_) {
            const bem2d::PointSourceField adj_inc(scene_.media.k1(), source_.points, source_.weights);
            auto inc = [&](const Vec2& x) {
                const auto f = adj_inc(x);
                return std::make_pair(f.u, f.grad);
            };
            const CVector b = bem2d::build_rhs(sys_->mesh(), sys_->dofs(), scene_.media, inc);
            adjoint_ = sys_->solve(CMatrix(b)).col(0);
        }
        adjoint_done_ = true;
        timings_->solve += sw.lap();
    }

    const AdjointSource& adjoint_source() const { return source_; }

    /// Forward and adjoint total fields (columns 0 and 1) at points of the
    /// given regions; none may be near the boundary.
    CMatrix fields_at(const std::vector<Vec2>& pts, const std::vector<Region>& regions) {
        solve_adjoint();
        CMatrix fields = CMatrix::Zero(static_cast<Index>(pts.size()), 2);
        if (sys_ && !pts.empty()) {
            const bem2d::FieldOperator op(*sys_, pts, regions, false, scene_.assembly.workers, scene_.field_backend,
                                          scene_.field_hmat);
            CMatrix dens(forward_.size(), 2);
            dens << forward_, adjoint_;
            fields = op.values(dens);
        }
        std::vector<Vec2> outer_pts;
        for (std::size_t q = 0; q < pts.size(); ++q)
            if (regions[q] == Region::outer) outer_pts.push_back(pts[q]);
        const CVector ainc = bem2d::adjoint_incident(outer_pts, source_.points, source_.weights, scene_.media.k1(),
                                                     scene_.field_backend, scene_.field_hmat);
        for (std::size_t q = 0, o = 0; q < pts.size(); ++q)
            if (regions[q] == Region::outer) {
                fields(static_cast<Index>(q), 0) += incident(pts[q]).u;
                fields(static_cast<Index>(q), 1) += ainc[static_cast<Index>(o++)];
            }
        return fields;
    }

    /// Topological derivative at arbitrary points (vacuum or material, away
    /// from the boundary).
    std::vector<double> td_at(const std::vector<Vec2>& pts) {
        const auto cls = sys_ ? classify_points(sys_->mesh(), pts) : std::vector<PointClass>(pts.size(), PointClass::outer);
        std::vector<Region> regions;
        for (auto c : cls) {
            if (c == PointClass::near || c == PointClass::pec) throw Error("td_at: point on or inside a boundary");
            regions.push_back(c == PointClass::inner ? Region::inner : Region::outer);
        }
        const CMatrix f = fields_at(pts, regions);
        return sens::topological_derivative(f.col(0), f.col(1), regions, scene_.media);
    }

    /// Forward and adjoint total fields on every lattice point. Points inside
    /// a PEC or masked by `keep_out` get 0; points within half an element of
    /// the boundary copy the nearest regular sample.
    const LatticeFields& lattice_fields(const levelset::Lattice& lattice, const levelset::KeepOut& keep_out = {}) {
        if (cached_ && cached_->lattice == lattice && cached_mask_ == keep_out.mask) return *cached_;
        solve_adjoint();
        detail::Stopwatch sw;
        std::vector<Vec2> pts(lattice.size());
        for (std::size_t k = 0; k < pts.size(); ++k) pts[k] = lattice.point(k);
        LatticeFields lf;
        lf.lattice = lattice;
        lf.cls = sys_ ? classify_points(sys_->mesh(), pts) : std::vector<PointClass>(pts.size(), PointClass::outer);
        lf.regions.assign(pts.size(), Region::outer);
        lf.filled.assign(pts.size(), 0);
        auto masked = [&](std::size_t k) { return !keep_out.mask.empty() && keep_out.mask[k]; };
        std::vector<std::size_t> valid;
        std::vector<Region> regions;
        std::vector<Vec2> vp;
        for (std::size_t k = 0; k < pts.size(); ++k) {
            if (masked(k)) continue;
            if (lf.cls[k] == PointClass::outer || lf.cls[k] == PointClass::inner) {
                valid.push_back(k);
                vp.push_back(pts[k]);
                regions.push_back(lf.cls[k] == PointClass::inner ? Region::inner : Region::outer);
            }
        }
        timings_->td += sw.lap();
        const CMatrix f = fields_at(vp, regions);
        timings_->field += sw.lap();

        lf.fields = CMatrix::Zero(static_cast<Index>(pts.size()), 2);
        for (std::size_t q = 0; q < valid.size(); ++q) {
            lf.fields.row(static_cast<Index>(valid[q])) = f.row(static_cast<Index>(q));
            lf.regions[valid[q]] = regions[q];
            lf.filled[valid[q]] = 1;
        }
        for (std::size_t k = 0; k < pts.size(); ++k) {
            if (lf.cls[k] != PointClass::near || masked(k)) continue;
            double best = std::numeric_limits<double>::infinity();
            for (auto v : valid) {
                const double d = (pts[v] - pts[k]).squaredNorm();
                if (d < best) {
                    best = d;
                    lf.fields.row(static_cast<Index>(k)) = lf.fields.row(static_cast<Index>(v));
                    lf.regions[k] = lf.regions[v];
                    lf.filled[k] = 1;
                }
            }
        }
        timings_->td += sw.lap();
        cached_ = std::make_unique<LatticeFields>(std::move(lf));
        cached_mask_ = keep_out.mask;
        return *cached_;
    }

    /// Topological derivative on the lattice, zero where `lattice_fields`
    /// has no field.
    levelset::TDField topological_derivative(const levelset::Lattice& lattice, const levelset::KeepOut& keep_out = {}) {
        const LatticeFields& lf = lattice_fields(lattice, keep_out);
        detail::Stopwatch sw;
        const auto tv = sens::topological_derivative(lf.fields.col(0), lf.fields.col(1), lf.regions, scene_.media);
        levelset::TDField td(lattice, 0.0);
        for (std::size_t k = 0; k < tv.size(); ++k)
            if (lf.filled[k]) td.values[k] = tv[k];
        timings_->td += sw.lap();
        return td;
    }

private:
    template <class Inc>
    CVector total_field(const std::vector<Vec2>& pts, const CVector& density, Inc&& inc) const {
        CVector u(static_cast<Index>(pts.size()));
        if (!sys_) {
            for (std::size_t p = 0; p < pts.size(); ++p) u[static_cast<Index>(p)] = inc(pts[p]);
            return u;
        }
        const auto cls = classify_points(sys_->mesh(), pts);
        std::vector<Region> regions(pts.size(), Region::outer);
        for (std::size_t p = 0; p < pts.size(); ++p) {
            if (cls[p] == PointClass::inner) regions[p] = Region::inner;
            if (cls[p] == PointClass::near)
                throw SolverError("observation point within half an element of the boundary");
        }
        // PEC interiors hold no field; evaluate them as vacuum and zero them.
        const bem2d::FieldOperator op(*sys_, pts, regions);
        u = op.values(density);
        for (std::size_t p = 0; p < pts.size(); ++p) {
            if (cls[p] == PointClass::pec)
                u[static_cast<Index>(p)] = 0.0;
            else if (regions[p] == Region::outer)
                u[static_cast<Index>(p)] += inc(pts[p]);
        }
        return u;
    }

    Scene scene_;
    StepTimings own_;
    StepTimings* timings_;
    std::unique_ptr<bem2d::BoundarySystem> sys_;
    CVector forward_, adjoint_;
    AdjointSource source_;
    bool adjoint_done_ = false;
    CVector u_outer_, uinc_outer_, u_inner_;
    ObjectiveTerms terms_;
    bool solved_ = false;
    std::unique_ptr<LatticeFields> cached_;
    std::vector<char> cached_mask_;
};

}  // namespace cloakforge::sens

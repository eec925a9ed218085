#pragma once

// Collocation system for TM scattering by PEC and dielectric interfaces.
//
// Unknowns, in this order:
//   w_p  one per PEC element         (1/mu1) du/dn on the PEC boundary
//   u_d  one per dielectric element  total field trace
//   w_d  one per dielectric element  (1/mu1) du/dn = (1/mu2) du/dn
// The boundary is made of straight segments and every density is constant
// per segment.
//
// Equations, collocated at element midpoints x_i:
//   PEC row        -mu1 S1 w_p + D1 u_d - mu1 S1 w_d                 = u_inc
//   flux row       -K1' w_p + (N1/mu1 + N2/mu2) u_d - (K1' + K2') w_d = (1/mu1) du_inc/dn
//   continuity row -mu1 S1 w_p + (D1 + D2) u_d - (mu1 S1 + mu2 S2) w_d = u_inc
// with S, D, K', N the single-layer, double-layer, adjoint double-layer and
// hypersingular operators. N is evaluated in Maue's form
//   d2G/dn_x dn_y = k^2 (n_x . n_y) G - d2G/dt_x dt_y
// with the tangential derivative moved onto the density; for a constant
// density it leaves only the kernel gradients at the element end points.

#include <algorithm>
#include <atomic>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

#include "cloakforge/bem2d/media.hpp"
#include "cloakforge/bem2d/mesh.hpp"
#include "cloakforge/bem2d/quadrature.hpp"
#include "cloakforge/hmat/hlu.hpp"

namespace cloakforge::bem2d {

enum class Backend { dense, hmatrix };

inline const char* to_string(Backend b) { return b == Backend::dense ? "dense" : "hmatrix"; }

struct HMatrixOptions {
    double eta = 128.0;
    std::size_t n_min = 128;
    double tol = 1e-5;
    bool agglomerate = true;
};

struct AssemblyOptions {
    Backend backend = Backend::hmatrix;
    HMatrixOptions hmat;
    unsigned workers = 1;
};

/// Numbering of unknowns and equations.
class DofMap {
public:
    DofMap() = default;

    DofMap(const BoundaryMesh& mesh, const Topology& topo) {
        local_.assign(mesh.size(), 0);
        for (std::size_t e = 0; e < mesh.size(); ++e) {
            auto& list = mesh.tag(e) == Interface::pec ? pec_ : diel_;
            local_[e] = list.size();
            list.push_back(e);
        }
        next_.resize(diel_.size());
        prev_.resize(diel_.size());
        for (std::size_t k = 0; k < diel_.size(); ++k) {
            next_[k] = local_[topo.next[diel_[k]]];
            prev_[k] = local_[topo.prev[diel_[k]]];
        }
    }

    enum class Kind { w_p, u_d, w_d };

    std::size_t n_pec() const { return pec_.size(); }
    std::size_t n_diel() const { return diel_.size(); }
    std::size_t size() const { return pec_.size() + 2 * diel_.size(); }

    std::size_t wp(std::size_t j) const { return j; }
    std::size_t ud(std::size_t k) const { return pec_.size() + k; }
    std::size_t wd(std::size_t k) const { return pec_.size() + diel_.size() + k; }

    /// Kind and local index of a global unknown (rows use the same split:
    /// PEC rows, flux rows, continuity rows).
    std::pair<Kind, std::size_t> split(std::size_t g) const {
        if (g < pec_.size()) return {Kind::w_p, g};
        g -= pec_.size();
        if (g < diel_.size()) return {Kind::u_d, g};
        return {Kind::w_d, g - diel_.size()};
    }

    const std::vector<std::size_t>& pec_elements() const { return pec_; }
    const std::vector<std::size_t>& diel_elements() const { return diel_; }
    std::size_t pec_element(std::size_t j) const { return pec_[j]; }
    std::size_t diel_element(std::size_t k) const { return diel_[k]; }
    std::size_t diel_next(std::size_t k) const { return next_[k]; }
    std::size_t diel_prev(std::size_t k) const { return prev_[k]; }
    std::size_t local(std::size_t e) const { return local_[e]; }

    /// Mesh element that carries equation/unknown g.
    std::size_t element_of(std::size_t g) const {
        const auto [kind, i] = split(g);
        return kind == Kind::w_p ? pec_[i] : diel_[i];
    }

    /// Geometry for clustering: the carrying element.
    hmat::PointCloud point_cloud(const BoundaryMesh& mesh) const {
        hmat::PointCloud pc;
        for (std::size_t g = 0; g < size(); ++g) {
            const std::size_t e = element_of(g);
            const std::array<Vec2, 2> ext{mesh.a(e), mesh.b(e)};
            pc.add(mesh.midpoint(e), ext);
        }
        return pc;
    }

private:
    std::vector<std::size_t> pec_, diel_, local_, next_, prev_;
};

/// One set of boundary densities.
struct BoundarySolution {
    CVector w_p;
    CVector u_d;
    CVector w_d;

    CVector stacked() const {
        CVector x(w_p.size() + u_d.size() + w_d.size());
        x << w_p, u_d, w_d;
        return x;
    }
    static BoundarySolution unstack(const DofMap& dofs, const CVector& x) {
        const auto np = static_cast<Index>(dofs.n_pec()), nd = static_cast<Index>(dofs.n_diel());
        return {x.head(np), x.segment(np, nd), x.tail(nd)};
    }
};

/// Matrix entries of the collocation system by global row/column index.
class SystemKernel {
public:
    SystemKernel(const BoundaryMesh& mesh, const DofMap& dofs, const Media& media)
        : mesh_(&mesh), dofs_(&dofs), media_(media) {}

    void fill(std::span<const std::size_t> rows, std::span<const std::size_t> cols, CMatrix& out) const {
        // Distinct collocation and source elements of this block.
        std::vector<std::size_t> relems, celems;
        for (auto r : rows) relems.push_back(dofs_->element_of(r));
        for (auto c : cols) celems.push_back(dofs_->element_of(c));
        auto uniq = [](std::vector<std::size_t>& v) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        };
        uniq(relems);
        uniq(celems);
        auto ridx = [&](std::size_t e) {
            return static_cast<std::size_t>(std::lower_bound(relems.begin(), relems.end(), e) - relems.begin());
        };
        auto cidx = [&](std::size_t e) {
            return static_cast<std::size_t>(std::lower_bound(celems.begin(), celems.end(), e) - celems.begin());
        };

        const std::size_t nr = relems.size(), nc = celems.size();
        std::vector<ElementIntegrals> rec1(nr * nc), rec2;
        std::vector<char> has2(nr * nc, 0);
        const bool any_diel_row = std::any_of(relems.begin(), relems.end(),
                                              [&](std::size_t e) { return mesh_->tag(e) == Interface::dielectric; });
        if (any_diel_row) rec2.resize(nr * nc);
        for (std::size_t a = 0; a < nr; ++a) {
            const std::size_t i = relems[a];
            const Vec2 x = mesh_->midpoint(i);
            for (std::size_t b = 0; b < nc; ++b) {
                const std::size_t e = celems[b];
                rec1[a * nc + b] = pair_integrals(media_.k1(), i, e, x);
                if (mesh_->tag(i) == Interface::dielectric && mesh_->tag(e) == Interface::dielectric) {
                    rec2[a * nc + b] = pair_integrals(media_.k2(), i, e, x);
                    has2[a * nc + b] = 1;
                }
            }
        }

        const double mu1 = media_.outer.mu, mu2 = media_.inner.mu;
        const double k1 = media_.k1(), k2 = media_.k2();
        for (std::size_t ra = 0; ra < rows.size(); ++ra) {
            const auto [rkind, ri] = dofs_->split(rows[ra]);
            const std::size_t i = dofs_->element_of(rows[ra]);
            const std::size_t a = ridx(i);
            const Vec2 ni = mesh_->normal(i), ti = mesh_->tangent(i);
            for (std::size_t cb = 0; cb < cols.size(); ++cb) {
                const auto [ckind, ci] = dofs_->split(cols[cb]);
                const std::size_t e = dofs_->element_of(cols[cb]);
                const std::size_t bi = a * nc + cidx(e);
                const ElementIntegrals& r1 = rec1[bi];
                Complex v;
                if (ckind == DofMap::Kind::u_d) {
                    switch (rkind) {
                        case DofMap::Kind::w_p:  // PEC row
                            v = r1.dc;
                            break;
                        case DofMap::Kind::u_d:  // flux row
                            v = hyper(k1, r1, e, ni, ti) / mu1 + hyper(k2, rec2[bi], e, ni, ti) / mu2;
                            break;
                        case DofMap::Kind::w_d:  // continuity row
                            v = r1.dc + rec2[bi].dc;
                            break;
                    }
                } else {
                    switch (rkind) {
                        case DofMap::Kind::w_p:
                            v = -mu1 * r1.s0;
                            break;
                        case DofMap::Kind::u_d:
                            v = -ndot(ni, r1.gx);
                            if (has2[bi]) v -= ndot(ni, rec2[bi].gx);
                            break;
                        case DofMap::Kind::w_d:
                            v = -mu1 * r1.s0;
                            if (has2[bi]) v -= mu2 * rec2[bi].s0;
                            break;
                    }
                }
                out(static_cast<Index>(ra), static_cast<Index>(cb)) = v;
            }
        }
    }

    CMatrix dense(unsigned workers = 1) const;

private:
    static Complex ndot(const Vec2& n, const CVec2& v) { return n.x() * v.x() + n.y() * v.y(); }

    ElementIntegrals pair_integrals(double k, std::size_t i, std::size_t e, const Vec2& x) const {
        if (i == e) return self_integrals(k, mesh_->a(e), mesh_->b(e));
        return element_integrals(k, mesh_->a(e), mesh_->b(e), x);
    }

    // Hypersingular operator applied to the unit density on element e:
    // k^2 (n_i . n_e) int G - t_i . (grad G(x, b) - grad G(x, a)).
    Complex hyper(double k, const ElementIntegrals& r, std::size_t e, const Vec2& ni, const Vec2& ti) const {
        return k * k * ni.dot(mesh_->normal(e)) * r.s0 - ndot(ti, r.grad_b - r.grad_a);
    }

    const BoundaryMesh* mesh_;
    const DofMap* dofs_;
    Media media_;
};

namespace detail {

/// Runs task(t) for t in [0, n) on `workers` threads with dynamic dispatch;
/// the first exception is rethrown.
template <class Task>
void parallel_for(std::size_t n, unsigned workers, Task&& task) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex m;
    auto run = [&] {
        for (;;) {
            const std::size_t t = next.fetch_add(1);
            if (t >= n) return;
            try {
                task(t);
            } catch (...) {
                std::lock_guard lock(m);
                if (!failure) failure = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    if (workers <= 1) {
        run();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

inline CMatrix SystemKernel::dense(unsigned workers) const {
    const std::size_t n = dofs_->size();
    CMatrix A(n, n);
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    constexpr std::size_t chunk = 32;
    const std::size_t tasks = (n + chunk - 1) / chunk;
    detail::parallel_for(tasks, workers, [&](std::size_t t) {
        const std::size_t r0 = t * chunk, r1 = std::min(n, r0 + chunk);
        CMatrix block(static_cast<Index>(r1 - r0), static_cast<Index>(n));
        fill(std::span<const std::size_t>(all.data() + r0, r1 - r0), all, block);
        A.middleRows(static_cast<Index>(r0), static_cast<Index>(r1 - r0)) = block;
    });
    return A;
}

/// Assembled and (lazily) factorized system. Forward and adjoint
/// right-hand sides are solved against the same factorization.
class BoundarySystem {
public:
    BoundarySystem(BoundaryMesh mesh, const Media& media, const AssemblyOptions& opt = {})
        : mesh_(std::make_shared<const BoundaryMesh>(std::move(mesh))), media_(media), opt_(opt) {
        media_.validate();
        if (mesh_->empty()) throw SolverError("assemble_system: mesh has no interface");
        topo_ = check_watertight(*mesh_);
        dofs_ = DofMap(*mesh_, topo_);
        kernel_.emplace(*mesh_, dofs_, media_);
        if (opt_.backend == Backend::dense) {
            dense_ = kernel_->dense(opt_.workers);
        } else {
            auto tree = std::make_shared<const hmat::ClusterTree>(dofs_.point_cloud(*mesh_), opt_.hmat.n_min);
            hmat::HMatrix h = hmat::assemble_hmatrix(*kernel_, tree, tree, opt_.hmat.eta, opt_.hmat.tol, opt_.workers);
            if (opt_.hmat.agglomerate) h = hmat::agglomerate(std::move(h), opt_.hmat.tol);
            hmat_ = std::move(h);
        }
    }

    BoundarySystem(const BoundarySystem&) = delete;
    BoundarySystem& operator=(const BoundarySystem&) = delete;

    const BoundaryMesh& mesh() const { return *mesh_; }
    const Topology& topology() const { return topo_; }
    const DofMap& dofs() const { return dofs_; }
    const Media& media() const { return media_; }
    const AssemblyOptions& options() const { return opt_; }
    Backend backend() const { return opt_.backend; }
    std::size_t size() const { return dofs_.size(); }
    const SystemKernel& kernel() const { return *kernel_; }

    const CMatrix& dense_matrix() const {
        if (opt_.backend != Backend::dense) throw Error("system: not a dense backend");
        return dense_;
    }
    const hmat::HMatrix& hmatrix() const {
        if (opt_.backend != Backend::hmatrix) throw Error("system: not an hmatrix backend");
        return *hmat_;
    }

    /// Stored scalars of the system matrix.
    std::size_t stored_scalars() const {
        return opt_.backend == Backend::dense ? static_cast<std::size_t>(dense_.size()) : hmat_->stored_scalars();
    }

    CVector multiply(const CVector& x) const {
        if (x.size() != static_cast<Index>(size())) throw Error("system: dimension mismatch");
        return opt_.backend == Backend::dense ? CVector(dense_ * x) : hmat_->multiply(x);
    }

    void factorize() {
        if (factorized_) return;
        if (opt_.backend == Backend::dense) {
            lu_.compute(dense_);
            const double rc = lu_.rcond();
            if (!(rc > 1e-15)) throw SolverError(context("singular system"));
        } else {
            try {
                hlu_ = hmat::hlu_factorize(*hmat_, opt_.hmat.tol);
            } catch (const SolverError& e) {
                throw SolverError(context(e.what()));
            }
        }
        factorized_ = true;
        ++factorizations_;
    }

    std::size_t factorization_count() const { return factorizations_; }

    /// Solves for every column of B (factorizing on first use).
    CMatrix solve(const CMatrix& B) {
        if (B.rows() != static_cast<Index>(size())) throw Error("solve_boundary: dimension mismatch");
        factorize();
        CMatrix X(B.rows(), B.cols());
        if (opt_.backend == Backend::dense) {
            for (Index j = 0; j < B.cols(); ++j) X.col(j) = lu_.solve(B.col(j));
        } else {
            X = hlu_.solve(B);
        }
        if (!X.allFinite()) throw SolverError(context("non-finite solution"));
        return X;
    }

    std::vector<BoundarySolution> solve_boundary(const std::vector<CVector>& rhs) {
        CMatrix B(static_cast<Index>(size()), static_cast<Index>(rhs.size()));
        for (std::size_t j = 0; j < rhs.size(); ++j) B.col(static_cast<Index>(j)) = rhs[j];
        const CMatrix X = solve(B);
        std::vector<BoundarySolution> out;
        for (Index j = 0; j < X.cols(); ++j) out.push_back(BoundarySolution::unstack(dofs_, X.col(j)));
        return out;
    }

private:
    std::string context(const std::string& what) const {
        std::ostringstream os;
        os << what << " (omega=" << media_.omega() << ", k1=" << media_.k1() << ", k2=" << media_.k2()
           << ", elements=" << mesh_->size() << ", unknowns=" << size() << ")";
        return os.str();
    }

    std::shared_ptr<const BoundaryMesh> mesh_;
    Media media_;
    AssemblyOptions opt_;
    Topology topo_;
    DofMap dofs_;
    std::optional<SystemKernel> kernel_;
    CMatrix dense_;
    std::optional<hmat::HMatrix> hmat_;
    Eigen::PartialPivLU<CMatrix> lu_;
    hmat::HLUFactors hlu_;
    bool factorized_ = false;
    std::size_t factorizations_ = 0;
};

/// Incident-field traces at the collocation points:
///   PEC and continuity rows take u, flux rows (1/mu1) du/dn.
/// `field(x)` returns (u, grad u).
template <class Field>
CVector build_rhs(const BoundaryMesh& mesh, const DofMap& dofs, const Media& media, Field&& field) {
    CVector b(static_cast<Index>(dofs.size()));
    for (std::size_t j = 0; j < dofs.n_pec(); ++j) {
        const std::size_t e = dofs.pec_element(j);
        b[static_cast<Index>(dofs.wp(j))] = field(mesh.midpoint(e)).first;
    }
    for (std::size_t k = 0; k < dofs.n_diel(); ++k) {
        const std::size_t e = dofs.diel_element(k);
        const auto [u, g] = field(mesh.midpoint(e));
        const Vec2 n = mesh.normal(e);
        b[static_cast<Index>(dofs.ud(k))] = (n.x() * g.x() + n.y() * g.y()) / media.outer.mu;
        b[static_cast<Index>(dofs.wd(k))] = u;
    }
    return b;
}

}  // namespace cloakforge::bem2d

#pragma once

// H-matrix timing curves on the dielectric circle family, with a dense LU
// baseline solving the same systems.

#include <chrono>

#include "cloakforge/bem2d/field.hpp"
#include "cloakforge/bem2d/system.hpp"
#include "cloakforge/cli/config_io.hpp"

namespace cloakforge::cli {

struct BenchmarkOptions {
    std::vector<std::size_t> sizes{600, 1200, 2400, 4800};
    bool include_9600 = false;
    std::size_t dense_upto = 2400;  // dense baseline for N <= this (0: none)
    double omega = 0.2;
    double eps2 = 2.0;
    double radius = 20.0;
    Vec2 center{50.0, 50.0};
    bem2d::HMatrixOptions hmat;  // 128 / 128 / 1e-5
    unsigned workers = 1;
};

struct BenchmarkRow {
    std::size_t n = 0;  // boundary elements
    std::size_t unknowns = 0;
    double t_assemble = 0.0;
    double t_hlu = 0.0;
    double t_solve = 0.0;
    double t_matvec = 0.0;
    std::size_t stored = 0;

    bool has_dense = false;
    double t_dense_assemble = 0.0;
    double t_dense_lu = 0.0;
    double t_dense_solve = 0.0;
    Complex rhs_checksum{};
    Complex dense_rhs_checksum{};
    double rel_diff = 0.0;  // |x_H - x_dense| / |x_dense|
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point& t0) {
    const auto t = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(t - t0).count();
    t0 = t;
    return s;
}

inline CVector plane_rhs(const bem2d::BoundarySystem& sys) {
    const double k1 = sys.media().k1();
    return bem2d::build_rhs(sys.mesh(), sys.dofs(), sys.media(), [k1](const Vec2& x) {
        const auto f = bem2d::incident_plane(x, Vec2::UnitX(), k1);
        return std::make_pair(f.u, f.grad);
    });
}

}  // namespace detail

/// One timed H-matrix (and optionally dense) solve of a plane wave on a
/// mesh.
inline BenchmarkRow benchmark_mesh(const bem2d::BoundaryMesh& mesh, const bem2d::Media& media,
                                   const bem2d::HMatrixOptions& hopt, bool dense, unsigned workers = 1) {
    using clock = std::chrono::steady_clock;
    BenchmarkRow row;
    row.n = mesh.size();
    bem2d::AssemblyOptions o;
    o.hmat = hopt;
    o.workers = workers;
    auto t0 = clock::now();
    bem2d::BoundarySystem hs(mesh, media, o);
    row.t_assemble = detail::seconds_since(t0);
    row.unknowns = hs.size();
    row.stored = hs.stored_scalars();
    const CVector b = detail::plane_rhs(hs);
    row.rhs_checksum = b.sum();
    detail::seconds_since(t0);
    hs.factorize();
    row.t_hlu = detail::seconds_since(t0);
    const CVector xh = hs.solve(b);
    row.t_solve = detail::seconds_since(t0);
    const CVector y = hs.multiply(xh);
    row.t_matvec = detail::seconds_since(t0);
    if (!y.allFinite()) throw SolverError("benchmark: non-finite matvec");

    if (dense) {
        o.backend = bem2d::Backend::dense;
        t0 = clock::now();
        bem2d::BoundarySystem ds(mesh, media, o);
        row.t_dense_assemble = detail::seconds_since(t0);
        const CVector bd = detail::plane_rhs(ds);
        row.dense_rhs_checksum = bd.sum();
        detail::seconds_since(t0);
        ds.factorize();
        row.t_dense_lu = detail::seconds_since(t0);
        const CVector xd = ds.solve(bd);
        row.t_dense_solve = detail::seconds_since(t0);
        row.has_dense = true;
        row.rel_diff = (xh - xd).norm() / xd.norm();
    }
    return row;
}

/// Progress callback, called after each size.
using BenchmarkProgress = std::function<void(const BenchmarkRow&)>;

inline std::vector<BenchmarkRow> run_benchmark(const BenchmarkOptions& opt, const BenchmarkProgress& progress = {}) {
    auto sizes = opt.sizes;
    if (opt.include_9600) sizes.push_back(9600);
    const bem2d::Media media(opt.omega, opt.eps2);
    std::vector<BenchmarkRow> rows;
    for (std::size_t n : sizes) {
        const auto mesh = bem2d::circle_mesh(opt.center, opt.radius, n, bem2d::Interface::dielectric);
        rows.push_back(benchmark_mesh(mesh, media, opt.hmat, n <= opt.dense_upto, opt.workers));
        if (progress) progress(rows.back());
    }
    return rows;
}

inline std::string timing_csv(const std::vector<BenchmarkRow>& rows) {
    std::string s = "N,t_assemble,t_hlu,t_solve,t_matvec\n";
    for (const auto& r : rows)
        s += std::to_string(r.n) + "," + format17(r.t_assemble) + "," + format17(r.t_hlu) + "," +
             format17(r.t_solve) + "," + format17(r.t_matvec) + "\n";
    return s;
}

/// Dense baseline, its rhs checksums and the relative solution difference.
inline std::string dense_csv(const std::vector<BenchmarkRow>& rows) {
    std::string s = "N,t_assemble,t_lu,t_solve,rhs_checksum_re,rhs_checksum_im,rhs_match,rel_diff\n";
    for (const auto& r : rows) {
        if (!r.has_dense) continue;
        s += std::to_string(r.n) + "," + format17(r.t_dense_assemble) + "," + format17(r.t_dense_lu) + "," +
             format17(r.t_dense_solve) + "," + format17(r.rhs_checksum.real()) + "," +
             format17(r.rhs_checksum.imag()) + "," + (r.rhs_checksum == r.dense_rhs_checksum ? "1" : "0") + "," +
             format17(r.rel_diff) + "\n";
    }
    return s;
}

}  // namespace cloakforge::cli

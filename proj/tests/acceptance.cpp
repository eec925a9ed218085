// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [criterion numbers...] [--suite <test binary>]... [--report <file>]
//
// The exit status is nonzero only if a check could not be carried out;
// criteria that do not hold are reported as FAIL lines.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <string>

#include "cloakforge/cli/benchmark.hpp"
#include "cloakforge/cli/oracle.hpp"
#include "cloakforge/hmat/aca.hpp"
#include "cloakforge/optim/driver.hpp"

using namespace cloakforge;
using bem2d::Backend;
using bem2d::CylinderKind;
using bem2d::Interface;
using bem2d::Region;
using clock_type = std::chrono::steady_clock;

namespace {

struct Result {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double since(clock_type::time_point t0) { return std::chrono::duration<double>(clock_type::now() - t0).count(); }

std::vector<std::string> g_suites;

// ---------------------------------------------------------------------------
// 1. PEC cylinder against the series solution

Result oracle() {
    const auto t0 = clock_type::now();
    const bem2d::Media media(0.2, 1.0);  // k1 r = 2 for r = 10
    std::vector<double> err;
    for (std::size_t n : {150u, 300u, 600u}) err.push_back(cli::oracle_error(CylinderKind::pec, 10.0, n, media).rel_l2);
    const double t = since(t0);
    const bool dec = err[1] < err[0] && err[2] < err[1];
    return {dec && err[2] <= 0.01 && t < 30.0,
            fmt("rel L2 %.3e / %.3e / %.3e for N = 150/300/600, %.1fs", err[0], err[1], err[2], t)};
}

// ---------------------------------------------------------------------------
// 2. H-matrix solve against dense LU

std::vector<cli::BenchmarkRow> g_dense_rows;  // circle family, reused by 3

Result fidelity() {
    bem2d::HMatrixOptions h{128.0, 16, 1e-5, true};
    double worst = 0.0;
    std::string where;
    auto check = [&](const std::string& name, const bem2d::BoundaryMesh& m, double eps2) {
        const auto r = cli::benchmark_mesh(m, bem2d::Media(0.2, eps2), h, true);
        if (r.rhs_checksum != r.dense_rhs_checksum) throw Error("rhs checksum mismatch on " + name);
        std::printf("    %-28s N %5zu  rel diff %.2e  (H-LU %.2fs, dense LU %.2fs)\n", name.c_str(), r.n, r.rel_diff,
                    r.t_hlu, r.t_dense_lu);
        std::fflush(stdout);
        if (r.rel_diff >= worst) {
            worst = r.rel_diff;
            where = name + " N=" + std::to_string(r.n);
        }
        return r;
    };
    for (std::size_t n : {600u, 1200u, 2400u})
        g_dense_rows.push_back(check("dielectric circle r=20", bem2d::circle_mesh(Vec2(50, 50), 20.0, n, Interface::dielectric), 2.0));
    // PEC core inside a dielectric shell
    for (std::size_t n : {600u, 1200u}) {
        bem2d::BoundaryMesh m;
        m.add_circle(Vec2(50, 50), 10.0, n / 6, Interface::pec);
        std::vector<Vec2> hole, outer;
        for (std::size_t i = 0; i < n / 3; ++i) {
            const double a = 2.0 * pi * static_cast<double>(i) / static_cast<double>(n / 3);
            hole.push_back(Vec2(50, 50) + 15.0 * Vec2(std::cos(a), std::sin(a)));
        }
        for (std::size_t i = 0; i < n / 2; ++i) {
            const double a = -2.0 * pi * static_cast<double>(i) / static_cast<double>(n / 2);
            outer.push_back(Vec2(50, 50) + 35.0 * Vec2(std::cos(a), std::sin(a)));
        }
        m.add_loop(outer, Interface::dielectric);
        m.add_loop(hole, Interface::dielectric);
        check("PEC in dielectric shell", m, 5.0);
    }
    // designs produced by the level-set pipeline
    for (const char* p : {"conventional-eps2", "modified-eps5"}) {
        optim::OptConfig c = cli::preset(p);
        const auto st = optim::initial_state(c);
        check(std::string("initial design ") + p, optim::design_mesh(c, st.phi), c.eps2);
        c.element_length = 0.5;
        check(std::string("initial design ") + p + " fine", optim::design_mesh(c, st.phi), c.eps2);
    }
    return {worst <= 1e-4, fmt("max rel diff %.2e (%s), eta 128, n_min 16, tol 1e-5", worst, where.c_str())};
}

// ---------------------------------------------------------------------------
// 3, 4. H-LU timings

double best_hlu(const bem2d::BoundaryMesh& mesh, const bem2d::Media& media, const bem2d::HMatrixOptions& h, int reps) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) best = std::min(best, cli::benchmark_mesh(mesh, media, h, false).t_hlu);
    return best;
}

Result scaling() {
    const bem2d::HMatrixOptions h{128.0, 128, 1e-5, true};
    const bem2d::Media media(0.2, 2.0);
    std::vector<double> t;
    const std::vector<std::size_t> sizes{600, 1200, 2400, 4800};
    for (std::size_t n : sizes) {
        t.push_back(best_hlu(bem2d::circle_mesh(Vec2(50, 50), 20.0, n, Interface::dielectric), media, h, 2));
        std::printf("    N %5zu  H-LU %.3fs", n, t.back());
        for (const auto& d : g_dense_rows)
            if (d.n == n) std::printf("  dense LU %.3fs", d.t_dense_lu);
        std::printf("\n");
        std::fflush(stdout);
    }
    const double r1 = t[2] / t[0], r2 = t[3] / t[1];
    return {r1 <= 6.0 && r2 <= 6.0, fmt("T(2400)/T(600) = %.2f, T(4800)/T(1200) = %.2f (eta 128, n_min 128)", r1, r2)};
}

Result contrast() {
    const bem2d::HMatrixOptions h{128.0, 128, 1e-5, true};
    const auto mesh = bem2d::circle_mesh(Vec2(50, 50), 20.0, 1200, Interface::dielectric);
    // Interleaved repetitions, so drift in machine speed hits every case.
    const std::vector<double> eps{2.0, 5.0, 8.0};
    std::vector<double> t(eps.size(), 1e300);
    for (int r = 0; r < 5; ++r)
        for (std::size_t i = 0; i < eps.size(); ++i)
            t[i] = std::min(t[i], cli::benchmark_mesh(mesh, bem2d::Media(0.2, eps[i]), h, false).t_hlu);
    const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
    const double spread = *hi / *lo - 1.0;
    return {spread <= 0.25, fmt("H-LU %.3f / %.3f / %.3fs for eps2 = 2/5/8, spread %.0f%%", t[0], t[1], t[2], 100 * spread)};
}

// ---------------------------------------------------------------------------
// 5. Topological derivative against two-solve finite differences

sens::Scene fd_scene() {
    sens::Scene s;
    s.media = bem2d::Media(0.2, 2.0);
    for (int i = 0; i < 48; ++i) {
        const double a = 2.0 * pi * i / 48;
        s.objective.outer.emplace_back(40.0 * std::cos(a), 40.0 * std::sin(a));
    }
    s.assembly.backend = Backend::dense;
    s.field_backend = Backend::dense;
    return s;
}

// Polygon with the area of the disc of radius rho.
void add_disc(bem2d::BoundaryMesh& m, const Vec2& c, double rho, std::size_t n) {
    const double nn = static_cast<double>(n);
    const double r = rho * std::sqrt(2.0 * pi / (nn * std::sin(2.0 * pi / nn)));
    std::vector<Vec2> pts;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = -2.0 * pi * static_cast<double>(i) / nn;
        pts.push_back(c + r * Vec2(std::cos(t), std::sin(t)));
    }
    m.add_loop(pts, Interface::dielectric);
}

Result finite_difference() {
    const auto t0 = clock_type::now();
    const auto base = bem2d::circle_mesh(Vec2(0, 0), 10.0, 120, Interface::pec);
    const auto s = fd_scene();
    sens::Analysis an(base, s);
    const double j0 = an.forward().total();
    const std::vector<Vec2> probes{{16, 0}, {3, 18}, {22, -12}, {-17, 6}, {8, -24}};
    const auto td = an.td_at(probes);
    const double wavelength = 2.0 * pi / s.media.k1();
    bool ok = true;
    double worst = 0.0;
    for (std::size_t p = 0; p < probes.size(); ++p) {
        std::vector<double> err;
        std::printf("    probe (%g, %g) T %.4e  ratios", probes[p].x(), probes[p].y(), td[p]);
        for (double f : {0.02, 0.01, 0.005}) {
            const double rho = f * wavelength;
            // disc meshed with M and 2M elements, first-order error removed
            double dj[2];
            for (int k = 0; k < 2; ++k) {
                bem2d::BoundaryMesh m = base;
                add_disc(m, probes[p], rho, k == 0 ? 192 : 384);
                dj[k] = sens::Analysis(m, s).forward().total() - j0;
            }
            const double ratio = (2.0 * dj[1] - dj[0]) / (td[p] * pi * rho * rho);
            std::printf(" %.4f", ratio);
            err.push_back(std::abs(ratio - 1.0));
        }
        std::printf("\n");
        std::fflush(stdout);
        ok = ok && err[2] <= 0.1 && err[2] <= err[1] + 1e-3 && err[1] <= err[0] + 1e-3;
        worst = std::max(worst, err[2]);
    }
    const double t = since(t0);
    return {ok && t < 300.0, fmt("5 probes, rho = 0.02/0.01/0.005 wavelengths, worst |ratio - 1| %.4f at the smallest, %.0fs",
                                 worst, t)};
}

// ---------------------------------------------------------------------------
// 6. ACA

Result aca_suite() {
    std::mt19937 rng(20261019);
    std::uniform_int_distribution<int> rank_d(0, 5), m_d(1, 100), n_d(1, 80);
    std::normal_distribution<double> g;
    const double tol = 1e-5;
    int bad = 0;
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
        const Index r = rank_d(rng), m = m_d(rng), n = n_d(rng);
        CMatrix U(m, r), V(n, r);
        for (Index i = 0; i < U.size(); ++i) U.data()[i] = Complex(g(rng), g(rng));
        for (Index i = 0; i < V.size(); ++i) V.data()[i] = Complex(g(rng), g(rng));
        const CMatrix A = U * V.adjoint();
        const auto lr = hmat::aca_approximate([&](Index i, Index j) { return A(i, j); }, m, n, tol);
        const double e = (A - lr.dense()).norm();
        const double limit = tol * A.norm();
        if (lr.rank() > std::min<Index>(r, std::min(m, n)) + 1 || e > limit) ++bad;
        if (A.norm() > 0) worst = std::max(worst, e / A.norm());
    }
    // Helmholtz interaction blocks of an assembled system
    bem2d::AssemblyOptions o;
    o.hmat = {2.0, 16, tol, false};
    bem2d::BoundarySystem sys(bem2d::circle_mesh(Vec2(0, 0), 20.0, 600, Interface::dielectric), bem2d::Media(0.2, 5.0), o);
    const auto& H = sys.hmatrix();
    const auto& rp = H.row_tree().perm();
    const auto& cp = H.col_tree().perm();
    int blocks = 0, bad_blocks = 0;
    double worst_block = 0.0;
    H.root().for_each_leaf([&](const hmat::BlockNode& b) {
        if (b.status != hmat::BlockStatus::admissible) return;
        std::vector<std::size_t> rows(rp.begin() + b.row_begin, rp.begin() + b.row_begin + b.row_size);
        std::vector<std::size_t> cols(cp.begin() + b.col_begin, cp.begin() + b.col_begin + b.col_size);
        CMatrix ex(b.row_size, b.col_size);
        sys.kernel().fill(rows, cols, ex);
        const double e = (ex - b.lowrank.dense()).norm() / ex.norm();
        worst_block = std::max(worst_block, e);
        ++blocks;
        if (e > 10 * tol) ++bad_blocks;
    });
    return {bad == 0 && bad_blocks == 0 && blocks > 0,
            fmt("random: %d/200 violations (worst rel %.1e); Helmholtz blocks: %d/%d above 10 tol (worst %.1e)", bad, worst,
                bad_blocks, blocks, worst_block)};
}

// ---------------------------------------------------------------------------
// 7. Optimization outcome

Result optimization() {
    const auto t0 = clock_type::now();
    optim::OptConfig c = cli::preset("conventional-eps2");
    c.stop_below = 0.1;
    c.max_iterations = 300;
    const auto s = optim::run_optimization(c);
    std::size_t first = s.history.size();
    for (std::size_t k = 0; k < s.history.size(); ++k)
        if (s.history[k] <= 0.1 * s.j_reference) {
            first = k;
            break;
        }
    const bool conv_ok = first < s.history.size();
    std::printf("    conventional: %zu observation points, lattice %zux%zu, J_PEC %.4g, J/J_PEC %.4f at step %zu, %.0fs\n",
                optim::frame_points(c).size(), c.lattice, c.lattice, s.j_reference,
                s.history.empty() ? 1.0 : s.history.back() / s.j_reference, s.history.size() - 1, since(t0));
    std::fflush(stdout);

    // modified preset: both terms against the empty-domain baseline
    const auto t1 = clock_type::now();
    optim::OptConfig m = cli::preset("modified-eps2");
    m.max_iterations = 40;
    const auto ms = optim::run_optimization(m);
    const auto base = ms.reference_terms;
    const auto fin = ms.terms.back();
    const bool inner_ok = fin.inner * 5.0 <= base.inner;
    const bool outer_ok = fin.outer * 5.0 <= base.outer;
    std::printf("    modified (%zu steps, %.0fs): outer %.4g -> %.4g, inner %.4g -> %.4g (inner reduced %.1fx)\n",
                ms.history.size(), since(t1), base.outer, fin.outer, base.inner, fin.inner,
                fin.inner > 0 ? base.inner / fin.inner : 0.0);
    return {conv_ok && inner_ok && outer_ok,
            fmt("conventional J/J_PEC <= 0.1 %s; modified: inner term %s, outer term %s (empty-domain outer baseline is %.3g)",
                conv_ok ? ("first at step " + std::to_string(first)).c_str() : "not reached in 300 steps",
                inner_ok ? "reduced >= 5x" : "not reduced 5x", outer_ok ? "reduced >= 5x" : "not reduced 5x", base.outer)};
}

// ---------------------------------------------------------------------------
// 8. Invariants

Result invariants() {
    const auto t0 = clock_type::now();
    std::vector<std::string> failed;

    // zero contrast: dielectric circle with eps2 = eps1
    double zc = 0.0;
    {
        const bem2d::Media media(0.2, 1.0);
        bem2d::AssemblyOptions o;
        o.backend = Backend::dense;
        bem2d::BoundarySystem sys(bem2d::circle_mesh(Vec2::Zero(), 10.0, 600, Interface::dielectric), media, o);
        auto inc = [&](const Vec2& x) { return bem2d::incident_plane(x, Vec2::UnitX(), media.k1()); };
        const CVector b = bem2d::build_rhs(sys.mesh(), sys.dofs(), media, [&](const Vec2& x) {
            const auto f = inc(x);
            return std::make_pair(f.u, f.grad);
        });
        const auto sol = sys.solve_boundary({b})[0];
        const auto pts = cli::probe_ring(20.0, 64);
        const auto f = bem2d::eval_field(sys, sol, pts, Region::outer, false, inc);
        for (std::size_t p = 0; p < pts.size(); ++p)
            zc = std::max(zc, std::abs(f.u[static_cast<Index>(p)] - inc(pts[p]).u) / std::abs(inc(pts[p]).u));
        if (zc > 1e-6) failed.push_back(fmt("BEM zero contrast %.1e > 1e-6", zc));
        const CVector mie = bem2d::mie_reference(CylinderKind::dielectric, 10.0, media, pts);
        double ms = 0.0;
        for (std::size_t p = 0; p < pts.size(); ++p) ms = std::max(ms, std::abs(mie[static_cast<Index>(p)] - inc(pts[p]).u));
        if (ms > 1e-12) failed.push_back("series zero contrast");
        if (sens::td_value(Complex(0.3, 1.0), Complex(-2.0, 0.5), 1.0, 1.0, 0.2) != 0.0)
            failed.push_back("T at zero contrast");
    }
    {
        sens::Scene s;
        s.objective.outer = cli::probe_ring(30.0, 16);
        sens::Analysis an(bem2d::BoundaryMesh{}, s);
        const auto t = an.forward();
        if (t.total() > 1e-12) failed.push_back("empty domain objective");
    }

    // reciprocity
    {
        std::mt19937 rng(5);
        std::uniform_real_distribution<double> u(-50.0, 50.0);
        for (int i = 0; i < 1000; ++i) {
            const Vec2 a(u(rng), u(rng)), b(u(rng), u(rng));
            if ((a - b).norm() == 0.0) continue;
            if (bem2d::green(0.2, a, b) != bem2d::green(0.2, b, a)) {
                failed.push_back("Green symmetry");
                break;
            }
        }
        bem2d::BoundaryMesh m;
        m.add_circle(Vec2(0, 0), 10.0, 120, Interface::pec);
        m.add_circle(Vec2(18, 4), 4.0, 60, Interface::dielectric);
        const bem2d::Media media(0.2, 3.0);
        bem2d::AssemblyOptions o;
        o.backend = Backend::dense;
        bem2d::BoundarySystem sys(m, media, o);
        auto scattered = [&](const Vec2& src, const Vec2& at) {
            CVector w(1);
            w << 1.0;
            const bem2d::PointSourceField f(media.k1(), {src}, w);
            const CVector rhs = bem2d::build_rhs(m, sys.dofs(), media, [&](const Vec2& x) {
                const auto v = f(x);
                return std::make_pair(v.u, v.grad);
            });
            const CVector dens = sys.solve(CMatrix(rhs)).col(0);
            const bem2d::FieldOperator op(sys, {at}, {Region::outer});
            return op.values(dens)[0];
        };
        const Complex ab = scattered(Vec2(9, -30), Vec2(-25, 6)), ba = scattered(Vec2(-25, 6), Vec2(9, -30));
        if (std::abs(ab - ba) > 1e-3 * std::abs(ab)) failed.push_back("scattered-field reciprocity");
    }

    // block partition of an assembled system
    {
        bem2d::AssemblyOptions o;
        o.hmat = {2.0, 16, 1e-5, true};
        bem2d::BoundarySystem sys(bem2d::circle_mesh(Vec2(0, 0), 20.0, 600, Interface::dielectric), bem2d::Media(0.2, 2.0), o);
        const auto n = static_cast<std::size_t>(sys.size());
        std::vector<unsigned char> cover(n * n, 0);
        sys.hmatrix().root().for_each_leaf([&](const hmat::BlockNode& b) {
            for (Index i = b.row_begin; i < b.row_begin + b.row_size; ++i)
                for (Index j = b.col_begin; j < b.col_begin + b.col_size; ++j)
                    ++cover[static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)];
        });
        if (!std::all_of(cover.begin(), cover.end(), [](unsigned char c) { return c == 1; }))
            failed.push_back("block partition");
    }
    const double t = since(t0);
    if (t >= 60.0) failed.push_back(fmt("took %.0fs", t));

    // module suites, each a separate test binary
    int suites_failed = 0;
    for (const auto& s : g_suites) {
        const int rc = std::system((s + " --gtest_brief=1 >/dev/null 2>&1").c_str());
        if (rc != 0) {
            ++suites_failed;
            failed.push_back("suite " + s.substr(s.find_last_of('/') + 1));
        }
    }

    std::string detail = fmt("zero contrast %.1e (limit 1e-6), reciprocity and partition checks %.1fs", zc, t);
    if (!g_suites.empty()) detail += fmt(", %zu/%zu module suites pass", g_suites.size() - suites_failed, g_suites.size());
    for (const auto& f : failed) detail += "; failed: " + f;
    return {failed.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    std::string report;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--suite" && i + 1 < argc)
            g_suites.push_back(argv[++i]);
        else if (a == "--report" && i + 1 < argc)
            report = argv[++i];
        else
            only.insert(std::atoi(a.c_str()));
    }
    const std::vector<std::pair<const char*, std::function<Result()>>> criteria{
        {"oracle equivalence", oracle},        {"H-matrix fidelity", fidelity},
        {"H-LU scaling", scaling},             {"contrast robustness", contrast},
        {"topological derivative", finite_difference}, {"ACA properties", aca_suite},
        {"optimization outcome", optimization}, {"invariant suites", invariants}};
    int passed = 0, run = 0, broken = 0;
    std::vector<std::string> lines;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        std::printf("criterion %d: %s\n", id, criteria[i].first);
        std::fflush(stdout);
        Result r;
        try {
            r = criteria[i].second();
        } catch (const std::exception& e) {
            r = {false, std::string("error: ") + e.what()};
            ++broken;
        }
        ++run;
        passed += r.pass;
        lines.push_back(fmt("[%s] %d %s: %s", r.pass ? "PASS" : "FAIL", id, criteria[i].first, r.detail.c_str()));
        std::printf("%s\n", lines.back().c_str());
        std::fflush(stdout);
    }
    std::printf("\nsummary\n");
    for (const auto& l : lines) std::printf("%s\n", l.c_str());
    std::printf("%d/%d criteria pass\n", passed, run);
    if (!report.empty()) {
        if (std::FILE* f = std::fopen(report.c_str(), "w")) {
            for (const auto& l : lines) std::fprintf(f, "%s\n", l.c_str());
            std::fprintf(f, "%d/%d criteria pass\n", passed, run);
            std::fclose(f);
        }
    }
    return broken ? 1 : 0;
}

#pragma once

// Analytic cylinder checks and single-configuration scattering.

#include "cloakforge/bem2d/field.hpp"
#include "cloakforge/bem2d/mie.hpp"
#include "cloakforge/cli/outputs.hpp"

namespace cloakforge::cli {

struct OracleRow {
    bem2d::CylinderKind kind;
    std::size_t n = 0;
    double rel_l2 = 0.0;  // total field on the probe ring
};

inline std::vector<Vec2> probe_ring(double r, int n) {
    std::vector<Vec2> p;
    for (int i = 0; i < n; ++i) {
        const double a = 2.0 * pi * (i + 0.25) / n;
        p.emplace_back(r * std::cos(a), r * std::sin(a));
    }
    return p;
}

/// BEM total field on a ring of radius `probe_radius` against the series
/// solution for a centred cylinder of radius `radius`.
inline OracleRow oracle_error(bem2d::CylinderKind kind, double radius, std::size_t n, const bem2d::Media& media,
                              double probe_radius = 20.0, int probes = 64,
                              bem2d::Backend backend = bem2d::Backend::dense) {
    using namespace bem2d;
    const auto tag = kind == CylinderKind::pec ? Interface::pec : Interface::dielectric;
    AssemblyOptions o;
    o.backend = backend;
    BoundarySystem sys(circle_mesh(Vec2::Zero(), radius, n, tag), media, o);
    const double k1 = media.k1();
    auto inc = [k1](const Vec2& x) { return incident_plane(x, Vec2::UnitX(), k1); };
    const CVector b = build_rhs(sys.mesh(), sys.dofs(), media, [&](const Vec2& x) {
        const auto f = inc(x);
        return std::make_pair(f.u, f.grad);
    });
    const auto sol = sys.solve_boundary({b})[0];
    const auto pts = probe_ring(probe_radius, probes);
    const auto f = eval_field(sys, sol, pts, Region::outer, false, inc);
    const CVector ref = mie_reference(kind, radius, media, pts);
    return {kind, n, (f.u - ref).norm() / ref.norm()};
}

inline std::vector<OracleRow> validate_oracle(const OptConfig& cfg, const std::vector<std::size_t>& sizes = {150, 300, 600}) {
    std::vector<OracleRow> rows;
    for (std::size_t n : sizes) rows.push_back(oracle_error(bem2d::CylinderKind::pec, cfg.pec_radius, n, {cfg.omega, 1.0}));
    for (std::size_t n : sizes)
        rows.push_back(oracle_error(bem2d::CylinderKind::dielectric, cfg.pec_radius, n, cfg.media()));
    return rows;
}

inline std::string oracle_csv(const std::vector<OracleRow>& rows) {
    std::string s = "kind,N,rel_l2\n";
    for (const auto& r : rows)
        s += std::string(r.kind == bem2d::CylinderKind::pec ? "pec" : "dielectric") + "," + std::to_string(r.n) + "," +
             format17(r.rel_l2) + "\n";
    return s;
}

/// Forward solve of one configuration: the fixed scatterers plus the design
/// given by `phi` (none if it has no values).
inline sens::ObjectiveTerms scatter_once(const OptConfig& cfg, const levelset::LevelSetGrid& phi, const fs::path& out) {
    cfg.validate();
    const auto scene = optim::make_scene(cfg);
    const auto mesh = phi.values.empty() ? optim::fixed_mesh(cfg) : optim::design_mesh(cfg, phi);
    sens::Analysis an(mesh, scene);
    const auto terms = an.forward();
    std::error_code ec;
    fs::create_directories(out, ec);
    auto put = [&](const std::string& name, const std::string& text) {
        std::ofstream os(out / name);
        os << text;
        if (!os) throw OutputError((out / name).string() + ": write failed");
    };
    put("config.txt", "# mode = scatter-once\n" + serialize(cfg));
    std::ostringstream m;
    bem2d::write_mesh(m, mesh);
    put("mesh_0000.txt", m.str());
    if (!phi.values.empty()) {
        std::ostringstream g;
        levelset::write_grid(g, phi);
        put("levelset_0000.txt", g.str());
    }
    put("field_0000.csv", field_csv(scene.objective, an.u_outer(), an.u_inner()));
    put("summary.txt", "J = " + format17(terms.total()) + "\nJ_outer = " + format17(terms.outer) +
                           "\nJ_inner = " + format17(terms.inner) + "\nelements = " + std::to_string(mesh.size()) + "\n");
    return terms;
}

}  // namespace cloakforge::cli

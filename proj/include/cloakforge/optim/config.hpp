#pragma once

// Optimization problem setup: media, design domain, PEC, observation
// layouts, reaction-diffusion and convergence parameters.

#include "cloakforge/levelset/contour.hpp"
#include "cloakforge/sens/pipeline.hpp"

namespace cloakforge::optim {

using sens::Variant;

struct OptConfig {
    Variant variant = Variant::conventional;

    // media (vacuum eps1 = mu1 = 1)
    double omega = 0.2;
    double eps2 = 2.0;
    double mu2 = 1.0;
    double direction = 0.0;  // incident angle in radians

    // design domain [x0, x0 + size]^2 sampled by a lattice x lattice grid
    Vec2 domain_origin{0.0, 0.0};
    double domain_size = 100.0;
    std::size_t lattice = 51;
    double element_length = 1.5;  // target boundary element length

    // PEC (conventional variant)
    Vec2 pec_center{50.0, 50.0};
    double pec_radius = 10.0;
    double keepout_margin = 3.0;  // vacuum band around the PEC and the inner disc

    // observation points: a frame of lattice points around D, and a disc
    // at the centre of D (modified variant)
    double obs_spacing = 5.0;
    double obs_gap = 5.0;
    double obs_width = 10.0;
    double inner_radius = 12.0;
    double inner_spacing = 1.0;

    // reaction-diffusion update
    double tau = 5e-3;
    double kappa = 10.0;  // C = kappa / max |T0| of the bootstrap field
    double dt = 0.01;          // initial and largest pseudo-time step
    bool adaptive_dt = true;   // halve dt and retry when J increases
    double dt_min = 1e-3;
    double dt_growth = 1.25;   // after an accepted step
    double init_radius = 50.0;
    double init_smoothing = 1.0;

    // convergence
    double conv_eps1 = 1e-4;
    double conv_eps2 = 1.05;
    std::size_t window = 50;
    std::size_t max_iterations = 300;
    std::size_t snapshot_every = 10;
    double stop_below = 0.0;  // stop once J / J_reference <= this (0: off)

    // linear algebra
    bem2d::Backend backend = bem2d::Backend::hmatrix;
    bem2d::HMatrixOptions hmat;
    bem2d::HMatrixOptions field_hmat{2.0, 64, 1e-5, true};  // lattice field evaluation
    unsigned workers = 1;

    bool zero_td = false;  // debug: reaction off, diffusion only

    bem2d::Media media() const { return {omega, eps2, mu2}; }
    double wavelength() const { return 2.0 * pi / omega; }
    Vec2 domain_center() const { return domain_origin + 0.5 * domain_size * Vec2(1.0, 1.0); }

    levelset::Lattice design_lattice() const {
        return {lattice, lattice, domain_size / static_cast<double>(lattice - 1), domain_origin};
    }

    void validate() const {
        media().validate();
        auto need = [](bool ok, const char* msg) {
            if (!ok) throw ConfigError(msg);
        };
        need(domain_size > 0.0, "domain_size must be positive");
        need(lattice >= 3, "lattice must be at least 3");
        need(element_length > 0.0, "element_length must be positive");
        need(tau >= 0.0, "tau must be non-negative");
        need(kappa >= 0.0, "kappa must be non-negative");
        need(dt > 0.0, "dt must be positive");
        need(dt_min > 0.0 && dt_min <= dt, "dt_min must be in (0, dt]");
        need(dt_growth >= 1.0, "dt_growth must be at least 1");
        need(window >= 2, "window must be at least 2");
        need(conv_eps1 > 0.0 && conv_eps2 > 0.0, "convergence tolerances must be positive");
        need(obs_spacing > 0.0 && obs_width > 0.0 && obs_gap > 0.0, "observation layout must be positive");
        need(variant == Variant::conventional || (inner_radius > 0.0 && inner_spacing > 0.0),
             "inner observation disc must be positive");
        need(variant == Variant::modified || pec_radius > 0.0, "pec_radius must be positive");
        for (const auto* h : {&hmat, &field_hmat})
            need(h->eta > 0.0 && h->n_min >= 1 && h->tol > 0.0, "H-matrix parameters must be positive");
        need(snapshot_every >= 1, "snapshot_every must be at least 1");
        need(stop_below >= 0.0, "stop_below must be non-negative");
    }
};

/// Lattice points with spacing s in the frame between the square D grown
/// by `gap` and grown by `gap + width`.
inline std::vector<Vec2> frame_points(const OptConfig& c) {
    const Vec2 lo = c.domain_origin - Vec2::Constant(c.obs_gap + c.obs_width);
    const double side = c.domain_size + 2.0 * (c.obs_gap + c.obs_width);
    const auto n = static_cast<std::size_t>(std::floor(side / c.obs_spacing + 1e-9)) + 1;
    const double inner_lo = -c.obs_gap, inner_hi = c.domain_size + c.obs_gap;
    std::vector<Vec2> out;
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2 p = lo + c.obs_spacing * Vec2(static_cast<double>(i), static_cast<double>(j));
            const Vec2 r = p - c.domain_origin;
            const bool inside = r.x() > inner_lo + 1e-9 && r.x() < inner_hi - 1e-9 && r.y() > inner_lo + 1e-9 &&
                                r.y() < inner_hi - 1e-9;
            if (!inside) out.push_back(p);
        }
    return out;
}

/// Lattice points with spacing `inner_spacing` strictly inside the disc at
/// the centre of D.
inline std::vector<Vec2> disc_points(const OptConfig& c) {
    const Vec2 o = c.domain_center();
    const auto m = static_cast<long>(std::floor(c.inner_radius / c.inner_spacing + 1e-9));
    std::vector<Vec2> out;
    for (long j = -m; j <= m; ++j)
        for (long i = -m; i <= m; ++i) {
            const Vec2 d = c.inner_spacing * Vec2(static_cast<double>(i), static_cast<double>(j));
            if (d.norm() < c.inner_radius - 1e-9) out.push_back(o + d);
        }
    return out;
}

inline sens::Scene make_scene(const OptConfig& c) {
    sens::Scene s;
    s.media = c.media();
    s.direction = Vec2(std::cos(c.direction), std::sin(c.direction));
    s.objective.variant = c.variant;
    s.objective.outer = frame_points(c);
    if (c.variant == Variant::modified) s.objective.inner = disc_points(c);
    s.assembly.backend = c.backend;
    s.assembly.hmat = c.hmat;
    s.assembly.workers = c.workers;
    s.field_backend = c.backend;
    s.field_hmat = c.field_hmat;
    return s;
}

/// The fixed part of every mesh: the PEC circle (conventional variant).
inline bem2d::BoundaryMesh fixed_mesh(const OptConfig& c) {
    bem2d::BoundaryMesh m;
    if (c.variant == Variant::conventional) {
        const auto n = std::max<std::size_t>(
            16, static_cast<std::size_t>(std::llround(2.0 * pi * c.pec_radius / c.element_length)));
        m.add_circle(c.pec_center, c.pec_radius, n, bem2d::Interface::pec);
    }
    return m;
}

inline levelset::KeepOut keep_out(const OptConfig& c) {
    const auto l = c.design_lattice();
    levelset::KeepOut k;
    k.mask.assign(l.size(), 0);
    if (c.variant == Variant::conventional) k.add_disc(l, c.pec_center, c.pec_radius + c.keepout_margin);
    if (c.variant == Variant::modified) k.add_disc(l, c.domain_center(), c.inner_radius + c.keepout_margin);
    return k;
}

/// PEC plus the regularized zero contour of phi.
inline bem2d::BoundaryMesh design_mesh(const OptConfig& c, const levelset::LevelSetGrid& phi) {
    bem2d::BoundaryMesh m = fixed_mesh(c);
    const auto d = levelset::regularize_mesh(levelset::extract_boundary(phi), c.element_length);
    const std::size_t base = m.nodes.size();
    m.nodes.insert(m.nodes.end(), d.nodes.begin(), d.nodes.end());
    for (auto s : d.segments) m.segments.push_back({base + s.n0, base + s.n1, s.tag});
    return m;
}

}  // namespace cloakforge::optim

#pragma once

// Run directory layout:
//   config.txt            exact configuration used
//   history.csv           one row per analysed configuration
//   levelset_####.txt     analysed level set (grid format)
//   mesh_####.txt         boundary mesh
//   field_####.csv        total field at the observation points
//   td_####.txt           topological derivative (accepted steps only)
//   checkpoint.json       driver state for --resume
//   summary.txt           final normalized objective

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "cloakforge/cli/config_io.hpp"
#include "cloakforge/optim/driver.hpp"

namespace cloakforge::cli {

namespace fs = std::filesystem;
using optim::OptState;

class OutputError : public Error {
public:
    using Error::Error;
};

inline std::string step_name(const char* stem, std::size_t step, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%04zu.%s", stem, step, ext);
    return buf;
}

inline std::string fixed6(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 6);
    return std::string(buf, r.ptr);
}

inline const char* history_header = "step,J,J_normalized,t_assemble,t_factor,t_solve,t_field,t_td\n";

inline std::string history_row(const OptState& s, std::size_t k) {
    const double j = s.history[k];
    const double jn = s.j_reference > 0.0 ? j / s.j_reference : 0.0;
    const auto& t = s.timings[k];
    std::string r = std::to_string(k);
    for (double v : {j, jn, t.assemble, t.factor, t.solve, t.field, t.td}) r += "," + fixed6(v);
    return r + "\n";
}

/// Total field at the observation points: x,y,set,re,im with 17 significant digits.
inline std::string field_csv(const sens::ObjectiveSpec& spec, const CVector& outer, const CVector& inner) {
    std::string s = "x,y,set,re,im\n";
    auto rows = [&](const std::vector<Vec2>& pts, const CVector& u, const char* set) {
        for (std::size_t p = 0; p < pts.size() && static_cast<Index>(p) < u.size(); ++p) {
            const Complex v = u[static_cast<Index>(p)];
            s += format17(pts[p].x()) + "," + format17(pts[p].y()) + "," + set + "," + format17(v.real()) + "," +
                 format17(v.imag()) + "\n";
        }
    };
    rows(spec.outer, outer, "outer");
    rows(spec.inner, inner, "inner");
    return s;
}

// ---------------------------------------------------------------------------
// Checkpoint

namespace detail {

using nlohmann::json;

inline json grid_json(const levelset::GridValues& g) {
    const auto& l = g.lattice;
    return {{"nx", l.nx}, {"ny", l.ny}, {"h", l.h}, {"origin", {l.origin.x(), l.origin.y()}}, {"values", g.values}};
}

template <class Grid>
Grid grid_from(const json& j) {
    levelset::Lattice l;
    l.nx = j.at("nx").get<std::size_t>();
    l.ny = j.at("ny").get<std::size_t>();
    l.h = j.at("h").get<double>();
    l.origin = Vec2(j.at("origin").at(0).get<double>(), j.at("origin").at(1).get<double>());
    Grid g(l, 0.0);
    g.values = j.at("values").get<std::vector<double>>();
    if (g.values.size() != l.size()) throw ConfigError("checkpoint: grid value count mismatch");
    return g;
}

}  // namespace detail

inline nlohmann::json checkpoint_json(const OptState& s) {
    using detail::json;
    json t = json::array(), terms = json::array();
    for (const auto& x : s.timings) t.push_back({x.assemble, x.factor, x.solve, x.field, x.td, x.wall});
    for (const auto& x : s.terms) terms.push_back({x.outer, x.inner});
    json j{{"iteration", s.iteration},
           {"phi", detail::grid_json(s.phi)},
           {"history", s.history},
           {"timings", t},
           {"terms", terms},
           {"accepted", std::vector<int>(s.accepted.begin(), s.accepted.end())},
           {"j_reference", s.j_reference},
           {"reference_terms", {s.reference_terms.outer, s.reference_terms.inner}},
           {"reaction_scale", s.reaction_scale},
           {"dt", s.dt},
           {"factorizations", s.factorizations},
           {"converged", s.converged},
           {"reached_target", s.reached_target},
           {"has_base", s.has_base},
           {"base_j", s.base_j}};
    if (s.has_base) {
        j["base_phi"] = detail::grid_json(s.base_phi);
        j["base_td"] = detail::grid_json(s.base_td);
    }
    return j;
}

inline OptState state_from_json(const nlohmann::json& j) {
    OptState s;
    try {
        s.iteration = j.at("iteration").get<std::size_t>();
        s.phi = detail::grid_from<levelset::LevelSetGrid>(j.at("phi"));
        s.history = j.at("history").get<std::vector<double>>();
        for (const auto& x : j.at("timings")) {
            optim::Timings t;
            t.assemble = x.at(0);
            t.factor = x.at(1);
            t.solve = x.at(2);
            t.field = x.at(3);
            t.td = x.at(4);
            t.wall = x.at(5);
            s.timings.push_back(t);
        }
        for (const auto& x : j.at("terms")) s.terms.push_back({x.at(0).get<double>(), x.at(1).get<double>()});
        for (int a : j.at("accepted").get<std::vector<int>>()) s.accepted.push_back(static_cast<char>(a));
        s.j_reference = j.at("j_reference");
        s.reference_terms = {j.at("reference_terms").at(0).get<double>(), j.at("reference_terms").at(1).get<double>()};
        s.reaction_scale = j.at("reaction_scale");
        s.dt = j.at("dt");
        s.factorizations = j.at("factorizations");
        s.converged = j.at("converged");
        s.reached_target = j.at("reached_target");
        s.has_base = j.at("has_base");
        s.base_j = j.at("base_j");
        if (s.has_base) {
            s.base_phi = detail::grid_from<levelset::LevelSetGrid>(j.at("base_phi"));
            s.base_td = detail::grid_from<levelset::TDField>(j.at("base_td"));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("checkpoint: ") + e.what());
    }
    const std::size_t n = s.iteration;
    if (s.history.size() != n || s.timings.size() != n || s.terms.size() != n || s.accepted.size() != n)
        throw ConfigError("checkpoint: history length does not match the iteration count");
    return s;
}

inline OptState load_checkpoint(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("checkpoint: cannot open " + path.string());
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("checkpoint " + path.string() + ": " + e.what());
    }
    return state_from_json(j);
}

// ---------------------------------------------------------------------------
// Writer

/// Observer that writes the run directory while the driver runs.
class RunWriter {
public:
    RunWriter(fs::path dir, const OptConfig& cfg, const RunManifest& manifest)
        : dir_(std::move(dir)), cfg_(cfg), spec_(optim::make_scene(cfg).objective) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec || !fs::is_directory(dir_)) throw OutputError(dir_.string() + ": cannot create output directory");
        write("config.txt", "# mode = " + std::string(to_string(manifest.mode)) + "\n" + serialize(cfg, manifest));
    }

    const fs::path& directory() const { return dir_; }

    /// Rewrites history.csv from the state (header only when it is empty).
    void begin(const OptState& s) {
        std::string h = history_header;
        for (std::size_t k = 0; k < s.history.size(); ++k) h += history_row(s, k);
        write("history.csv", h);
    }

    void operator()(const optim::StepRecord& r) {
        append("history.csv", history_row(r.state, r.step), r.step);
        last_ = Snapshot{r.step, r.phi, r.mesh, field_csv(spec_, r.analysis.u_outer(), r.analysis.u_inner()),
                         r.td ? std::optional<levelset::TDField>(*r.td) : std::nullopt};
        if (r.step % cfg_.snapshot_every == 0) {
            write_snapshot(*last_);
            write_checkpoint(r.state, r.step);
        }
    }

    /// Final snapshot, checkpoint and summary.
    void finish(const OptState& s) {
        if (last_ && last_->step % cfg_.snapshot_every != 0) write_snapshot(*last_);
        write_checkpoint(s, s.iteration);
        const double jn = s.history.empty() || !(s.j_reference > 0.0) ? 1.0 : s.history.back() / s.j_reference;
        const double best = s.j_reference > 0.0 ? s.best() / s.j_reference : 1.0;
        std::string t;
        t += "variant = " + std::string(sens::to_string(cfg_.variant)) + "\n";
        t += "steps = " + std::to_string(s.iteration) + "\n";
        t += "converged = " + std::string(s.converged ? "true" : "false") + "\n";
        t += "reached_target = " + std::string(s.reached_target ? "true" : "false") + "\n";
        t += "J_reference = " + format17(s.j_reference) + "\n";
        t += "J_final = " + format17(s.history.empty() ? s.j_reference : s.history.back()) + "\n";
        t += "J_normalized = " + format17(jn) + "\n";
        t += "J_best_normalized = " + format17(best) + "\n";
        if (cfg_.variant == sens::Variant::modified && !s.terms.empty()) {
            t += "J_outer = " + format17(s.terms.back().outer) + "\n";
            t += "J_inner = " + format17(s.terms.back().inner) + "\n";
        }
        write("summary.txt", t);
    }

private:
    struct Snapshot {
        std::size_t step;
        levelset::LevelSetGrid phi;
        bem2d::BoundaryMesh mesh;
        std::string field;
        std::optional<levelset::TDField> td;
    };

    void write_snapshot(const Snapshot& s) {
        std::ostringstream g, m;
        levelset::write_grid(g, s.phi);
        write(step_name("levelset", s.step, "txt"), g.str(), s.step);
        bem2d::write_mesh(m, s.mesh);
        write(step_name("mesh", s.step, "txt"), m.str(), s.step);
        write(step_name("field", s.step, "csv"), s.field, s.step);
        if (s.td) {
            std::ostringstream t;
            levelset::write_grid(t, *s.td);
            write(step_name("td", s.step, "txt"), t.str(), s.step);
        }
    }

    void write_checkpoint(const OptState& s, std::size_t step) {
        write("checkpoint.json", checkpoint_json(s).dump() + "\n", step);
    }

    void write(const std::string& name, const std::string& text, std::optional<std::size_t> step = {}) {
        put(name, text, std::ios::trunc, step);
    }
    void append(const std::string& name, const std::string& text, std::size_t step) {
        put(name, text, std::ios::app, step);
    }
    void put(const std::string& name, const std::string& text, std::ios::openmode mode,
             std::optional<std::size_t> step) const {
        const fs::path p = dir_ / name;
        std::ofstream os(p, std::ios::out | mode);
        os << text;
        os.flush();
        if (!os)
            throw OutputError(p.string() + ": write failed" + (step ? " at step " + std::to_string(*step) : ""));
    }

    fs::path dir_;
    OptConfig cfg_;
    sens::ObjectiveSpec spec_;
    std::optional<Snapshot> last_;
};

}  // namespace cloakforge::cli

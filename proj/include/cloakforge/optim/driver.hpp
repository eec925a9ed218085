#pragma once

// Level-set topology optimization loop: mesh the zero contour, solve the
// forward and adjoint problems on one factorization, check convergence,
// evaluate the topological derivative and advance the reaction-diffusion
// equation.

#include <functional>
#include <iostream>
#include <span>

#include "cloakforge/levelset/contour.hpp"
#include "cloakforge/optim/config.hpp"

namespace cloakforge::optim {

struct ConvergenceCheck {
    bool converged = false;
    bool degenerate = false;  // some J <= 0 in the window
    double slope = 0.0;
    double ratio = 0.0;
};

/// Least-squares slope of log J over the window and the largest ratio
/// between any two of its values.
inline ConvergenceCheck convergence(std::span<const double> window, double eps1, double eps2) {
    if (window.size() < 2) throw Error("check_convergence: window needs at least 2 values");
    ConvergenceCheck c;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (double j : window) {
        if (!(j > 0.0)) {
            c.converged = c.degenerate = true;
            return c;
        }
        lo = std::min(lo, j);
        hi = std::max(hi, j);
    }
    const auto n = static_cast<double>(window.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < window.size(); ++i) {
        const double x = static_cast<double>(i), y = std::log(window[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    c.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    c.ratio = hi / lo;
    c.converged = c.slope <= eps1 && c.ratio <= eps2;
    return c;
}

inline bool check_convergence(std::span<const double> window, double eps1, double eps2) {
    const auto c = convergence(window, eps1, eps2);
    if (c.degenerate) std::clog << "warning: non-positive objective in the convergence window\n";
    return c.converged;
}

struct Timings {
    double assemble = 0.0;  // mesh generation and system assembly
    double factor = 0.0;
    double solve = 0.0;
    double field = 0.0;  // observation and lattice field evaluation
    double td = 0.0;     // topological derivative and level-set update
    double wall = 0.0;   // measured step wall-clock
    double total() const { return assemble + factor + solve + field + td; }
};

struct OptState {
    std::size_t iteration = 0;  // configurations analysed so far
    levelset::LevelSetGrid phi;  // next level set to analyse
    std::vector<double> history;
    std::vector<Timings> timings;
    std::vector<sens::ObjectiveTerms> terms;
    std::vector<char> accepted;
    double j_reference = 0.0;  // PEC only (conventional) or empty domain (modified)
    sens::ObjectiveTerms reference_terms;
    double reaction_scale = 0.0;  // C, fixed by the bootstrap field
    double dt = 0.0;              // current pseudo-time step
    std::size_t factorizations = 0;
    bool converged = false;
    bool reached_target = false;  // J / J_reference <= stop_below

    // Last accepted configuration and its topological derivative, the base
    // of a retried update.
    bool has_base = false;
    levelset::LevelSetGrid base_phi;
    levelset::TDField base_td;
    double base_j = 0.0;

    /// Objective of the last accepted configuration.
    double best() const { return has_base ? base_j : (history.empty() ? j_reference : history.back()); }
};

/// Everything known about one step, for output.
struct StepRecord {
    const OptState& state;
    std::size_t step;
    const levelset::LevelSetGrid& phi;  // level set that was analysed
    const bem2d::BoundaryMesh& mesh;
    const levelset::TDField* td;  // its topological derivative; null if rejected or final
    bool accepted;
    sens::Analysis& analysis;
};

using StepObserver = std::function<void(const StepRecord&)>;

/// Solver failure during the loop; `state` holds everything up to the
/// failing step so the run can be resumed.
class OptimizationError : public SolverError {
public:
    OptimizationError(std::size_t step, OptState s, const std::string& what)
        : SolverError("step " + std::to_string(step) + ": " + what), step_(step), state_(std::move(s)) {}
    std::size_t step() const { return step_; }
    const OptState& state() const { return state_; }

private:
    std::size_t step_;
    OptState state_;
};

/// Bootstrap solve (PEC only, or nothing for the modified variant) and the
/// initial level set from its topological derivative.
inline OptState initial_state(const OptConfig& cfg) {
    cfg.validate();
    const auto scene = make_scene(cfg);
    const auto lattice = cfg.design_lattice();
    const auto ko = keep_out(cfg);
    sens::Analysis an(fixed_mesh(cfg), scene);
    OptState st;
    st.reference_terms = an.forward();
    st.j_reference = st.reference_terms.total();
    auto td0 = an.topological_derivative(lattice, ko);
    if (cfg.zero_td) td0.values.assign(td0.values.size(), 0.0);
    ko.apply(td0);
    double tmax = 0.0;
    for (double v : td0.values) tmax = std::max(tmax, std::abs(v));
    st.reaction_scale = tmax > 0.0 ? cfg.kappa / tmax : 0.0;
    st.dt = cfg.dt;
    // Masked points carry T = 0 and would otherwise count as material.
    st.phi = levelset::init_from_td(td0, cfg.domain_center(), cfg.init_radius, cfg.init_smoothing);
    ko.apply(st.phi);
    return st;
}

/// Runs (or resumes from `state`) until convergence or max_iterations
/// analysed configurations (or until J / J_reference <= stop_below). Unless
/// the run stopped on one of those two, `phi` of the result is the next level
/// set to analyse.
inline OptState run_optimization(const OptConfig& cfg, OptState state, const StepObserver& observer = {}) {
    cfg.validate();
    const auto scene = make_scene(cfg);
    const auto lattice = cfg.design_lattice();
    if (!(state.phi.lattice == lattice)) throw ConfigError("resume: level set lattice does not match the config");
    const auto ko = keep_out(cfg);
    const double l = cfg.domain_size;

    while (state.iteration < cfg.max_iterations && !state.converged && !state.reached_target) {
        const std::size_t step = state.iteration;
        sens::detail::Stopwatch wall, sw;
        sens::StepTimings st;
        Timings t;
        try {
            const auto mesh = design_mesh(cfg, state.phi);
            t.assemble += sw.lap();
            sens::Analysis an(mesh, scene, &st);
            const auto terms = an.forward();
            const double j = terms.total();
            state.history.push_back(j);
            state.terms.push_back(terms);
            state.factorizations += an.factorization_count();
            ++state.iteration;
            // A step that raises J is retried from the last accepted level
            // set with half the pseudo-time step.
            const bool accept = !cfg.adaptive_dt || !state.has_base || j <= state.base_j ||
                                state.dt <= cfg.dt_min * (1.0 + 1e-12);
            state.accepted.push_back(accept);
            if (state.history.size() >= cfg.window) {
                const std::span<const double> w(state.history.data() + state.history.size() - cfg.window, cfg.window);
                state.converged = check_convergence(w, cfg.conv_eps1, cfg.conv_eps2);
            }
            state.reached_target = cfg.stop_below > 0.0 && j <= cfg.stop_below * state.j_reference;
            sw.lap();
            const levelset::LevelSetGrid analysed = state.phi;
            const levelset::TDField* td_out = nullptr;
            if (!state.converged && !state.reached_target) {
                if (accept) {
                    state.base_td = an.topological_derivative(lattice, ko);
                    sw.lap();
                    if (cfg.zero_td) state.base_td.values.assign(state.base_td.values.size(), 0.0);
                    state.base_phi = state.phi;
                    state.base_j = j;
                    state.has_base = true;
                    td_out = &state.base_td;
                    if (cfg.adaptive_dt && state.iteration > 1) state.dt = std::min(cfg.dt, state.dt * cfg.dt_growth);
                } else {
                    state.dt = std::max(cfg.dt_min, 0.5 * state.dt);
                }
                levelset::RDParams rd;
                rd.C = state.reaction_scale;
                rd.tau = cfg.tau;
                rd.l = l;
                rd.dt = state.dt;
                state.phi = levelset::rd_update(state.base_phi, state.base_td, rd);
                ko.apply(state.phi);
                t.td += sw.lap();
            }
            t.assemble += st.assemble;
            t.factor += st.factor;
            t.solve += st.solve;
            t.field += st.field;
            t.td += st.td;
            t.wall = wall.lap();
            state.timings.push_back(t);
            if (observer) observer(StepRecord{state, step, analysed, mesh, td_out, accept, an});
        } catch (const OptimizationError&) {
            throw;
        } catch (const Error& e) {
            // Roll back the partial step.
            state.history.resize(step);
            state.terms.resize(step);
            state.accepted.resize(step);
            state.timings.resize(step);
            state.iteration = step;
            state.converged = false;
            throw OptimizationError(step, std::move(state), e.what());
        }
    }
    return state;
}

inline OptState run_optimization(const OptConfig& cfg, const StepObserver& observer = {}) {
    return run_optimization(cfg, initial_state(cfg), observer);
}

}  // namespace cloakforge::optim

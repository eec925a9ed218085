// cloakforge <mode> --config <path> --out <dir> [--preset <name>] [--workers n] [--print-defaults]
//
// Exit codes: 0 success, 2 configuration error, 3 solver error.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cloakforge/cli/benchmark.hpp"
#include "cloakforge/cli/oracle.hpp"
#include "cloakforge/cli/outputs.hpp"

using namespace cloakforge;
using namespace cloakforge::cli;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

int optimize(const ParsedConfig& pc, const fs::path& out, bool resume) {
    const auto& cfg = pc.config;
    RunWriter writer(out, cfg, pc.manifest);
    OptState state = resume ? load_checkpoint(out / "checkpoint.json") : optim::initial_state(cfg);
    if (resume) std::printf("resuming at step %zu\n", state.iteration);
    std::printf("J_reference %.6g\n", state.j_reference);
    writer.begin(state);
    auto observer = [&](const optim::StepRecord& r) {
        writer(r);
        const double jn = r.state.j_reference > 0.0 ? r.state.history.back() / r.state.j_reference : 0.0;
        std::printf("step %4zu  J/Jref %.5f  elements %5zu  dt %.3g%s  %.2fs\n", r.step, jn, r.mesh.size(),
                    r.state.dt, r.accepted ? "" : "  (rejected)", r.state.timings.back().wall);
        std::fflush(stdout);
    };
    try {
        state = optim::run_optimization(cfg, std::move(state), observer);
    } catch (const optim::OptimizationError& e) {
        // Keep what was computed so the run can be resumed.
        writer.finish(e.state());
        throw;
    }
    writer.finish(state);
    std::printf("done: %zu steps, J/Jref %.6g%s\n", state.iteration,
                state.history.empty() ? 1.0 : state.history.back() / state.j_reference,
                state.converged ? " (converged)" : state.reached_target ? " (target reached)" : "");
    return 0;
}

int benchmark(const ParsedConfig& pc, const fs::path& out, bool with_9600, bool no_dense) {
    BenchmarkOptions bo;
    bo.omega = pc.config.omega;
    bo.eps2 = pc.config.eps2;
    bo.hmat = pc.config.hmat;
    bo.workers = pc.config.workers;
    bo.include_9600 = with_9600;
    if (no_dense) bo.dense_upto = 0;
    fs::create_directories(out);
    std::ofstream(out / "config.txt") << "# mode = benchmark\n" << serialize(pc.config, pc.manifest);
    const auto rows = run_benchmark(bo, [](const BenchmarkRow& r) {
        std::printf("N %5zu  assemble %.3fs  H-LU %.3fs  solve %.3fs  matvec %.3fs", r.n, r.t_assemble, r.t_hlu,
                    r.t_solve, r.t_matvec);
        if (r.has_dense) std::printf("  dense LU %.3fs  rel diff %.2e", r.t_dense_lu, r.rel_diff);
        std::printf("\n");
        std::fflush(stdout);
    });
    std::ofstream(out / "timing.csv") << timing_csv(rows);
    std::ofstream(out / "timing_dense.csv") << dense_csv(rows);
    for (const auto& r : rows)
        if (r.has_dense && r.rhs_checksum != r.dense_rhs_checksum) throw SolverError("benchmark: rhs checksum mismatch");
    return 0;
}

int oracle(const ParsedConfig& pc, const fs::path& out) {
    fs::create_directories(out);
    std::ofstream(out / "config.txt") << "# mode = validate-oracle\n" << serialize(pc.config, pc.manifest);
    const auto rows = validate_oracle(pc.config);
    std::ofstream(out / "oracle.csv") << oracle_csv(rows);
    bool ok = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const bool dec = i % 3 == 0 || rows[i].rel_l2 < rows[i - 1].rel_l2;
        ok = ok && dec;
        std::printf("%-10s N %4zu  rel L2 %.3e\n", rows[i].kind == bem2d::CylinderKind::pec ? "pec" : "dielectric",
                    rows[i].n, rows[i].rel_l2);
    }
    ok = ok && rows[2].rel_l2 <= 0.01;
    std::printf("%s\n", ok ? "oracle: PASS" : "oracle: FAIL");
    return ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Level-set topology optimization of 2D dielectric cloaks"};
    std::string mode_name, config_path, preset_name, out_dir = "out", levelset_path;
    unsigned workers = 0;
    bool defaults = false, resume = false, with_9600 = false, no_dense = false;
    app.add_option("mode", mode_name, "optimize | scatter-once | benchmark | validate-oracle");
    app.add_option("--config", config_path, "key = value configuration file");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--preset", preset_name, "conventional-eps2 | conventional-eps5 | modified-eps2 | modified-eps5");
    app.add_option("--workers", workers, "assembly threads (overrides the config)");
    app.add_flag("--print-defaults", defaults, "print every key with its default and valid range");
    app.add_flag("--resume", resume, "optimize: continue from <out>/checkpoint.json");
    app.add_option("--levelset", levelset_path, "scatter-once: level set file to analyse");
    app.add_flag("--with-9600", with_9600, "benchmark: add N = 9600");
    app.add_flag("--no-dense", no_dense, "benchmark: skip the dense baseline");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        const OptConfig base = preset_name.empty() ? OptConfig{} : preset(preset_name);
        if (defaults) {
            std::cout << print_defaults(base);
            return 0;
        }
        if (mode_name.empty()) throw ConfigError("missing mode (optimize, scatter-once, benchmark, validate-oracle)");
        RunManifest m;
        m.mode = parse_mode(mode_name);
        m.config_path = config_path;
        m.output_dir = out_dir;
        auto pc = parse_config(config_path.empty() ? std::string() : read_file(config_path), base, m);
        if (workers > 0) {
            if (workers > 256) throw ConfigError("workers: value out of range, expected 1 .. 256");
            pc.config.workers = pc.manifest.workers = workers;
        }
        const fs::path out(out_dir);
        switch (pc.manifest.mode) {
            case Mode::optimize: return optimize(pc, out, resume);
            case Mode::benchmark: return benchmark(pc, out, with_9600, no_dense);
            case Mode::validate_oracle: return oracle(pc, out);
            case Mode::scatter_once: {
                levelset::LevelSetGrid phi;
                if (!levelset_path.empty()) {
                    std::ifstream is(levelset_path);
                    if (!is) throw ConfigError("cannot read level set " + levelset_path);
                    phi = levelset::read_grid(is);
                    if (!(phi.lattice == pc.config.design_lattice()))
                        throw ConfigError("level set lattice does not match the config");
                }
                const auto t = scatter_once(pc.config, phi, out);
                std::printf("J %.10g (outer %.10g, inner %.10g)\n", t.total(), t.outer, t.inner);
                return 0;
            }
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}

#include <gtest/gtest.h>

#include <clocale>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cloakforge/cli/benchmark.hpp"
#include "cloakforge/cli/oracle.hpp"
#include "cloakforge/cli/outputs.hpp"

using namespace cloakforge;
using namespace cloakforge::cli;

namespace {

OptConfig small_config() {
    OptConfig c;
    c.lattice = 21;
    c.element_length = 3.0;
    c.max_iterations = 3;
    c.init_smoothing = 0.0;
    return c;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("cloakforge_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    for (std::string l; std::getline(is, l);) out.push_back(l);
    return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string error_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

TEST(Config, PresetWithEmptyFile) {
    const auto pc = parse_config("", preset("conventional-eps2"));
    const auto& c = pc.config;
    EXPECT_EQ(c.variant, sens::Variant::conventional);
    EXPECT_EQ(c.domain_origin, Vec2(0, 0));
    EXPECT_EQ(c.domain_size, 100.0);
    EXPECT_EQ(c.pec_radius, 10.0);
    EXPECT_EQ(c.pec_center, Vec2(50, 50));
    EXPECT_EQ(c.eps2, 2.0);
    EXPECT_EQ(c.tau, 5e-3);
    EXPECT_EQ(preset("conventional-eps5").eps2, 5.0);
    EXPECT_EQ(preset("modified-eps2").variant, sens::Variant::modified);
    EXPECT_EQ(preset("modified-eps5").inner_radius, 12.0);
    EXPECT_THROW(preset("nope"), ConfigError);
}

TEST(Config, FileOverridesPreset) {
    const auto pc = parse_config("eps2 = 3.5  # comment\n\n   # only a comment\nlattice=31\n", preset("modified-eps5"));
    EXPECT_EQ(pc.config.eps2, 3.5);
    EXPECT_EQ(pc.config.lattice, 31u);
    EXPECT_EQ(pc.config.variant, sens::Variant::modified);
}

TEST(Config, NegativeTauNamesKeyAndRange) {
    const auto msg = error_of("tau = -1\n");
    EXPECT_NE(msg.find("tau"), std::string::npos) << msg;
    EXPECT_NE(msg.find(">= 0"), std::string::npos) << msg;
}

TEST(Config, Rejections) {
    EXPECT_NE(error_of("frequency = 1\n").find("frequency"), std::string::npos);
    EXPECT_NE(error_of("omega = 0.2.3\n").find("omega"), std::string::npos);
    EXPECT_NE(error_of("omega = 0,2\n").find("omega"), std::string::npos);
    EXPECT_NE(error_of("omega = nan\n").find("omega"), std::string::npos);
    EXPECT_NE(error_of("lattice = -5\n").find("lattice"), std::string::npos);
    EXPECT_NE(error_of("lattice = 2\n").find("3 .. 1001"), std::string::npos);
    EXPECT_NE(error_of("variant = cloaky\n").find("variant"), std::string::npos);
    EXPECT_NE(error_of("adaptive_dt = maybe\n").find("adaptive_dt"), std::string::npos);
    EXPECT_NE(error_of("omega =\n").find("omega"), std::string::npos);
    EXPECT_NE(error_of("omega 0.3\n").find("line 1"), std::string::npos);
    // cross-key validation
    EXPECT_FALSE(error_of("dt = 0.01\ndt_min = 0.1\n").empty());
}

TEST(Config, RoundTrip) {
    OptConfig c = preset("modified-eps5");
    c.omega = 0.1 + 0.2;
    c.direction = -1.0 / 3.0;
    c.tau = 1e-300;
    c.domain_origin = Vec2(-12.5, 7.0 / 3.0);
    c.lattice = 77;
    c.adaptive_dt = false;
    c.backend = bem2d::Backend::dense;
    c.field_hmat.n_min = 9;
    RunManifest m;
    m.seed = 1234567890123ull;
    const auto text = serialize(c, m);
    const auto back = parse_config(text);
    EXPECT_EQ(serialize(back.config, back.manifest), text);
    EXPECT_EQ(back.config.omega, c.omega);
    EXPECT_EQ(back.config.direction, c.direction);
    EXPECT_EQ(back.config.tau, c.tau);
    EXPECT_EQ(back.config.domain_origin, c.domain_origin);
    EXPECT_EQ(back.config.backend, c.backend);
    EXPECT_EQ(back.manifest.seed, m.seed);
}

TEST(Config, PrintDefaultsParsesBackToDefaults) {
    const OptConfig d;
    const auto text = print_defaults(d);
    EXPECT_EQ(serialize(parse_config(text).config), serialize(d));
    for (const auto& k : {"tau", "omega", "hmat_eta", "stop_below", "seed"})
        EXPECT_NE(text.find(std::string("\n") + k + " = "), std::string::npos) << k;
}

TEST(Config, Modes) {
    EXPECT_EQ(parse_mode("scatter-once"), Mode::scatter_once);
    EXPECT_EQ(parse_mode("validate-oracle"), Mode::validate_oracle);
    EXPECT_THROW(parse_mode("run"), ConfigError);
}

TEST(Format, SeventeenDigitsLocaleIndependent) {
    // Under a comma-decimal locale if one is installed.
    const char* old = std::setlocale(LC_ALL, nullptr);
    const std::string saved = old ? old : "C";
    std::setlocale(LC_ALL, "de_DE.UTF-8");
    EXPECT_EQ(format17(0.1), "0.10000000000000001");
    EXPECT_EQ(format17(-2.5), "-2.5");
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(std::stod(format17(1.0 / 3.0)), 1.0 / 3.0);
    EXPECT_EQ(fixed6(1.0 / 3.0), "0.333333");
    std::setlocale(LC_ALL, saved.c_str());
}

// ---------------------------------------------------------------------------
// Outputs

TEST(Outputs, ZeroIterationHistoryIsHeaderOnly) {
    OptConfig c = small_config();
    c.max_iterations = 0;
    const auto dir = scratch("zero");
    RunWriter w(dir, c, {});
    auto s = optim::initial_state(c);
    w.begin(s);
    s = optim::run_optimization(c, std::move(s), std::ref(w));
    w.finish(s);
    EXPECT_EQ(slurp(dir / "history.csv"), "step,J,J_normalized,t_assemble,t_factor,t_solve,t_field,t_td\n");
    EXPECT_NE(slurp(dir / "summary.txt").find("J_normalized = 1\n"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "config.txt"));
    EXPECT_TRUE(fs::exists(dir / "checkpoint.json"));
}

TEST(Outputs, RunDirectory) {
    OptConfig c = small_config();
    c.snapshot_every = 2;
    const auto dir = scratch("run");
    RunWriter w(dir, c, {});
    auto s = optim::initial_state(c);
    w.begin(s);
    s = optim::run_optimization(c, std::move(s), std::ref(w));
    w.finish(s);

    // exact config copy
    EXPECT_EQ(serialize(parse_config(slurp(dir / "config.txt")).config), serialize(c));

    const auto h = lines(slurp(dir / "history.csv"));
    ASSERT_EQ(h.size(), 4u);
    for (std::size_t k = 1; k < h.size(); ++k) {
        const auto f = split(h[k], ',');
        ASSERT_EQ(f.size(), 8u);
        EXPECT_EQ(f[0], std::to_string(k - 1));
        for (std::size_t i = 1; i < f.size(); ++i) {
            const auto dot = f[i].find('.');
            ASSERT_NE(dot, std::string::npos);
            EXPECT_EQ(f[i].size() - dot - 1, 6u) << f[i];
        }
        EXPECT_NEAR(std::stod(f[2]), s.history[k - 1] / s.j_reference, 1e-6);
    }

    // snapshots at 0 and 2 (final)
    for (const char* stem : {"levelset", "mesh", "td"})
        for (std::size_t step : {0u, 2u}) {
            const char* ext = "txt";
            EXPECT_TRUE(fs::exists(dir / step_name(stem, step, ext))) << stem << step;
        }
    EXPECT_FALSE(fs::exists(dir / "levelset_0001.txt"));
    std::ifstream g(dir / "levelset_0000.txt");
    const auto phi = levelset::read_grid(g);
    EXPECT_TRUE(phi.lattice == c.design_lattice());
    std::ifstream m(dir / "mesh_0002.txt");
    EXPECT_GT(bem2d::read_mesh(m).size(), 0u);

    const auto f = lines(slurp(dir / "field_0002.csv"));
    EXPECT_EQ(f[0], "x,y,set,re,im");
    EXPECT_EQ(f.size(), 1u + optim::frame_points(c).size());
    for (std::size_t k = 1; k < f.size(); ++k) {
        const auto cols = split(f[k], ',');
        ASSERT_EQ(cols.size(), 5u);
        EXPECT_EQ(cols[2], "outer");
        EXPECT_EQ(format17(std::stod(cols[3])), cols[3]);
    }
    EXPECT_NE(slurp(dir / "summary.txt").find("steps = 3\n"), std::string::npos);
}

TEST(Outputs, CheckpointRoundTripAndResume) {
    OptConfig c = small_config();
    c.max_iterations = 4;
    const auto straight = optim::run_optimization(c);

    OptConfig first = c;
    first.max_iterations = 2;
    const auto dir = scratch("resume");
    {
        RunWriter w(dir, first, {});
        auto s = optim::initial_state(first);
        w.begin(s);
        s = optim::run_optimization(first, std::move(s), std::ref(w));
        w.finish(s);
        const auto back = state_from_json(checkpoint_json(s));
        EXPECT_EQ(checkpoint_json(back).dump(), checkpoint_json(s).dump());
    }
    auto s = load_checkpoint(dir / "checkpoint.json");
    EXPECT_EQ(s.iteration, 2u);
    RunWriter w(dir, c, {});
    w.begin(s);
    s = optim::run_optimization(c, std::move(s), std::ref(w));
    w.finish(s);
    ASSERT_EQ(s.history.size(), straight.history.size());
    for (std::size_t k = 0; k < s.history.size(); ++k) EXPECT_EQ(s.history[k], straight.history[k]) << k;
    EXPECT_EQ(lines(slurp(dir / "history.csv")).size(), 5u);
}

TEST(Outputs, BadCheckpointIsConfigError) {
    const auto dir = scratch("badckpt");
    fs::create_directories(dir);
    std::ofstream(dir / "checkpoint.json") << "{\"iteration\": 1}";
    EXPECT_THROW(load_checkpoint(dir / "checkpoint.json"), ConfigError);
    EXPECT_THROW(load_checkpoint(dir / "missing.json"), ConfigError);
}

TEST(Outputs, UnwritableDirectoryNamesPath) {
    const auto file = scratch("blocker");
    std::ofstream(file) << "x";
    try {
        RunWriter w(file / "sub", small_config(), {});
        FAIL() << "expected OutputError";
    } catch (const OutputError& e) {
        EXPECT_NE(std::string(e.what()).find(file.string()), std::string::npos);
    }
}

// ---------------------------------------------------------------------------
// Benchmark and oracle

TEST(Benchmark, DenseAndHierarchicalSolveTheSameSystem) {
    BenchmarkOptions o;
    o.sizes = {100, 200};
    o.hmat.n_min = 16;
    const auto rows = run_benchmark(o);
    ASSERT_EQ(rows.size(), 2u);
    for (const auto& r : rows) {
        EXPECT_TRUE(r.has_dense);
        EXPECT_EQ(r.rhs_checksum, r.dense_rhs_checksum);
        EXPECT_LE(r.rel_diff, 1e-4);
        EXPECT_EQ(r.unknowns, 2 * r.n);
    }
    const auto t = lines(timing_csv(rows));
    EXPECT_EQ(t[0], "N,t_assemble,t_hlu,t_solve,t_matvec");
    EXPECT_EQ(split(t[1], ',')[0], "100");
    EXPECT_EQ(lines(dense_csv(rows)).size(), 3u);
}

TEST(Oracle, PecErrorDecreases) {
    OptConfig c;
    const auto rows = validate_oracle(c, {100, 200});
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_LT(rows[1].rel_l2, rows[0].rel_l2);
    EXPECT_LT(rows[3].rel_l2, rows[2].rel_l2);
    EXPECT_LE(rows[1].rel_l2, 0.02);
}

TEST(ScatterOnce, WritesOneConfiguration) {
    const auto dir = scratch("scatter");
    OptConfig c = small_config();
    const auto t = scatter_once(c, {}, dir);
    EXPECT_GT(t.total(), 0.0);
    EXPECT_TRUE(fs::exists(dir / "field_0000.csv"));
    EXPECT_TRUE(fs::exists(dir / "mesh_0000.txt"));
    EXPECT_NE(slurp(dir / "summary.txt").find("J = " + format17(t.total())), std::string::npos);
}

// ---------------------------------------------------------------------------
// Executable

#ifdef CLOAKFORGE_BIN
namespace {
int run(const std::string& args) {
    const int rc = std::system((std::string(CLOAKFORGE_BIN) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}
}  // namespace

TEST(Executable, ExitCodes) {
    const auto dir = scratch("exe");
    fs::create_directories(dir);
    EXPECT_EQ(run("--print-defaults"), 0);
    EXPECT_EQ(run("--print-defaults --preset modified-eps5"), 0);
    EXPECT_EQ(run("--preset nope --print-defaults"), 2);
    EXPECT_EQ(run("teleport"), 2);
    EXPECT_EQ(run("optimize --bogus-flag"), 2);
    std::ofstream(dir / "bad.cfg") << "tau = -1\n";
    EXPECT_EQ(run("optimize --config " + (dir / "bad.cfg").string() + " --out " + (dir / "o").string()), 2);
    EXPECT_EQ(run("optimize --config " + (dir / "missing.cfg").string()), 2);
    std::ofstream(dir / "ok.cfg") << "lattice = 21\nelement_length = 3\nmax_iterations = 1\ninit_smoothing = 0\n";
    EXPECT_EQ(run("optimize --config " + (dir / "ok.cfg").string() + " --out " + (dir / "run").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "run" / "summary.txt"));
    std::ofstream(dir / "file") << "x";
    EXPECT_EQ(run("optimize --config " + (dir / "ok.cfg").string() + " --out " + (dir / "file").string()), 3);
    EXPECT_EQ(run("optimize --resume --config " + (dir / "ok.cfg").string() + " --out " + (dir / "none").string()), 2);
}
#endif

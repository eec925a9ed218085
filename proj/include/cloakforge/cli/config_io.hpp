#pragma once

// Plain-text run configuration: one `key = value` per line, `#` starts a
// comment. Every key, its default and its valid range are listed by
// `print_defaults`.

#include <charconv>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <system_error>

#include "cloakforge/optim/config.hpp"

namespace cloakforge::cli {

using optim::OptConfig;

enum class Mode { optimize, scatter_once, benchmark, validate_oracle };

inline const char* to_string(Mode m) {
    switch (m) {
        case Mode::optimize: return "optimize";
        case Mode::scatter_once: return "scatter-once";
        case Mode::benchmark: return "benchmark";
        case Mode::validate_oracle: return "validate-oracle";
    }
    return "?";
}

inline Mode parse_mode(const std::string& s) {
    for (Mode m : {Mode::optimize, Mode::scatter_once, Mode::benchmark, Mode::validate_oracle})
        if (s == to_string(m)) return m;
    throw ConfigError("unknown mode '" + s + "' (optimize, scatter-once, benchmark, validate-oracle)");
}

struct RunManifest {
    std::string config_path;
    std::string output_dir = "out";
    Mode mode = Mode::optimize;
    std::uint64_t seed = 1;
    unsigned workers = 1;
};

/// Shortest text that reads back to the same double; never locale dependent.
inline std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

/// 17 significant digits, locale independent.
inline std::string format17(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, r.ptr);
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
    double x = 0.0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(x))
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    return x;
}

inline std::uint64_t to_count(const std::string& key, const std::string& v) {
    std::uint64_t x = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size())
        throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return x;
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

struct Key {
    std::string name;
    std::string range;  // human-readable valid range
    std::string doc;
    std::function<void(OptConfig&, RunManifest&, const std::string&)> set;
    std::function<std::string(const OptConfig&, const RunManifest&)> get;
};

inline void check(bool ok, const std::string& key, const std::string& range, const std::string& v) {
    if (!ok) throw ConfigError(key + ": value " + v + " out of range, expected " + range);
}

// A real-valued key with a range predicate.
template <class Field, class Pred>
Key real(std::string name, std::string range, std::string doc, Field f, Pred ok) {
    Key k{name, range, std::move(doc), nullptr, nullptr};
    k.set = [=](OptConfig& c, RunManifest&, const std::string& v) {
        const double x = to_double(name, v);
        check(ok(x), name, range, v);
        f(c) = x;
    };
    k.get = [=](const OptConfig& c, const RunManifest&) { return format_double(f(const_cast<OptConfig&>(c))); };
    return k;
}

template <class T, class Field, class Pred>
Key count(std::string name, std::string range, std::string doc, Field f, Pred ok) {
    Key k{name, range, std::move(doc), nullptr, nullptr};
    k.set = [=](OptConfig& c, RunManifest&, const std::string& v) {
        const auto x = to_count(name, v);
        check(ok(x), name, range, v);
        f(c) = static_cast<T>(x);
    };
    k.get = [=](const OptConfig& c, const RunManifest&) { return std::to_string(f(const_cast<OptConfig&>(c))); };
    return k;
}

template <class Field>
Key flag(std::string name, std::string doc, Field f) {
    Key k{name, "true | false", std::move(doc), nullptr, nullptr};
    k.set = [=](OptConfig& c, RunManifest&, const std::string& v) { f(c) = to_bool(name, v); };
    k.get = [=](const OptConfig& c, const RunManifest&) {
        return std::string(f(const_cast<OptConfig&>(c)) ? "true" : "false");
    };
    return k;
}

inline const std::vector<Key>& keys() {
    const auto pos = [](double x) { return x > 0.0; };
    const auto nonneg = [](double x) { return x >= 0.0; };
    const auto any = [](double) { return true; };
    static const std::vector<Key> k = [&] {
        std::vector<Key> v;
        Key variant{"variant", "conventional | modified", "objective: scattered field outside D, or plus the field in the centre disc",
                    nullptr, nullptr};
        variant.set = [](OptConfig& c, RunManifest&, const std::string& s) {
            if (s == "conventional")
                c.variant = sens::Variant::conventional;
            else if (s == "modified")
                c.variant = sens::Variant::modified;
            else
                throw ConfigError("variant: value " + s + " out of range, expected conventional | modified");
        };
        variant.get = [](const OptConfig& c, const RunManifest&) { return std::string(sens::to_string(c.variant)); };
        v.push_back(variant);
        v.push_back(real("omega", "> 0", "angular frequency", [](OptConfig& c) -> double& { return c.omega; }, pos));
        v.push_back(real("eps2", "> 0", "permittivity of the dielectric", [](OptConfig& c) -> double& { return c.eps2; }, pos));
        v.push_back(real("mu2", "> 0", "permeability of the dielectric", [](OptConfig& c) -> double& { return c.mu2; }, pos));
        v.push_back(real("direction", "any", "incident direction angle [rad]",
                         [](OptConfig& c) -> double& { return c.direction; }, any));
        v.push_back(real("domain_x0", "any", "lower-left corner of D, x",
                         [](OptConfig& c) -> double& { return c.domain_origin.x(); }, any));
        v.push_back(real("domain_y0", "any", "lower-left corner of D, y",
                         [](OptConfig& c) -> double& { return c.domain_origin.y(); }, any));
        v.push_back(real("domain_size", "> 0", "side length of D (also the characteristic length l)",
                         [](OptConfig& c) -> double& { return c.domain_size; }, pos));
        v.push_back(count<std::size_t>("lattice", "3 .. 1001", "level-set lattice points per side",
                                       [](OptConfig& c) -> std::size_t& { return c.lattice; },
                                       [](std::uint64_t x) { return x >= 3 && x <= 1001; }));
        v.push_back(real("element_length", "> 0", "target boundary element length",
                         [](OptConfig& c) -> double& { return c.element_length; }, pos));
        v.push_back(real("pec_x", "any", "PEC centre, x", [](OptConfig& c) -> double& { return c.pec_center.x(); }, any));
        v.push_back(real("pec_y", "any", "PEC centre, y", [](OptConfig& c) -> double& { return c.pec_center.y(); }, any));
        v.push_back(real("pec_radius", "> 0", "PEC radius (conventional)",
                         [](OptConfig& c) -> double& { return c.pec_radius; }, pos));
        v.push_back(real("keepout_margin", ">= 0", "vacuum band around the PEC and the centre disc",
                         [](OptConfig& c) -> double& { return c.keepout_margin; }, nonneg));
        v.push_back(real("obs_spacing", "> 0", "outer observation lattice spacing",
                         [](OptConfig& c) -> double& { return c.obs_spacing; }, pos));
        v.push_back(real("obs_gap", "> 0", "distance from D to the observation frame",
                         [](OptConfig& c) -> double& { return c.obs_gap; }, pos));
        v.push_back(real("obs_width", "> 0", "width of the observation frame",
                         [](OptConfig& c) -> double& { return c.obs_width; }, pos));
        v.push_back(real("inner_radius", "> 0", "radius of the centre observation disc (modified)",
                         [](OptConfig& c) -> double& { return c.inner_radius; }, pos));
        v.push_back(real("inner_spacing", "> 0", "centre observation lattice spacing (modified)",
                         [](OptConfig& c) -> double& { return c.inner_spacing; }, pos));
        v.push_back(real("tau", ">= 0", "regularization of the reaction-diffusion update",
                         [](OptConfig& c) -> double& { return c.tau; }, nonneg));
        v.push_back(real("kappa", ">= 0", "reaction scale, C = kappa / max|T0|",
                         [](OptConfig& c) -> double& { return c.kappa; }, nonneg));
        v.push_back(real("dt", "> 0", "initial and largest pseudo-time step", [](OptConfig& c) -> double& { return c.dt; }, pos));
        v.push_back(flag("adaptive_dt", "halve dt and retry when J increases",
                         [](OptConfig& c) -> bool& { return c.adaptive_dt; }));
        v.push_back(real("dt_min", "> 0", "smallest pseudo-time step", [](OptConfig& c) -> double& { return c.dt_min; }, pos));
        v.push_back(real("dt_growth", ">= 1", "dt growth after an accepted step",
                         [](OptConfig& c) -> double& { return c.dt_growth; }, [](double x) { return x >= 1.0; }));
        v.push_back(real("init_radius", "> 0", "radius of the initial material disc",
                         [](OptConfig& c) -> double& { return c.init_radius; }, pos));
        v.push_back(real("init_smoothing", ">= 0", "diffusion applied to the initial level set [length^2]",
                         [](OptConfig& c) -> double& { return c.init_smoothing; }, nonneg));
        v.push_back(real("conv_eps1", "> 0", "bound on the slope of log J over the window",
                         [](OptConfig& c) -> double& { return c.conv_eps1; }, pos));
        v.push_back(real("conv_eps2", ">= 1", "bound on the max ratio of J over the window",
                         [](OptConfig& c) -> double& { return c.conv_eps2; }, [](double x) { return x >= 1.0; }));
        v.push_back(count<std::size_t>("window", ">= 2", "convergence window",
                                       [](OptConfig& c) -> std::size_t& { return c.window; },
                                       [](std::uint64_t x) { return x >= 2; }));
        v.push_back(count<std::size_t>("max_iterations", ">= 0", "cap on analysed configurations",
                                       [](OptConfig& c) -> std::size_t& { return c.max_iterations; },
                                       [](std::uint64_t) { return true; }));
        v.push_back(count<std::size_t>("snapshot_every", ">= 1", "snapshot cadence in steps",
                                       [](OptConfig& c) -> std::size_t& { return c.snapshot_every; },
                                       [](std::uint64_t x) { return x >= 1; }));
        v.push_back(real("stop_below", ">= 0", "stop once J / J_reference <= this (0: off)",
                         [](OptConfig& c) -> double& { return c.stop_below; }, nonneg));
        Key backend{"backend", "hmatrix | dense", "linear algebra backend", nullptr, nullptr};
        backend.set = [](OptConfig& c, RunManifest&, const std::string& s) {
            if (s == "hmatrix")
                c.backend = bem2d::Backend::hmatrix;
            else if (s == "dense")
                c.backend = bem2d::Backend::dense;
            else
                throw ConfigError("backend: value " + s + " out of range, expected hmatrix | dense");
        };
        backend.get = [](const OptConfig& c, const RunManifest&) { return std::string(bem2d::to_string(c.backend)); };
        v.push_back(backend);
        v.push_back(real("hmat_eta", "> 0", "admissibility parameter of the system",
                         [](OptConfig& c) -> double& { return c.hmat.eta; }, pos));
        v.push_back(count<std::size_t>("hmat_nmin", ">= 1", "leaf size of the system cluster trees",
                                       [](OptConfig& c) -> std::size_t& { return c.hmat.n_min; },
                                       [](std::uint64_t x) { return x >= 1; }));
        v.push_back(real("hmat_tol", "(0, 1)", "ACA and H-LU tolerance of the system",
                         [](OptConfig& c) -> double& { return c.hmat.tol; }, [](double x) { return x > 0.0 && x < 1.0; }));
        v.push_back(real("field_eta", "> 0", "admissibility parameter of lattice field evaluation",
                         [](OptConfig& c) -> double& { return c.field_hmat.eta; }, pos));
        v.push_back(count<std::size_t>("field_nmin", ">= 1", "leaf size for lattice field evaluation",
                                       [](OptConfig& c) -> std::size_t& { return c.field_hmat.n_min; },
                                       [](std::uint64_t x) { return x >= 1; }));
        v.push_back(real("field_tol", "(0, 1)", "ACA tolerance of lattice field evaluation",
                         [](OptConfig& c) -> double& { return c.field_hmat.tol; },
                         [](double x) { return x > 0.0 && x < 1.0; }));
        v.push_back(count<unsigned>("workers", "1 .. 256", "assembly threads",
                                    [](OptConfig& c) -> unsigned& { return c.workers; },
                                    [](std::uint64_t x) { return x >= 1 && x <= 256; }));
        v.push_back(flag("zero_td", "debug: force T = 0 (diffusion only)", [](OptConfig& c) -> bool& { return c.zero_td; }));
        Key seed{"seed", ">= 0", "seed for synthetic test matrices", nullptr, nullptr};
        seed.set = [](OptConfig&, RunManifest& m, const std::string& s) { m.seed = to_count("seed", s); };
        seed.get = [](const OptConfig&, const RunManifest& m) { return std::to_string(m.seed); };
        v.push_back(seed);
        return v;
    }();
    return k;
}

}  // namespace detail

/// The experiment presets.
inline std::vector<std::string> preset_names() {
    return {"conventional-eps2", "conventional-eps5", "modified-eps2", "modified-eps5"};
}

inline OptConfig preset(const std::string& name) {
    OptConfig c;
    if (name == "conventional-eps2" || name == "conventional-eps5")
        c.variant = sens::Variant::conventional;
    else if (name == "modified-eps2" || name == "modified-eps5")
        c.variant = sens::Variant::modified;
    else
        throw ConfigError("unknown preset '" + name + "'");
    c.eps2 = name.ends_with("eps5") ? 5.0 : 2.0;
    c.domain_origin = Vec2(0.0, 0.0);
    c.domain_size = 100.0;
    c.pec_center = Vec2(50.0, 50.0);
    c.pec_radius = 10.0;
    c.tau = 5e-3;
    c.inner_radius = 12.0;
    return c;
}

struct ParsedConfig {
    OptConfig config;
    RunManifest manifest;
};

/// Applies `key = value` lines on top of `base`.
inline ParsedConfig parse_config(const std::string& text, const OptConfig& base = {}, const RunManifest& mbase = {}) {
    ParsedConfig out{base, mbase};
    std::map<std::string, const detail::Key*> index;
    for (const auto& k : detail::keys()) index[k.name] = &k;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        const auto it = index.find(key);
        if (it == index.end()) throw ConfigError(key + ": unknown key (line " + std::to_string(lineno) + ")");
        if (value.empty()) throw ConfigError(key + ": missing value");
        it->second->set(out.config, out.manifest, value);
    }
    out.manifest.workers = out.config.workers;
    out.config.validate();
    return out;
}

/// Every key with its current value; parse_config reads it back unchanged.
inline std::string serialize(const OptConfig& c, const RunManifest& m = {}) {
    std::string s;
    for (const auto& k : detail::keys()) s += k.name + " = " + k.get(c, m) + "\n";
    return s;
}

/// Keys, defaults and valid ranges as a commented config file.
inline std::string print_defaults(const OptConfig& c = {}, const RunManifest& m = {}) {
    std::string s = "# cloakforge configuration (defaults)\n";
    for (const auto& k : detail::keys())
        s += "# " + k.doc + "; valid: " + k.range + "\n" + k.name + " = " + k.get(c, m) + "\n";
    return s;
}

}  // namespace cloakforge::cli

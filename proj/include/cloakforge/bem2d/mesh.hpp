#pragma once

// Oriented boundary meshes of straight segments. The normal of a segment is
// its right-hand normal (t_y, -t_x) and points from the vacuum region into
// the scatterer, so loops around a scatterer run clockwise.

#include <array>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "cloakforge/common.hpp"

namespace cloakforge::bem2d {

enum class Interface { dielectric, pec };

struct Segment {
    std::size_t n0 = 0;
    std::size_t n1 = 0;
    Interface tag = Interface::dielectric;
};

class BoundaryMesh {
public:
    std::vector<Vec2> nodes;
    std::vector<Segment> segments;

    std::size_t size() const { return segments.size(); }
    bool empty() const { return segments.empty(); }

    const Vec2& a(std::size_t e) const { return nodes[segments[e].n0]; }
    const Vec2& b(std::size_t e) const { return nodes[segments[e].n1]; }
    double length(std::size_t e) const { return (b(e) - a(e)).norm(); }
    Vec2 midpoint(std::size_t e) const { return 0.5 * (a(e) + b(e)); }
    Vec2 tangent(std::size_t e) const { return (b(e) - a(e)).normalized(); }
    Vec2 normal(std::size_t e) const {
        const Vec2 t = tangent(e);
        return {t.y(), -t.x()};
    }
    Interface tag(std::size_t e) const { return segments[e].tag; }

    std::size_t count(Interface t) const {
        std::size_t c = 0;
        for (const auto& s : segments) c += s.tag == t;
        return c;
    }

    /// Appends a closed polygon; `pts` in traversal order.
    void add_loop(const std::vector<Vec2>& pts, Interface tag) {
        const std::size_t base = nodes.size();
        nodes.insert(nodes.end(), pts.begin(), pts.end());
        for (std::size_t i = 0; i < pts.size(); ++i)
            segments.push_back({base + i, base + (i + 1) % pts.size(), tag});
    }

    /// Circle with n segments, oriented so normals point into the disc.
    void add_circle(const Vec2& center, double radius, std::size_t n, Interface tag, double phase = 0.0) {
        std::vector<Vec2> pts;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = phase - 2.0 * pi * static_cast<double>(i) / static_cast<double>(n);
            pts.push_back(center + radius * Vec2(std::cos(t), std::sin(t)));
        }
        add_loop(pts, tag);
    }

    double min_length() const {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t e = 0; e < size(); ++e) m = std::min(m, length(e));
        return m;
    }
};

inline BoundaryMesh circle_mesh(const Vec2& center, double radius, std::size_t n, Interface tag) {
    BoundaryMesh m;
    m.add_circle(center, radius, n, tag);
    return m;
}

/// Segment connectivity: next/prev segment along the loop through each node.
struct Topology {
    std::vector<std::size_t> next;  // next[e]: segment starting at e's end node
    std::vector<std::size_t> prev;  // prev[e]: segment ending at e's start node
};

/// Every node used must start exactly one segment and end exactly one, with
/// matching interface tags; zero-length segments are rejected.
inline Topology check_watertight(const BoundaryMesh& m) {
    constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> starts(m.nodes.size(), none), ends(m.nodes.size(), none);
    for (std::size_t e = 0; e < m.size(); ++e) {
        const auto& s = m.segments[e];
        if (s.n0 >= m.nodes.size() || s.n1 >= m.nodes.size()) throw SolverError("mesh: node index out of range");
        if (!(m.length(e) > 0.0)) throw SolverError("mesh: zero-length segment " + std::to_string(e));
        if (starts[s.n0] != none || ends[s.n1] != none) throw SolverError("mesh not watertight");
        starts[s.n0] = e;
        ends[s.n1] = e;
    }
    Topology t;
    t.next.resize(m.size());
    t.prev.resize(m.size());
    for (std::size_t e = 0; e < m.size(); ++e) {
        const auto& s = m.segments[e];
        const std::size_t nx = starts[s.n1];
        const std::size_t pv = ends[s.n0];
        if (nx == none || pv == none) throw SolverError("mesh not watertight");
        if (m.segments[nx].tag != s.tag || m.segments[pv].tag != s.tag) throw SolverError("mesh not watertight");
        t.next[e] = nx;
        t.prev[e] = pv;
    }
    return t;
}

/// `node_count`, one `x y` line per node, `segment_count`, then `n0 n1 tag`
/// lines with tag d (dielectric) or p (PEC).
inline void write_mesh(std::ostream& os, const BoundaryMesh& m) {
    os << std::setprecision(17);
    os << m.nodes.size() << '\n';
    for (const auto& p : m.nodes) os << p.x() << ' ' << p.y() << '\n';
    os << m.segments.size() << '\n';
    for (const auto& s : m.segments) os << s.n0 << ' ' << s.n1 << ' ' << (s.tag == Interface::pec ? 'p' : 'd') << '\n';
}

inline BoundaryMesh read_mesh(std::istream& is) {
    BoundaryMesh m;
    std::size_t nn = 0, ns = 0;
    if (!(is >> nn)) throw Error("mesh: missing node count");
    m.nodes.resize(nn);
    for (auto& p : m.nodes)
        if (!(is >> p.x() >> p.y())) throw Error("mesh: truncated node list");
    if (!(is >> ns)) throw Error("mesh: missing segment count");
    m.segments.resize(ns);
    for (auto& s : m.segments) {
        char tag = 0;
        if (!(is >> s.n0 >> s.n1 >> tag)) throw Error("mesh: truncated segment list");
        if (tag != 'p' && tag != 'd') throw Error("mesh: unknown tag");
        s.tag = tag == 'p' ? Interface::pec : Interface::dielectric;
    }
    return m;
}

}  // namespace cloakforge::bem2d

#pragma once

// Zero contour of the level set as an oriented segment mesh, and arclength
// regularization of its loops.

#include <algorithm>
#include <map>
#include <numeric>

#include "cloakforge/bem2d/mesh.hpp"
#include "cloakforge/levelset/grid.hpp"

namespace cloakforge::levelset {

using bem2d::BoundaryMesh;
using bem2d::Interface;

enum class EdgeMode {
    open,    // contours end where they leave the lattice
    closed,  // the lattice is surrounded by vacuum (phi = +1), so every contour closes
};

namespace detail {

// Crossing vertices are keyed by lattice edge; a crossing that falls on a
// lattice point is keyed by the point so that neighbouring edges share it.
struct ContourBuilder {
    const GridValues& g;
    std::size_t nx, ny;
    std::map<long long, std::size_t> ids;
    std::vector<Vec2> pts;
    std::vector<std::pair<std::size_t, std::size_t>> segs;

    explicit ContourBuilder(const GridValues& grid) : g(grid), nx(grid.nx()), ny(grid.ny()) {}

    double value(std::size_t i, std::size_t j) const { return g(i, j); }
    bool neg(std::size_t i, std::size_t j) const { return value(i, j) < 0.0; }
    Vec2 point(std::size_t i, std::size_t j) const { return g.lattice.point(i, j); }

    std::size_t vertex(long long key, const Vec2& p) {
        auto [it, fresh] = ids.try_emplace(key, pts.size());
        if (fresh) pts.push_back(p);
        return it->second;
    }

    // Crossing on the edge between lattice points p and q (signs differ).
    std::size_t crossing(std::size_t pi, std::size_t pj, std::size_t qi, std::size_t qj) {
        const double a = value(pi, pj), b = value(qi, qj);
        const double t = a / (a - b);
        const long long np = static_cast<long long>(pj * nx + pi), nq = static_cast<long long>(qj * nx + qi);
        if (t <= 0.0) return vertex(np, point(pi, pj));
        if (t >= 1.0) return vertex(nq, point(qi, qj));
        const long long lo = std::min(np, nq), hi = std::max(np, nq);
        const long long key = static_cast<long long>(nx * ny) + 2 * lo + (hi - lo == 1 ? 0 : 1);
        return vertex(key, point(pi, pj) + t * (point(qi, qj) - point(pi, pj)));
    }

    // Adds the segment between crossings u and v with the material corner c
    // on its right-hand side. Crossings only ever sit on vacuum corners, so c
    // is strictly off the segment's line.
    void add(std::size_t u, std::size_t v, const Vec2& c) {
        if (u == v) return;
        const Vec2 d = pts[v] - pts[u], r = c - pts[u];
        if (d.x() * r.y() - d.y() * r.x() < 0.0)
            segs.emplace_back(u, v);
        else
            segs.emplace_back(v, u);
    }

    void cell(std::size_t i, std::size_t j) {
        // Corners counter-clockwise from the lower left; edge k joins corner
        // k and corner k+1.
        const std::array<std::pair<std::size_t, std::size_t>, 4> c{
            {{i, j}, {i + 1, j}, {i + 1, j + 1}, {i, j + 1}}};
        std::array<bool, 4> s{};
        for (int k = 0; k < 4; ++k) s[k] = neg(c[k].first, c[k].second);
        std::array<std::size_t, 4> x{};
        std::array<bool, 4> cut{};
        int ncut = 0;
        for (int k = 0; k < 4; ++k) {
            const int l = (k + 1) % 4;
            if (s[k] != s[l]) {
                cut[k] = true;
                ++ncut;
                x[k] = crossing(c[k].first, c[k].second, c[l].first, c[l].second);
            }
        }
        if (ncut == 0) return;
        auto corner = [&](int k) { return point(c[k].first, c[k].second); };
        if (ncut == 2) {
            int e0 = -1, e1 = -1, m = 0;
            for (int k = 0; k < 4; ++k)
                if (cut[k]) (e0 < 0 ? e0 : e1) = k;
            while (!s[m]) ++m;
            add(x[e0], x[e1], corner(m));
            return;
        }
        // The material corner on the far side of the chord cutting off corner m.
        auto material = [&](int m) { return corner(s[m] ? m : (m + 1) % 4); };
        // Saddle: the cell centre decides which diagonal pair is joined.
        const double centre = 0.25 * (value(i, j) + value(i + 1, j) + value(i + 1, j + 1) + value(i, j + 1));
        const bool centre_neg = centre < 0.0;
        if (centre_neg == s[0]) {
            // Corners 0 and 2 are connected through the centre; cut off 1 and 3.
            add(x[0], x[1], material(1));
            add(x[2], x[3], material(3));
        } else {
            add(x[3], x[0], material(0));
            add(x[1], x[2], material(2));
        }
    }
};

}  // namespace detail

/// Oriented polylines (open) or loops (closed) of a segment mesh, as node
/// index sequences; closed loops do not repeat their first node.
struct Chain {
    std::vector<std::size_t> nodes;
    bool closed = false;
    Interface tag = Interface::dielectric;
};

inline std::vector<Chain> chains(const BoundaryMesh& m) {
    constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
    std::vector<std::vector<std::size_t>> out_of(m.nodes.size());
    std::vector<std::size_t> indeg(m.nodes.size(), 0);
    for (std::size_t e = 0; e < m.size(); ++e) {
        out_of[m.segments[e].n0].push_back(e);
        ++indeg[m.segments[e].n1];
    }
    std::vector<char> used(m.size(), 0);
    std::vector<Chain> result;
    auto walk = [&](std::size_t e) {
        Chain c;
        c.tag = m.segments[e].tag;
        const std::size_t start = m.segments[e].n0;
        c.nodes.push_back(start);
        for (;;) {
            used[e] = 1;
            const std::size_t n = m.segments[e].n1;
            if (n == start) {
                c.closed = true;
                break;
            }
            c.nodes.push_back(n);
            std::size_t nxt = none;
            for (auto f : out_of[n])
                if (!used[f]) {
                    nxt = f;
                    break;
                }
            if (nxt == none) break;
            e = nxt;
        }
        result.push_back(std::move(c));
    };
    // Open chains first, from nodes nothing enters.
    for (std::size_t e = 0; e < m.size(); ++e)
        if (!used[e] && indeg[m.segments[e].n0] == 0) walk(e);
    for (std::size_t e = 0; e < m.size(); ++e)
        if (!used[e]) walk(e);
    return result;
}

/// Zero contour by linear interpolation along lattice edges. Segments are
/// oriented with the material side (phi < 0) on their right, which makes
/// their normals point from Omega_1 into Omega_2. Saddle cells are resolved
/// by the sign of the cell-centre average. Degenerate segments (both ends on
/// the same lattice point) are dropped.
inline BoundaryMesh extract_boundary(const LevelSetGrid& grid, EdgeMode mode = EdgeMode::closed,
                                     Interface tag = Interface::dielectric) {
    grid.lattice.validate();
    GridValues work = grid;
    if (mode == EdgeMode::closed) {
        Lattice l = grid.lattice;
        l.nx += 2;
        l.ny += 2;
        l.origin -= Vec2(l.h, l.h);
        work = GridValues(l, 1.0);
        for (std::size_t j = 0; j < grid.ny(); ++j)
            for (std::size_t i = 0; i < grid.nx(); ++i) work(i + 1, j + 1) = grid(i, j);
    }
    detail::ContourBuilder b(work);
    for (std::size_t j = 0; j + 1 < work.ny(); ++j)
        for (std::size_t i = 0; i + 1 < work.nx(); ++i) b.cell(i, j);

    BoundaryMesh raw;
    raw.nodes = b.pts;
    for (auto [u, v] : b.segs) raw.segments.push_back({u, v, tag});

    // Renumber along chains so loops are contiguous.
    BoundaryMesh out;
    for (const auto& c : chains(raw)) {
        const std::size_t base = out.nodes.size();
        for (auto n : c.nodes) out.nodes.push_back(raw.nodes[n]);
        const std::size_t k = c.nodes.size();
        for (std::size_t s = 0; s + 1 < k; ++s) out.segments.push_back({base + s, base + s + 1, tag});
        if (c.closed) out.segments.push_back({base + k - 1, base, tag});
    }
    return out;
}

namespace detail {

// Points at equal arclength along a polyline; `closed` appends the closing
// edge. Returns n points for a loop, n + 1 (with both ends) for an open chain.
inline std::vector<Vec2> resample(const std::vector<Vec2>& p, bool closed, std::size_t n) {
    std::vector<Vec2> poly = p;
    if (closed) poly.push_back(p.front());
    std::vector<double> s(poly.size(), 0.0);
    for (std::size_t k = 1; k < poly.size(); ++k) s[k] = s[k - 1] + (poly[k] - poly[k - 1]).norm();
    const double total = s.back();
    std::vector<Vec2> out;
    const std::size_t count = closed ? n : n + 1;
    std::size_t seg = 0;
    for (std::size_t q = 0; q < count; ++q) {
        const double target = total * static_cast<double>(q) / static_cast<double>(n);
        while (seg + 2 < poly.size() && s[seg + 1] < target) ++seg;
        const double len = s[seg + 1] - s[seg];
        const double t = len > 0.0 ? std::clamp((target - s[seg]) / len, 0.0, 1.0) : 0.0;
        out.push_back(poly[seg] + t * (poly[seg + 1] - poly[seg]));
    }
    return out;
}

}  // namespace detail

/// Resamples every chain by arclength into pieces of nearly `target_length`.
/// Loops shorter than 3 target lengths are deleted; open chains keep their
/// end points.
inline BoundaryMesh regularize_mesh(const BoundaryMesh& mesh, double target_length) {
    if (!(target_length > 0.0)) throw Error("regularize_mesh: target length must be positive");
    BoundaryMesh out;
    for (const auto& c : chains(mesh)) {
        std::vector<Vec2> pts;
        for (auto n : c.nodes) pts.push_back(mesh.nodes[n]);
        double perimeter = 0.0;
        for (std::size_t k = 0; k + 1 < pts.size(); ++k) perimeter += (pts[k + 1] - pts[k]).norm();
        if (c.closed) perimeter += (pts.front() - pts.back()).norm();
        if (c.closed && perimeter < 3.0 * target_length) continue;
        if (!(perimeter > 0.0)) continue;
        const auto n = std::max<std::size_t>(c.closed ? 3 : 1,
                                             static_cast<std::size_t>(std::llround(perimeter / target_length)));
        const auto q = detail::resample(pts, c.closed, n);
        const std::size_t base = out.nodes.size();
        out.nodes.insert(out.nodes.end(), q.begin(), q.end());
        for (std::size_t k = 0; k + 1 < q.size(); ++k) out.segments.push_back({base + k, base + k + 1, c.tag});
        if (c.closed) out.segments.push_back({base + q.size() - 1, base, c.tag});
    }
    return out;
}

/// Signed area enclosed by the closed chains (positive for clockwise loops,
/// i.e. material on the right).
inline double enclosed_area(const BoundaryMesh& mesh) {
    double a = 0.0;
    for (const auto& s : mesh.segments) {
        const Vec2& p = mesh.nodes[s.n0];
        const Vec2& q = mesh.nodes[s.n1];
        a += p.x() * q.y() - q.x() * p.y();
    }
    return -0.5 * a;
}

}  // namespace cloakforge::levelset

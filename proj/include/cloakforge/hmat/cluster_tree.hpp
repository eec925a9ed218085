#pragma once

// Geometric cluster trees and the admissibility predicate.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "cloakforge/common.hpp"

namespace cloakforge::hmat {

/// Per-index geometry: a centroid that drives the bisection, plus the set of
/// extent points (segment endpoints) used by diam/dist.
class PointCloud {
public:
    PointCloud() { offset_.push_back(0); }

    void add(const Vec2& centroid, std::span<const Vec2> extent) {
        centroid_.push_back(centroid);
        points_.insert(points_.end(), extent.begin(), extent.end());
        offset_.push_back(points_.size());
    }
    void add(const Vec2& point) { add(point, std::span<const Vec2>(&point, 1)); }

    std::size_t size() const { return centroid_.size(); }
    bool empty() const { return centroid_.empty(); }
    const Vec2& centroid(std::size_t i) const { return centroid_[i]; }
    std::span<const Vec2> extent(std::size_t i) const {
        return {points_.data() + offset_[i], offset_[i + 1] - offset_[i]};
    }

    /// One item per segment: centroid = midpoint, extent = both endpoints.
    static PointCloud from_segments(std::span<const std::array<Vec2, 2>> segments) {
        PointCloud pc;
        for (const auto& s : segments) pc.add(0.5 * (s[0] + s[1]), s);
        return pc;
    }
    static PointCloud from_points(std::span<const Vec2> pts) {
        PointCloud pc;
        for (const auto& p : pts) pc.add(p);
        return pc;
    }

private:
    std::vector<Vec2> centroid_;
    std::vector<std::size_t> offset_;
    std::vector<Vec2> points_;
};

struct BoundingBox {
    Vec2 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    Vec2 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};

    void extend(const Vec2& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    bool contains(const BoundingBox& o) const {
        return (lo.array() <= o.lo.array()).all() && (hi.array() >= o.hi.array()).all();
    }
    double distance(const BoundingBox& o) const {
        const double dx = std::max({0.0, o.lo.x() - hi.x(), lo.x() - o.hi.x()});
        const double dy = std::max({0.0, o.lo.y() - hi.y(), lo.y() - o.hi.y()});
        return std::hypot(dx, dy);
    }
};

struct Cluster {
    std::size_t begin = 0;  // range into ClusterTree::perm
    std::size_t end = 0;
    int level = 0;
    BoundingBox box;
    double diam = 0.0;
    std::array<std::size_t, 2> children{npos, npos};

    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    std::size_t size() const { return end - begin; }
    bool is_leaf() const { return children[0] == npos; }
};

namespace detail {

inline double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

// Max pairwise distance; exact, evaluated over the convex hull.
inline double diameter(std::vector<Vec2> pts) {
    if (pts.size() < 2) return 0.0;
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts.size() == 2 ? (pts[0] - pts[1]).norm() : 0.0;
    std::vector<Vec2> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    double best = 0.0;
    for (std::size_t i = 0; i < hull.size(); ++i)
        for (std::size_t j = i + 1; j < hull.size(); ++j)
            best = std::max(best, (hull[i] - hull[j]).squaredNorm());
    return std::sqrt(best);
}

}  // namespace detail

/// Binary tree over a permuted index list. perm[p] is the external index
/// stored at tree position p; iperm is its inverse.
class ClusterTree {
public:
    ClusterTree() = default;

    ClusterTree(const PointCloud& cloud, std::size_t n_min) : cloud_(cloud) {
        if (cloud.empty()) throw Error("empty geometry");
        if (n_min < 1) throw Error("cluster tree: n_min must be >= 1");
        perm_.resize(cloud.size());
        std::iota(perm_.begin(), perm_.end(), std::size_t{0});
        nodes_.reserve(2 * cloud.size() / std::max<std::size_t>(1, n_min) + 4);
        build(0, cloud.size(), 0, n_min);
        iperm_.resize(perm_.size());
        for (std::size_t p = 0; p < perm_.size(); ++p) iperm_[perm_[p]] = p;
    }

    std::size_t size() const { return perm_.size(); }
    std::size_t root() const { return 0; }
    const Cluster& node(std::size_t c) const { return nodes_[c]; }
    std::size_t node_count() const { return nodes_.size(); }
    const std::vector<std::size_t>& perm() const { return perm_; }
    const std::vector<std::size_t>& iperm() const { return iperm_; }
    const PointCloud& cloud() const { return cloud_; }

    int depth() const {
        int d = 0;
        for (const auto& n : nodes_) d = std::max(d, n.level);
        return d;
    }

    std::vector<std::size_t> leaves() const {
        std::vector<std::size_t> out;
        for (std::size_t c = 0; c < nodes_.size(); ++c)
            if (nodes_[c].is_leaf()) out.push_back(c);
        return out;
    }

    /// Extent points of every index in cluster c.
    std::vector<Vec2> points(std::size_t c) const {
        std::vector<Vec2> out;
        const auto& n = nodes_[c];
        for (std::size_t p = n.begin; p < n.end; ++p) {
            auto e = cloud_.extent(perm_[p]);
            out.insert(out.end(), e.begin(), e.end());
        }
        return out;
    }

private:
    std::size_t build(std::size_t begin, std::size_t end, int level, std::size_t n_min) {
        const std::size_t id = nodes_.size();
        nodes_.push_back({});
        Cluster c;
        c.begin = begin;
        c.end = end;
        c.level = level;
        for (std::size_t p = begin; p < end; ++p)
            for (const auto& q : cloud_.extent(perm_[p])) c.box.extend(q);
        std::vector<Vec2> pts;
        for (std::size_t p = begin; p < end; ++p) {
            auto e = cloud_.extent(perm_[p]);
            pts.insert(pts.end(), e.begin(), e.end());
        }
        c.diam = detail::diameter(std::move(pts));

        if (end - begin > n_min) {
            const Vec2 ext = c.box.hi - c.box.lo;
            const int axis = ext.x() >= ext.y() ? 0 : 1;
            const double mid = 0.5 * (c.box.lo[axis] + c.box.hi[axis]);
            auto first = perm_.begin() + static_cast<std::ptrdiff_t>(begin);
            auto last = perm_.begin() + static_cast<std::ptrdiff_t>(end);
            auto split = std::stable_partition(
                first, last, [&](std::size_t i) { return cloud_.centroid(i)[axis] < mid; });
            if (split == first || split == last) {
                // All centroids on one side of the midpoint: fall back to a count split.
                std::stable_sort(first, last, [&](std::size_t a, std::size_t b) {
                    return cloud_.centroid(a)[axis] < cloud_.centroid(b)[axis];
                });
                split = first + (last - first) / 2;
            }
            const std::size_t s = begin + static_cast<std::size_t>(split - first);
            c.children[0] = build(begin, s, level + 1, n_min);
            c.children[1] = build(s, end, level + 1, n_min);
        }
        nodes_[id] = c;
        return id;
    }

    PointCloud cloud_;
    std::vector<Cluster> nodes_;
    std::vector<std::size_t> perm_;
    std::vector<std::size_t> iperm_;
};

inline ClusterTree build_cluster_tree(const PointCloud& cloud, std::size_t n_min) {
    return ClusterTree(cloud, n_min);
}

/// True when some pair (a in A, b in B) is strictly closer than thr.
inline bool any_pair_closer(std::span<const Vec2> a, std::span<const Vec2> b, double thr) {
    if (thr <= 0.0) return false;
    std::vector<Vec2> sb(b.begin(), b.end());
    std::sort(sb.begin(), sb.end(), [](const Vec2& p, const Vec2& q) { return p.x() < q.x(); });
    const double thr2 = thr * thr;
    for (const auto& p : a) {
        auto lo = std::lower_bound(sb.begin(), sb.end(), p.x() - thr,
                                   [](const Vec2& q, double v) { return q.x() < v; });
        for (auto it = lo; it != sb.end() && it->x() <= p.x() + thr; ++it)
            if ((*it - p).squaredNorm() < thr2) return true;
    }
    return false;
}

inline double min_distance(std::span<const Vec2> a, std::span<const Vec2> b) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : a)
        for (const auto& q : b) best = std::min(best, (p - q).squaredNorm());
    return std::sqrt(best);
}

/// min{diam A, diam B} <= eta * dist{A, B}, over raw point sets. Touching sets
/// (dist = 0) are never admissible.
inline bool admissible(std::span<const Vec2> a, std::span<const Vec2> b, double eta) {
    if (a.empty() || b.empty()) throw Error("admissible: empty cluster");
    const double d = std::min(detail::diameter({a.begin(), a.end()}),
                              detail::diameter({b.begin(), b.end()}));
    const double dist = min_distance(a, b);
    return dist > 0.0 && d <= eta * dist;
}

/// Cluster-level predicate. Uses the bounding-box distance as a cheap lower
/// bound before falling back to the exact endpoint distance.
inline bool admissible(const ClusterTree& rows, std::size_t ci, const ClusterTree& cols,
                       std::size_t cj, double eta) {
    if (!(eta > 0.0)) return false;
    const Cluster& a = rows.node(ci);
    const Cluster& b = cols.node(cj);
    const double d = std::min(a.diam, b.diam);
    const double box = a.box.distance(b.box);
    if (box > 0.0 && d <= eta * box) return true;
    const auto pa = rows.points(ci);
    const auto pb = cols.points(cj);
    // Need dist > 0 and dist >= d / eta.
    const double thr = d / eta;
    if (thr > 0.0) return !any_pair_closer(pa, pb, thr);
    return min_distance(pa, pb) > 0.0;
}

}  // namespace cloakforge::hmat

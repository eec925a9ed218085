#include <gtest/gtest.h>

#include <sstream>

#include "cloakforge/levelset/contour.hpp"
#include "cloakforge/levelset/evolve.hpp"

using namespace cloakforge;
using namespace cloakforge::levelset;

namespace {

Lattice unit_lattice(std::size_t n, double h = 1.0) {
    Lattice l;
    l.nx = n;
    l.ny = n;
    l.h = h;
    return l;
}

template <class F>
LevelSetGrid sample(const Lattice& l, F&& f, bool clip = false) {
    LevelSetGrid g(l, 0.0);
    for (std::size_t k = 0; k < l.size(); ++k) g.values[k] = f(l.point(k));
    if (clip) g.clip();
    return g;
}

double perimeter(const BoundaryMesh& m) {
    double p = 0;
    for (std::size_t e = 0; e < m.size(); ++e) p += m.length(e);
    return p;
}

// Material lies on the right of every segment: phi decreases along the
// normal.
void expect_oriented(const LevelSetGrid& g, const BoundaryMesh& m, double probe) {
    for (std::size_t e = 0; e < m.size(); ++e) {
        const Vec2 mid = m.midpoint(e), n = m.normal(e);
        if (!g.lattice.contains(mid + probe * n) || !g.lattice.contains(mid - probe * n)) continue;
        EXPECT_LT(g.interpolate(mid + probe * n), g.interpolate(mid - probe * n)) << e;
    }
}

}  // namespace

TEST(Classify, ConstantFields) {
    const auto l = unit_lattice(11);
    const LevelSetGrid plus(l, 1.0), minus(l, -1.0);
    for (double x : {0.5, 3.3, 9.9}) {
        EXPECT_EQ(classify(plus, Vec2(x, 2.0)), Phase::omega1);
        EXPECT_EQ(classify(minus, Vec2(x, 2.0)), Phase::omega2);
    }
}

TEST(Classify, LinearField) {
    const auto g = sample(unit_lattice(101), [](const Vec2& x) { return x.x() - 50.0; });
    EXPECT_EQ(classify(g, Vec2(25, 40)), Phase::omega2);
    EXPECT_EQ(classify(g, Vec2(75, 40)), Phase::omega1);
    EXPECT_EQ(classify(g, Vec2(50, 40)), Phase::gamma_d);
    EXPECT_EQ(classify(g, Vec2(-5, 40)), Phase::omega1);  // outside the lattice
}

TEST(Extract, EmptyForPositiveField) {
    const LevelSetGrid g(unit_lattice(11), 1.0);
    EXPECT_TRUE(extract_boundary(g, EdgeMode::open).empty());
    EXPECT_TRUE(extract_boundary(g, EdgeMode::closed).empty());
}

TEST(Extract, VerticalLine) {
    const auto g = sample(unit_lattice(101), [](const Vec2& x) { return x.x() - 50.0; });
    const auto m = extract_boundary(g, EdgeMode::open);
    EXPECT_EQ(m.size(), g.ny() - 1);
    for (const auto& p : m.nodes) EXPECT_DOUBLE_EQ(p.x(), 50.0);
    // Material (x < 50) on the right: the normal points to -x.
    for (std::size_t e = 0; e < m.size(); ++e) EXPECT_NEAR(m.normal(e).x(), -1.0, 1e-15);
    const auto ch = chains(m);
    ASSERT_EQ(ch.size(), 1u);
    EXPECT_FALSE(ch[0].closed);
}

TEST(Extract, ClosedModeSealsAtTheRim) {
    const auto g = sample(unit_lattice(101), [](const Vec2& x) { return x.x() - 50.0; });
    const auto m = extract_boundary(g, EdgeMode::closed);
    EXPECT_NO_THROW(bem2d::check_watertight(m));
    const auto ch = chains(m);
    ASSERT_EQ(ch.size(), 1u);
    EXPECT_TRUE(ch[0].closed);
    EXPECT_GT(enclosed_area(m), 0.0);
}

TEST(Extract, CirclePerimeterAndOrientation) {
    const auto g = sample(unit_lattice(101), [](const Vec2& x) { return (x - Vec2(50, 50)).norm() - 20.0; });
    const auto m = extract_boundary(g);
    EXPECT_NO_THROW(bem2d::check_watertight(m));
    ASSERT_EQ(chains(m).size(), 1u);
    EXPECT_LE(std::abs(perimeter(m) - 2 * pi * 20) / (2 * pi * 20), 0.02);
    EXPECT_NEAR(enclosed_area(m), pi * 400, 0.01 * pi * 400);
    expect_oriented(g, m, 0.3);
}

TEST(Extract, CrossingsLieOnTheZeroLevel) {
    const auto g = sample(unit_lattice(41), [](const Vec2& x) {
        return std::sin(0.3 * x.x()) * std::cos(0.25 * x.y()) - 0.2;
    });
    const auto m = extract_boundary(g, EdgeMode::open);
    ASSERT_FALSE(m.empty());
    for (const auto& p : m.nodes) EXPECT_LT(std::abs(g.interpolate(p)), 1e-12);
    expect_oriented(g, m, 0.05);
}

TEST(Extract, AffineFieldMidpointsOnZeroLevel) {
    // Bilinear interpolation reproduces affine fields, so segment midpoints
    // sit on the zero level as well.
    for (const Vec2& dir : {Vec2(1, 0.3), Vec2(-0.4, 1), Vec2(0.7, -0.7)}) {
        const auto g = sample(unit_lattice(31), [&](const Vec2& x) { return dir.dot(x - Vec2(15.2, 14.7)); });
        double lo = 1e300, hi = -1e300;
        for (double v : g.values) lo = std::min(lo, v), hi = std::max(hi, v);
        const auto m = extract_boundary(g, EdgeMode::open);
        ASSERT_FALSE(m.empty());
        for (std::size_t e = 0; e < m.size(); ++e)
            EXPECT_LE(std::abs(g.interpolate(m.midpoint(e))), 1e-6 * (hi - lo));
    }
}

TEST(Extract, SaddleUsesCellCentre) {
    Lattice l = unit_lattice(2);
    // Diagonal pattern: corners 0 and 2 negative, 1 and 3 positive.
    LevelSetGrid g(l, 0.0);
    g(0, 0) = -1.0;
    g(1, 1) = -1.0;
    g(1, 0) = 0.5;
    g(0, 1) = 0.5;  // centre average -0.25: negative corners joined
    auto m = extract_boundary(g, EdgeMode::open);
    ASSERT_EQ(m.size(), 2u);
    // Each segment cuts off a positive corner: its midpoint is nearer to
    // (1,0) or (0,1) than to the centre.
    for (std::size_t e = 0; e < m.size(); ++e) {
        const Vec2 mid = m.midpoint(e);
        const double d = std::min((mid - Vec2(1, 0)).norm(), (mid - Vec2(0, 1)).norm());
        EXPECT_LT(d, (mid - Vec2(0.5, 0.5)).norm());
    }
    g(1, 0) = 2.0;
    g(0, 1) = 2.0;  // centre average +1: positive corners joined
    m = extract_boundary(g, EdgeMode::open);
    ASSERT_EQ(m.size(), 2u);
    for (std::size_t e = 0; e < m.size(); ++e) {
        const Vec2 mid = m.midpoint(e);
        const double d = std::min((mid - Vec2(0, 0)).norm(), (mid - Vec2(1, 1)).norm());
        EXPECT_LT(d, (mid - Vec2(0.5, 0.5)).norm());
    }
}

TEST(Extract, ZeroOnLatticePointsGivesNoDegenerateSegments) {
    // |x| + |y| - 10 vanishes on many lattice points.
    const auto g = sample(unit_lattice(41), [](const Vec2& x) {
        return std::abs(x.x() - 20) + std::abs(x.y() - 20) - 10.0;
    });
    const auto m = extract_boundary(g);
    EXPECT_NO_THROW(bem2d::check_watertight(m));
    EXPECT_NEAR(enclosed_area(m), 200.0, 1e-9);
}

TEST(Regularize, UniformLoopIsFixedPoint) {
    BoundaryMesh m;
    m.add_circle(Vec2(3, 4), 10.0, 63, Interface::dielectric);
    const double target = m.length(0);
    const auto r = regularize_mesh(m, target);
    ASSERT_EQ(r.size(), m.size());
    for (std::size_t k = 0; k < m.nodes.size(); ++k) EXPECT_LE((r.nodes[k] - m.nodes[k]).norm(), 1e-9);
}

TEST(Regularize, SquareByArclength) {
    BoundaryMesh m;
    m.add_loop({{0, 0}, {0, 10}, {10, 10}, {10, 0}}, Interface::dielectric);
    const auto r = regularize_mesh(m, 1.0);
    EXPECT_GE(r.size(), 39u);
    EXPECT_LE(r.size(), 41u);
    for (std::size_t e = 0; e < r.size(); ++e) {
        EXPECT_GE(r.length(e), 0.5);
        EXPECT_LE(r.length(e), 1.5);
    }
    EXPECT_NO_THROW(bem2d::check_watertight(r));
}

TEST(Regularize, LongSegmentIsSplit) {
    // Unit segments on three sides of a square, one segment of length 10.
    std::vector<Vec2> pts;
    for (int k = 0; k <= 10; ++k) pts.push_back({double(k), 0.0});
    for (int k = 10; k >= 0; --k) pts.push_back({double(k), 10.0});
    for (int k = 9; k >= 1; --k) pts.push_back({0.0, double(k)});
    BoundaryMesh m;
    m.add_loop(pts, Interface::dielectric);
    const auto r = regularize_mesh(m, 1.0);
    double lo = 1e300, hi = 0;
    for (std::size_t e = 0; e < r.size(); ++e) lo = std::min(lo, r.length(e)), hi = std::max(hi, r.length(e));
    EXPECT_LE(hi / lo, 2.0);
}

TEST(Regularize, TinyLoopsDeleted) {
    BoundaryMesh m;
    m.add_circle(Vec2(0, 0), 0.3, 8, Interface::dielectric);
    m.add_circle(Vec2(10, 0), 5.0, 40, Interface::dielectric);
    const auto r = regularize_mesh(m, 1.0);
    EXPECT_EQ(chains(r).size(), 1u);
}

TEST(Regularize, PreservesArea) {
    const auto g = sample(unit_lattice(101), [](const Vec2& x) {
        return std::min((x - Vec2(30, 50)).norm() - 12.0, (x - Vec2(70, 45)).norm() - 8.0);
    });
    const auto m = extract_boundary(g);
    const auto r = regularize_mesh(m, 1.0);
    EXPECT_NEAR(enclosed_area(r), enclosed_area(m), 0.05 * enclosed_area(m));
    EXPECT_NO_THROW(bem2d::check_watertight(r));
}

TEST(RD, NoReactionNoDiffusionIsIdentity) {
    const auto g = sample(unit_lattice(21), [](const Vec2& x) { return std::tanh(x.x() - 10.3); });
    const TDField td(g.lattice, 0.0);
    const auto out = rd_update(g, td, {1.0, 0.0, 1.0, 0.1, 3});
    EXPECT_EQ(out.values, g.values);
}

TEST(RD, PointwiseReaction) {
    const LevelSetGrid g(unit_lattice(9), 0.5);
    const TDField td(g.lattice, -1.0);
    const auto out = rd_update(g, td, {1.0, 0.0, 1.0, 0.1, 1});
    for (double v : out.values) EXPECT_NEAR(v, 0.4, 1e-15);
    // sgn(phi) flips the reaction in the material.
    const LevelSetGrid neg(unit_lattice(9), -0.5);
    for (double v : rd_update(neg, td, {1.0, 0.0, 1.0, 0.1, 1}).values) EXPECT_NEAR(v, -0.4, 1e-15);
}

TEST(RD, ClipsToUnitRange) {
    const LevelSetGrid g(unit_lattice(9), 0.9);
    const TDField td(g.lattice, 5.0);
    for (double v : rd_update(g, td, {1.0, 0.0, 1.0, 0.1, 1}).values) EXPECT_EQ(v, 1.0);
}

TEST(RD, DiffusionMaximumPrinciple) {
    auto g = sample(unit_lattice(31), [](const Vec2& x) { return std::sin(0.7 * x.x()) * std::cos(0.4 * x.y()); });
    const TDField td(g.lattice, 0.0);
    double hi = 1.0, lo = -1.0;
    for (int s = 0; s < 10; ++s) {
        g = rd_update(g, td, {1.0, 0.05, 10.0, 0.2, 1});
        const auto [mn, mx] = std::minmax_element(g.values.begin(), g.values.end());
        EXPECT_LE(*mx, hi + 1e-14);
        EXPECT_GE(*mn, lo - 1e-14);
        hi = *mx;
        lo = *mn;
    }
}

TEST(RD, DiffusionConservesMeanWithZeroFluxWalls) {
    auto g = sample(unit_lattice(21), [](const Vec2& x) { return 0.5 * std::sin(0.3 * x.x() + 0.2 * x.y()); });
    const detail::LatticeOperators ops(g.lattice);
    auto mean = [&](const LevelSetGrid& q) {
        double s = 0;
        for (std::size_t k = 0; k < q.values.size(); ++k) s += ops.mass[static_cast<Index>(k)] * q.values[k];
        return s;
    };
    const double before = mean(g);
    g = rd_update(g, TDField(g.lattice, 0.0), {1.0, 1.0, 5.0, 1.0, 1});
    EXPECT_NEAR(mean(g), before, 1e-10);
}

TEST(RD, SmallDiffusionKeepsSignPattern) {
    const auto g = sample(unit_lattice(51), [](const Vec2& x) { return ((x - Vec2(25, 25)).norm() - 12.3) / 5.0; },
                          true);
    const auto out = rd_update(g, TDField(g.lattice, 0.0), {0.0, 0.01, 1.0, 1.0, 5});
    for (std::size_t k = 0; k < g.values.size(); ++k) EXPECT_EQ(g.values[k] < 0, out.values[k] < 0) << k;
}

TEST(RD, RejectsBadStep) {
    const LevelSetGrid g(unit_lattice(5), 0.5);
    EXPECT_THROW(rd_update(g, TDField(g.lattice, 0.0), {1.0, 0.0, 1.0, 0.0, 1}), Error);
    EXPECT_THROW(rd_update(g, TDField(g.lattice, 0.0), {1.0, 0.0, 1.0, -1.0, 1}), Error);
}

TEST(InitFromTD, PositiveFieldGivesEmptyDevice) {
    const auto l = unit_lattice(101);
    const auto g = init_from_td(TDField(l, 1.0), Vec2(50, 50), 50.0, 1.0);
    for (double v : g.values) EXPECT_NEAR(v, 1.0, 1e-12);
    EXPECT_TRUE(extract_boundary(g).empty());
}

TEST(InitFromTD, NegativeFieldGivesDisc) {
    const auto l = unit_lattice(101);
    const auto g = init_from_td(TDField(l, -1.0), Vec2(50, 50), 50.0, 0.0);
    for (std::size_t k = 0; k < l.size(); ++k)
        EXPECT_EQ(g.values[k], (l.point(k) - Vec2(50, 50)).norm() <= 50.0 ? -1.0 : 1.0);
}

TEST(InitFromTD, SignPatternMatchesSetDefinition) {
    const auto l = unit_lattice(61);
    TDField td(l, 0.0);
    for (std::size_t k = 0; k < l.size(); ++k) {
        const Vec2 x = l.point(k);
        td.values[k] = std::sin(0.2 * x.x()) + std::cos(0.15 * x.y()) - 0.3;
    }
    const Vec2 c(30, 30);
    const auto g = init_from_td(td, c, 25.0, 0.0);
    for (std::size_t k = 0; k < l.size(); ++k) {
        const bool in_set = td.values[k] <= 0.0 && (l.point(k) - c).norm() <= 25.0;
        EXPECT_EQ(classify(g, l.point(k)) == Phase::omega2, in_set) << k;
    }
    // Smoothing leaves a clean closed contour.
    const auto s = init_from_td(td, c, 25.0, 1.0);
    EXPECT_NO_THROW(bem2d::check_watertight(regularize_mesh(extract_boundary(s), 1.0)));
}

TEST(KeepOut, ForcesVacuum) {
    const auto l = unit_lattice(21);
    KeepOut ko;
    ko.add_disc(l, Vec2(10, 10), 3.0);
    LevelSetGrid g(l, -1.0);
    ko.apply(g);
    TDField t(l, -2.0);
    ko.apply(t);
    for (std::size_t k = 0; k < l.size(); ++k) {
        const bool in = (l.point(k) - Vec2(10, 10)).norm() <= 3.0;
        EXPECT_EQ(g.values[k], in ? 1.0 : -1.0);
        EXPECT_EQ(t.values[k], in ? 0.0 : -2.0);
    }
}

TEST(GridIO, RoundTrip) {
    Lattice l = unit_lattice(7, 0.37);
    l.origin = Vec2(-1.25, 3.5);
    const auto g = sample(l, [](const Vec2& x) { return std::sin(x.x() * 1.7) / 3.0 + x.y() * 1e-7; });
    std::stringstream ss;
    write_grid(ss, g);
    std::string header;
    std::getline(std::stringstream(ss.str()), header);
    EXPECT_EQ(header.substr(0, 4), "7 7 ");
    const auto back = read_grid(ss);
    EXPECT_TRUE(back.lattice == g.lattice);
    EXPECT_EQ(back.values, g.values);
}

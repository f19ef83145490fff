#include "devruled/objective.hpp"
#include "oracles.hpp"

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include <random>

using namespace devruled;

namespace {

struct Sample {
    RuledSurface surface;
    RulingSequence rulings;
    std::vector<double> params;
    NormalField normals;
};

Sample random_setup(std::uint64_t seed, std::size_t count = 6, int M = 20) {
    std::mt19937_64 rng(seed);
    SplineCurve c0 = oracle::random_curve(rng, count);
    SplineCurve c1 = oracle::random_curve(rng, count);
    RulingSequence r = oracle::random_rulings(rng, count);
    std::vector<double> t = oracle::sorted_params(rng, count);
    NormalField n = oracle::random_normals(rng, M);
    return {RuledSurface(c0, c1), r, t, n};
}

OptimizationProblem problem_of(const Sample& s, Mode mode, const Weights& w,
                               ClosenessForm form = ClosenessForm::Symmetric) {
    return {mode, s.surface, s.rulings, s.params, s.normals.params, w, form};
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST(Terms, MatchDirectSummation) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Sample s = random_setup(seed);
        EXPECT_LT(rel(f_dev(s.surface, s.normals), oracle::f_dev(s.surface, s.normals)), 1e-10);
        EXPECT_LT(rel(f_width(s.surface, s.normals.params), oracle::f_width(s.surface, s.normals.params)), 1e-10);
        const Points targets = s.rulings.p_points();
        EXPECT_LT(rel(f_interior(s.surface.c1(), targets, s.params), oracle::f_interior(s.surface.c1(), targets, s.params)),
                  1e-10);
        EXPECT_LT(rel(f_closeness(s.surface, s.rulings, s.params),
                      oracle::f_closeness(s.surface, s.rulings, s.params, false)),
                  1e-10);
        EXPECT_LT(rel(f_closeness(s.surface, s.rulings, s.params, ClosenessForm::Literal),
                      oracle::f_closeness(s.surface, s.rulings, s.params, true)),
                  1e-10);
        double unit = 0.0;
        for (const auto& n : s.normals.normals) unit += std::pow(n.squaredNorm() - 1.0, 2);
        EXPECT_LT(rel(unit_penalty(s.normals), unit), 1e-12);
    }
}

TEST(Terms, EnergyMatchesAdaptiveSimpson) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Sample s = random_setup(seed, 5 + seed);
        EXPECT_LT(rel(f_energy(s.surface.c0()), oracle::energy(s.surface.c0())), 1e-8);
        EXPECT_LT(rel(f_energy(s.surface.c1()), oracle::energy(s.surface.c1())), 1e-8);
    }
    const SplineCurve line(1, bezier_knots(1), {Vec3(0, 0, 0), Vec3(1, 0, 0)});
    EXPECT_THROW((void)f_energy(line), InvalidInput);
}

TEST(Terms, ZeroCases) {
    // Straight line with Greville-placed control points: C'' = 0.
    std::mt19937_64 rng(3);
    const SplineCurve shape = oracle::random_curve(rng, 8);
    const auto& u = shape.knots();
    Points line;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        const double xi = (u[i + 1] + u[i + 2] + u[i + 3]) / 3.0;
        line.push_back(Vec3(1, 2, 3) + xi * Vec3(0.5, -1, 2));
    }
    EXPECT_LT(f_energy(shape.with_control_points(line)), 1e-12);

    // Planar strip with the plane normal.
    Points c0 = shape.control_points(), c1 = shape.control_points();
    for (auto& v : c0) v.z() = 0.0;
    for (auto& v : c1) v = Vec3(v.x() + 0.3, v.y() + 2.0, 0.0);
    const RuledSurface planar(shape.with_control_points(c0), shape.with_control_points(c1));
    NormalField n;
    for (int k = 0; k <= 50; ++k) {
        n.params.push_back(k / 50.0);
        n.normals.push_back(Vec3(0, 0, 1));
    }
    EXPECT_LT(f_dev(planar, n), 1e-12);
    EXPECT_LT(unit_penalty(n), 1e-12);

    // Cylinder: constant offset, normals orthogonal to the tangent and the offset.
    const Vec3 off(0, 0, 1.5);
    Points c2 = c0;
    for (auto& v : c2) v += off;
    const RuledSurface cyl(planar.c0(), shape.with_control_points(c2));
    NormalField nc = n;
    for (std::size_t k = 0; k < nc.size(); ++k) {
        nc.normals[k] = planar.c0().evaluate(nc.params[k], 1).cross(off).normalized();
    }
    EXPECT_LT(f_dev(cyl, nc), 1e-12);
    EXPECT_LT(f_width(cyl, nc.params), 1e-12);
}

TEST(Evaluator, TermsAgreeWithFreeFunctions) {
    const Sample s = random_setup(9);
    const Weights w{0.3, 0.2, 0.0, 0.7, 1.1};
    const Evaluator ev = assemble(problem_of(s, Mode::Relaxed, w));
    const auto x = ev.pack(s.surface, s.normals);
    const TermValues tv = ev.terms(x);
    EXPECT_LT(rel(tv.dev, oracle::f_dev(s.surface, s.normals)), 1e-10);
    EXPECT_LT(rel(tv.width, oracle::f_width(s.surface, s.normals.params)), 1e-10);
    EXPECT_LT(rel(tv.closeness, oracle::f_closeness(s.surface, s.rulings, s.params, false)), 1e-10);
    EXPECT_LT(rel(tv.energy_c0, oracle::energy(s.surface.c0())), 1e-8);
    EXPECT_LT(rel(tv.energy_c1, oracle::energy(s.surface.c1())), 1e-8);
    std::vector<double> g(ev.dimension());
    const double total = ev(x, g);
    const double expect = tv.dev + w.unit * tv.unit + w.energy * (tv.energy_c0 + tv.energy_c1) + w.width * tv.width +
                          w.closeness * tv.closeness;
    EXPECT_LT(rel(total, expect), 1e-13);
}

TEST(Evaluator, LayoutAndRoundTrip) {
    const Sample s = random_setup(4, 7, 10);
    const Evaluator rel_ev = assemble(problem_of(s, Mode::Relaxed, Weights::relaxed_defaults()));
    const Evaluator fix_ev = assemble(problem_of(s, Mode::FixedBoundary, Weights::fixed_boundary_defaults()));
    EXPECT_EQ(rel_ev.dimension(), 3u * (5 + 5 + 11));
    EXPECT_EQ(fix_ev.dimension(), 3u * (5 + 11));
    const auto x = rel_ev.pack(s.surface, s.normals);
    EXPECT_EQ(rel_ev.unpack_surface(x).c0(), s.surface.c0());
    EXPECT_EQ(rel_ev.unpack_surface(x).c1(), s.surface.c1());
    EXPECT_EQ(rel_ev.unpack_normals(x).normals, s.normals.normals);
    const auto y = fix_ev.pack(s.surface, s.normals);
    EXPECT_EQ(fix_ev.unpack_surface(y).c0(), s.surface.c0());
    EXPECT_THROW((void)rel_ev.unpack_surface(y), InvalidInput);
}

namespace {

double worst_gradient_error(Mode mode, const Weights& w, ClosenessForm form, std::uint64_t seed) {
    const Sample s = random_setup(seed, 7, 15);
    const Evaluator ev = assemble(problem_of(s, mode, w, form));
    std::mt19937_64 rng(seed * 977);
    std::normal_distribution<double> N(0.0, 0.3);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x = ev.pack(s.surface, s.normals);
        for (double& v : x) v += N(rng);
        std::vector<double> g(ev.dimension()), scratch(ev.dimension());
        ev(x, g);
        const auto fd = oracle::fd_gradient(
            [&](const std::vector<double>& y) { return ev(y, scratch); }, x, 1e-6);
        worst = std::max(worst, oracle::relative_error(g, fd));
    }
    return worst;
}

}  // namespace

TEST(Evaluator, FixedBoundaryGradientMatchesFiniteDifferences) {
    EXPECT_LT(worst_gradient_error(Mode::FixedBoundary, Weights::fixed_boundary_defaults(), ClosenessForm::Symmetric, 1),
              1e-5);
    EXPECT_LT(worst_gradient_error(Mode::FixedBoundary, {0.5, 0.3, 2.0, 0.0, 0.7}, ClosenessForm::Symmetric, 2), 1e-5);
}

TEST(Evaluator, RelaxedGradientMatchesFiniteDifferences) {
    EXPECT_LT(worst_gradient_error(Mode::Relaxed, Weights::relaxed_defaults(), ClosenessForm::Symmetric, 3), 1e-5);
    EXPECT_LT(worst_gradient_error(Mode::Relaxed, {0.5, 0.3, 0.0, 2.0, 0.7}, ClosenessForm::Symmetric, 4), 1e-5);
    EXPECT_LT(worst_gradient_error(Mode::Relaxed, {0.5, 0.3, 0.0, 2.0, 0.7}, ClosenessForm::Literal, 5), 1e-5);
}

TEST(Evaluator, QuadraticInControlPoints) {
    // With the normals frozen, every term is a polynomial of degree <= 4 in
    // the control points and fitting-only objectives are exactly quadratic.
    const Sample s = random_setup(12);
    const Evaluator ev = assemble(problem_of(s, Mode::Relaxed, {0.4, 0.0, 0.0, 1.3, 0.0}));
    const auto x0 = ev.pack(s.surface, s.normals);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> N;
    std::vector<double> d(x0.size(), 0.0);
    for (std::size_t i = 0; i < ev.normals_offset(); ++i) d[i] = N(rng);
    std::vector<double> g(x0.size());
    auto f = [&](double a) {
        std::vector<double> x = x0;
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += a * d[i];
        return ev(x, g);
    };
    // Third difference of a quadratic vanishes.
    const double third = f(2) - 3 * f(1) + 3 * f(0) - f(-1);
    EXPECT_LT(std::abs(third), 1e-9 * std::max(1.0, std::abs(f(0))));
}

TEST(Evaluator, RigidMotionInvariance) {
    const Sample s = random_setup(21);
    const Eigen::Matrix3d R = Eigen::AngleAxisd(0.7, Vec3(1, 2, -0.5).normalized()).toRotationMatrix();
    const Vec3 shift(0.3, -1.2, 2.0);
    auto move = [&](const SplineCurve& c) {
        Points p = c.control_points();
        for (auto& v : p) v = R * v + shift;
        return c.with_control_points(p);
    };
    std::vector<Ruling> r;
    for (const auto& l : s.rulings.rulings()) r.push_back({R * l.Q + shift, R * l.P + shift});
    NormalField n = s.normals;
    for (auto& v : n.normals) v = R * v;
    const Sample moved{RuledSurface(move(s.surface.c0()), move(s.surface.c1())), RulingSequence(r), s.params, n};
    const Weights w{0.2, 0.1, 0.0, 1.0, 1.0};
    const Evaluator a = assemble(problem_of(s, Mode::Relaxed, w));
    const Evaluator b = assemble(problem_of(moved, Mode::Relaxed, w));
    std::vector<double> g(a.dimension());
    const double fa = a(a.pack(s.surface, s.normals), g);
    const double fb = b(b.pack(moved.surface, moved.normals), g);
    EXPECT_LT(rel(fb, fa), 1e-10);
}

TEST(InitNormals, UnitAndOrthogonalToRulings) {
    const Sample s = random_setup(6);
    const NormalField n = init_normals(s.surface, 30);
    ASSERT_EQ(n.size(), 31u);
    for (std::size_t k = 0; k < n.size(); ++k) {
        EXPECT_NEAR(n.normals[k].norm(), 1.0, 1e-12);
        const double t = n.params[k];
        const Vec3 rule = s.surface.c1().evaluate(t) - s.surface.c0().evaluate(t);
        EXPECT_LT(std::abs(n.normals[k].dot(rule.normalized())), 1e-10);
    }
}

TEST(Weights, Defaults) {
    const Weights f = Weights::fixed_boundary_defaults(), r = Weights::relaxed_defaults();
    EXPECT_EQ(f, (Weights{0.001, 0.00001, 1.0, 0.0, 1.0}));
    EXPECT_EQ(r, (Weights{0.00001, 0.00001, 0.0, 1.0, 1.0}));
    EXPECT_THROW((Weights{-1, 0, 0, 0, 1}.validate()), InvalidInput);
}

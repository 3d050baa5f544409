#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cmalab/envelope.hpp"
#include "cmalab/toric.hpp"

using namespace cmalab;

namespace {

constexpr double pi = std::numbers::pi;

ConvexSample quadratic(double lo, double hi, std::size_t n) {
    return make_sample({uniform_axis(lo, hi, n)}, [](Point2 p) { return 0.5 * p[0] * p[0]; });
}

// Random convex data on a dyadic axis with dyadic values: every product and
// difference in the transform is exact in double precision.
ConvexSample random_dyadic(std::mt19937_64& rng, std::size_t n = 64) {
    std::uniform_int_distribution<int> step(0, 6);
    std::vector<double> axis(n + 1), vals(n + 1);
    for (std::size_t k = 0; k <= n; ++k) axis[k] = -2.0 + static_cast<double>(k) / 16.0;
    double slope = -static_cast<double>(n) / 2.0, v = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
        vals[k] = v / 64.0;
        slope += step(rng);
        v += slope;
    }
    return make_sample({axis}, [&](Point2 p) { return vals[static_cast<std::size_t>(std::lround((p[0] + 2.0) * 16.0))]; });
}

RayData default_ray(PiecewiseLinear F, std::vector<double> t = {0.0, 1.0, 2.0, 4.0}) {
    return {make_sample({uniform_axis(-1.0, 1.0, 512)}, [](Point2 p) { return 0.5 * p[0] * p[0]; }, Polytope::interval(-1, 1)),
            std::move(F), std::move(t), {uniform_axis(-0.8125, 0.8125, 416)}};
}

}  // namespace

TEST_CASE("polytopes") {
    CHECK_THROWS_AS(Polytope::interval(1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(Polytope::polygon({{0, 0}, {0, 1}, {1, 0}}), std::invalid_argument);  // clockwise
    const Polytope tri = Polytope::polygon({{0, 0}, {1, 0}, {0, 1}});
    CHECK(tri.contains(Point2{0.25, 0.25}));
    CHECK(tri.contains(Point2{0.5, 0.5}));
    CHECK(!tri.contains(Point2{0.6, 0.6}));
    const Polytope I = Polytope::interval(-1, 1);
    CHECK(I.contains(1.0));
    CHECK(!I.contains(1.1));
    CHECK(I.contains(Polytope::interval(-0.5, 0.5)));
    CHECK(!Polytope::interval(-0.5, 0.5).contains(I));
}

TEST_CASE("self-dual quadratic") {
    const ConvexSample v = quadratic(-3, 3, 256);
    const ConvexSample s = legendre(v, {uniform_axis(-2, 2, 256)});
    double e = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) e = std::max(e, std::abs(s.values[k] - 0.5 * s.axes[0][k] * s.axes[0][k]));
    CHECK(e <= 1e-3);
}

TEST_CASE("transform of |x| vanishes on the slope range") {
    const ConvexSample v = make_sample({uniform_axis(-2, 2, 64)}, [](Point2 p) { return std::abs(p[0]); });
    const ConvexSample s = legendre(v, {uniform_axis(-1, 1, 32)});
    for (double y : s.values) CHECK(y == 0.0);
}

TEST_CASE("legendre rejects bad input") {
    const ConvexSample bad = make_sample({uniform_axis(-1, 1, 16)}, [](Point2 p) { return std::cos(3 * p[0]); });
    CHECK(!is_discretely_convex(bad));
    CHECK(min_second_difference(bad) < 0.0);
    CHECK_THROWS_AS(legendre(bad, {uniform_axis(-1, 1, 16)}), std::invalid_argument);
    ConvexSample masked = quadratic(-1, 1, 8);
    masked.active.assign(masked.size(), false);
    CHECK_THROWS_AS(legendre(masked, {uniform_axis(-1, 1, 8)}), std::invalid_argument);
}

TEST_CASE("monotone sweep matches brute force") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const ConvexSample v = random_dyadic(rng);
        const auto Y = std::vector<std::vector<double>>{uniform_axis(-5, 5, 77)};
        const ConvexSample a = legendre(v, Y, LegendreMethod::brute_force);
        const ConvexSample b = legendre(v, Y, LegendreMethod::monotone);
        for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(a.values[k] - b.values[k]) <= 1e-12);
    }
}

TEST_CASE("triple transform equals single transform") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const ConvexSample v = random_dyadic(rng);
        const std::vector<std::vector<double>> Y{uniform_axis(-4, 4, 128)};
        const ConvexSample l1 = legendre(v, Y);
        const ConvexSample l2 = legendre(l1, v.axes);
        const ConvexSample l3 = legendre(l2, Y);
        for (std::size_t k = 0; k < l1.size(); ++k) CHECK(l3.values[k] == l1.values[k]);
    }
}

TEST_CASE("order reversal") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const std::vector<std::vector<double>> Y{uniform_axis(-3, 3, 90)};
    for (int trial = 0; trial < 20; ++trial) {
        const double a = 0.5 + U(rng), b = U(rng) - 0.5, c = U(rng);
        const ConvexSample v =
            make_sample({uniform_axis(-2, 2, 100)}, [&](Point2 p) { return a * p[0] * p[0] + b * p[0]; });
        const ConvexSample w = make_sample({uniform_axis(-2, 2, 100)},
                                           [&](Point2 p) { return a * p[0] * p[0] + b * p[0] + c + 0.1 * std::abs(p[0]); });
        const ConvexSample vs = legendre(v, Y), ws = legendre(w, Y);
        for (std::size_t k = 0; k < vs.size(); ++k) CHECK(vs.values[k] >= ws.values[k]);
    }
}

TEST_CASE("two-dimensional transform of a quadratic") {
    const auto ax = uniform_axis(-2, 2, 40);
    const ConvexSample v = make_sample({ax, ax}, [](Point2 p) { return 0.5 * (p[0] * p[0] + p[1] * p[1]); });
    const auto yx = uniform_axis(-1, 1, 20);
    const ConvexSample s = legendre(v, {yx, yx});
    double e = 0.0;
    for (std::size_t n = 0; n < s.size(); ++n) {
        const Point2 y = s.point(n);
        e = std::max(e, std::abs(s.values[n] - 0.5 * (y[0] * y[0] + y[1] * y[1])));
    }
    CHECK(e <= 1e-2);
}

TEST_CASE("toric envelope") {
    const ConvexSample v = quadratic(-2, 2, 128);
    // full dual range gives v back
    const ConvexSample same = toric_envelope(v, v.dual);
    for (std::size_t k = 0; k < v.size(); ++k) CHECK(std::abs(same.values[k] - v.values[k]) <= 1e-10);

    const ConvexSample e1 = toric_envelope(v, Polytope::interval(-1, 1));
    const ConvexSample e2 = toric_envelope(v, Polytope::interval(-0.5, 0.5));
    bool strictly = false;
    for (std::size_t k = 0; k < v.size(); ++k) {
        CHECK(e1.values[k] <= v.values[k] + 1e-10);
        CHECK(e2.values[k] <= e1.values[k] + 1e-10);
        strictly = strictly || e2.values[k] < e1.values[k] - 1e-6;
    }
    CHECK(strictly);
    CHECK(is_discretely_convex(e1));
    const double h = v.axes[0][1] - v.axes[0][0];
    for (std::size_t k = 0; k + 1 < v.size(); ++k) {
        const double slope = (e2.values[k + 1] - e2.values[k]) / h;
        CHECK(slope >= -0.5 - h);
        CHECK(slope <= 0.5 + h);
    }
    CHECK_THROWS_AS(toric_envelope(v, Polytope::interval(-3, 3)), std::invalid_argument);
}

TEST_CASE("duality envelope agrees with the relaxation oracle") {
    double prev = 0.0;
    for (std::size_t n : {128, 256}) {
        const Grid c = make_grid(1, {n}, {1.0}, {Boundary::periodic});
        const ReferenceData ref = make_reference("custom", c, {{"a0", 0.5}, {"a1", 1.0}});
        const ScalarField ud = envelope_by_duality(ref, custom_preset_potential(ref, 0.0));
        PsorOptions opt;
        opt.relax = 1.98;
        opt.tol = 1e-11;
        opt.max_sweeps = 2000000;
        const ObstacleSolution up = psor_envelope(ref, 0.0, opt);
        REQUIRE(up.converged);
        const double gap = sup_diff(ud, up.u);
        CHECK(gap <= 10.0 / static_cast<double>(n));
        if (prev > 0.0) CHECK(gap <= 0.65 * prev);
        prev = gap;
        CHECK(ud.max() <= 0.0);
    }
    const Grid c = make_grid(1, {64}, {1.0}, {Boundary::periodic});
    const ReferenceData ref = make_reference("custom", c, {{"a0", 0.5}, {"a1", 1.0}});
    CHECK_THROWS_AS(envelope_by_duality(ref, custom_preset_potential(ref, 0.0), 2), std::invalid_argument);
}

TEST_CASE("piecewise-linear data") {
    const PiecewiseLinear F = pl_from_breakpoints({-1.0, 0.5}, {0.25}, 0.1);
    CHECK(F(Point2{0.0, 0.0}) == doctest::Approx(0.1));
    CHECK(F(Point2{1.0, 0.0}) - F(Point2{0.5, 0.0}) == doctest::Approx(0.25));
    CHECK_THROWS_AS(pl_from_breakpoints({1.0, 0.5}, {0.0}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(pl_from_breakpoints({0.0, 1.0, 2.0}, {0.5, 0.2}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(pl_from_breakpoints({0.0, 1.0}, {}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(pl_from_pieces({}), std::invalid_argument);
    const PiecewiseLinear G = pl_from_pieces({{{1.0, 0.0, 0.0}}, {{0.0, 1.0, 0.0}}});
    CHECK(G(Point2{0.3, 0.7}) == doctest::Approx(0.7));
}

TEST_CASE("ray with constant F is a pure shift") {
    const double c = 0.375;
    const RayOutput out = toric_ray(default_ray(pl_from_breakpoints({0.0}, {}, c)));
    for (std::size_t j = 0; j < out.t_values.size(); ++j)
        for (std::size_t k = 0; k < out.potentials[j].size(); ++k)
            CHECK(std::abs(out.potentials[j].values[k] - (out.potentials[0].values[k] - out.t_values[j] * c)) <= 1e-10);
    const RayAudit a = ray_c11_audit(out);
    CHECK(a.hcma_residual <= 1e-10);
    CHECK(!a.crease_detected);
}

TEST_CASE("ray with affine F is a translation") {
    const double m = 1.0 / 32.0;
    const RayOutput out = toric_ray(default_ray(pl_from_breakpoints({m}, {}, 0.0)));
    const auto& x = out.potentials[0].axes[0];
    const double h = x[1] - x[0];
    for (std::size_t j = 0; j < out.t_values.size(); ++j) {
        const auto shift = static_cast<std::size_t>(std::lround(out.t_values[j] * m / h));
        for (std::size_t k = shift; k < x.size(); ++k)
            CHECK(std::abs(out.potentials[j].values[k] - out.potentials[0].values[k - shift]) <= 1e-10);
    }
    const RayAudit a = ray_c11_audit(out);
    CHECK(a.hcma_residual <= 1e-10);
    CHECK(!a.crease_detected);
}

TEST_CASE("one-breakpoint ray: crease, bounded second derivatives, geodesic inequality") {
    const RayOutput out = toric_ray(default_ray(pl_from_breakpoints({-1.0 / 16, 1.0 / 16}, {0.5}, 1.0 / 32)));
    for (const auto& p : out.potentials) CHECK(is_discretely_convex(p));
    // t = 1 is the midpoint of 0 and 2
    for (std::size_t k = 0; k < out.potentials[1].size(); ++k)
        CHECK(out.potentials[1].values[k] <=
              0.5 * (out.potentials[0].values[k] + out.potentials[2].values[k]) + 1e-8);
    const RayAudit a = ray_c11_audit(out);
    const double h = out.potentials[0].axes[0][1] - out.potentials[0].axes[0][0];
    CHECK(a.crease_detected);
    CHECK(!a.crease_images.empty());
    CHECK(a.hcma_residual <= 10 * h);
    CHECK(a.c11_ratio <= 2.0);
    CHECK(a.crease_jump > 0.25);
    CHECK(a.excluded_nodes > 0);
    CHECK(a.audited_nodes > a.excluded_nodes);
}

TEST_CASE("ray input checks") {
    const PiecewiseLinear F = pl_from_breakpoints({0.0}, {}, 0.0);
    CHECK_THROWS_AS(ray_c11_audit(toric_ray(default_ray(F, {0.0, 1.0}))), std::invalid_argument);
    CHECK_THROWS_AS(toric_ray(default_ray(F, {1.0, 0.0, 2.0})), std::invalid_argument);
    CHECK_THROWS_AS(toric_ray(default_ray(F, {-1.0, 0.0, 2.0})), std::invalid_argument);
    RayData bad = default_ray(F);
    bad.u0 = make_sample({uniform_axis(-1, 1, 64)}, [](Point2 p) { return std::cos(4 * pi * p[0]); });
    CHECK_THROWS_AS(toric_ray(bad), std::invalid_argument);
    RayData flat = default_ray(pl_from_pieces({{{0.0, 0.0, 0.0}}}));
    CHECK_THROWS_AS(toric_ray(flat), std::invalid_argument);
}

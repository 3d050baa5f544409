#include <doctest.h>

#include <cmath>

#include "cmalab/reference.hpp"

using namespace cmalab;

namespace {

Grid torus(std::size_t n, double L = 1.0) {
    return make_grid(2, {n, n}, {L, L}, {Boundary::periodic, Boundary::periodic});
}

double mean(const ScalarField& f) {
    double s = 0.0;
    for (double v : f.values()) s += v;
    return s / static_cast<double>(f.size());
}

// max |∂psi|² e^{C1 psi} with C1 = 2/kappa.
double psi_gradient_profile(double sigma) {
    const ReferenceData ref = make_reference("degenerate_point", torus(128), {{"sigma", sigma}});
    const ScalarField G = gradient_sq(ref.psi);
    double m = 0.0;
    for (std::size_t n = 0; n < G.size(); ++n) m = std::max(m, G[n] * std::exp(2.0 / ref.kappa * ref.psi[n]));
    return m;
}

}  // namespace

TEST_CASE("kahler preset is the identity") {
    const Grid c = make_grid(1, {256}, {1.0}, {Boundary::periodic});
    const ReferenceData ref = make_reference("kahler", c);
    for (std::size_t n = 0; n < c.node_count(); ++n) {
        CHECK(ref.a[n] == 1.0);
        CHECK(ref.g[n] == 1.0);
        CHECK(ref.psi[n] == 0.0);
    }
}

TEST_CASE("degenerate_point preset") {
    const Grid g = torus(128);
    const ReferenceData ref = make_reference("degenerate_point", g, {{"px", 0.5}, {"py", 0.5}, {"sigma", 0.02}});
    const std::size_t p = g.index(64, 64);
    CHECK(std::abs(ref.a[p]) < 1e-14);
    CHECK(mean(ref.a) > 0.0);
    CHECK(ref.pole_node == p);
    CHECK(ref.psi.max() == doctest::Approx(0.0));
    CHECK(ref.psi.max() <= 0.0);
    CHECK(ref.degeneracy_nodes[p]);
    CHECK(ref.g.min() > 0.0);
    // psi follows the smoothed log profile up to the normalizing constant
    const double s = 0.02;
    const std::size_t q = g.index(64 + 12, 64);  // 12/128 away along x
    const double dq = 12.0 / 128.0;
    CHECK(ref.psi[q] - ref.psi[p] == doctest::Approx(0.5 * (std::log(dq * dq + s * s) - std::log(s * s))));
}

TEST_CASE("degenerate_annulus preset vanishes on the circle") {
    const Grid g = torus(128);
    const ReferenceData ref = make_reference("degenerate_annulus", g, {{"radius", 0.25}});
    CHECK(std::abs(ref.a[g.index(64 + 32, 64)]) < 1e-14);
    CHECK(mean(ref.a) > 0.0);
    CHECK(ref.psi.max() <= 0.0);
}

TEST_CASE("preset errors") {
    const Grid c = make_grid(1, {64}, {1.0}, {Boundary::periodic});
    CHECK_THROWS_AS(make_reference("custom", c, {{"a0", 0.0}, {"a1", 0.0}}), std::invalid_argument);
    CHECK_THROWS_AS(make_reference("custom", c, {{"a0", -1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(make_reference("nonsense", c), std::invalid_argument);
    CHECK_THROWS_AS(make_reference("kahler", c, {{"colour", 1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(make_reference("degenerate_point", c, {{"kappa", 0.0}}), std::invalid_argument);
    CHECK(!is_known_preset("nonsense"));
    CHECK(is_known_preset("degenerate_annulus"));
}

TEST_CASE("resolved parameters carry every default") {
    const Grid c = make_grid(1, {64}, {1.0}, {Boundary::periodic});
    const ParamMap p = resolve_preset_params("degenerate_point", c, {{"sigma", 0.01}});
    CHECK(p.at("sigma") == 0.01);
    CHECK(p.contains("kappa"));
    CHECK(p.contains("r_p"));
}

TEST_CASE("weight") {
    const Grid c = make_grid(1, {64}, {1.0}, {Boundary::periodic});
    ReferenceData k = make_reference("kahler", c);
    for (double B : {0.5, 2.0, 40.0}) {
        const WeightField wk = weight(k, B);
        for (double v : wk.w.values()) CHECK(v == 1.0);
    }

    k.psi = ScalarField(c, -1.0);
    const WeightField wn = weight(k, 2.0);
    for (double v : wn.w.values()) CHECK(v == doctest::Approx(std::exp(-2.0)));
    CHECK_THROWS_AS(weight(k, 0.0), std::invalid_argument);

    const ReferenceData d = make_reference("degenerate_point", torus(64));
    const WeightField w1 = weight(d, 1.0), w2 = weight(d, 3.0);
    std::size_t argmin = 0;
    for (std::size_t n = 0; n < w1.w.size(); ++n) {
        CHECK(w1.w[n] > 0.0);
        CHECK(w1.w[n] <= 1.0);
        CHECK(w1.w[n] >= w2.w[n]);
        CHECK(std::log(w2.w[n]) == doctest::Approx(3.0 * d.psi[n]).epsilon(1e-12));
        if (w2.w[n] < w2.w[argmin]) argmin = n;
    }
    CHECK(d.degeneracy_nodes[argmin]);
    CHECK(argmin == d.pole_node);
}

TEST_CASE("psi gradient bound is stable as sigma shrinks") {
    for (double sigma : {0.08, 0.04, 0.02}) {
        const double a = psi_gradient_profile(sigma), b = psi_gradient_profile(sigma / 2);
        CHECK(b < 2.0 * a);
    }
}

TEST_CASE("gamma family") {
    const Grid c = make_grid(1, {64}, {1.0}, {Boundary::periodic});
    const ReferenceData d = make_reference("degenerate_point", c);
    const ScalarField one(c, 1.0);
    double prev = 1.0;
    for (double gamma : {0.5, 0.25, 0.1, 0.01}) {
        const GammaFamily f = make_gamma_family(d.a, one, one, gamma, 2);
        CHECK(f.a_gamma.min() >= gamma * 1.0 + (1 - gamma) * d.a.min() - 1e-15);
        CHECK(f.rhs_gamma.max() == doctest::Approx(gamma * gamma));
        CHECK(f.rhs_gamma.max() < prev);
        prev = f.rhs_gamma.max();
    }
    CHECK_THROWS_AS(make_gamma_family(d.a, one, one, 0.0, 2), std::invalid_argument);
    CHECK_THROWS_AS(make_gamma_family(d.a, one, one, 0.75, 2), std::invalid_argument);
    CHECK_THROWS_AS(make_gamma_family(d.a, ScalarField(c, 0.0), one, 0.25, 2), std::invalid_argument);
}

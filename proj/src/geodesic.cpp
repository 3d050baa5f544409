#include "cmalab/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

namespace cmalab {

namespace {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

void check_strip(const Grid& strip, const ReferenceData& ref) {
    if (strip.dims() != 2 || strip.boundary(0) != Boundary::periodic || strip.boundary(1) != Boundary::dirichlet)
        throw std::invalid_argument("geodesic: strip grid must be periodic in x and dirichlet in s");
    const Grid& circle = ref.grid();
    if (circle.dims() != 1 || circle.boundary(0) != Boundary::periodic || circle.points(0) != strip.points(0) ||
        circle.length(0) != strip.length(0))
        throw std::invalid_argument("geodesic: reference data must live on the strip's x-circle");
}

struct Stencil {
    std::size_t nx, ns;
    double hx, hs;
    std::size_t at(std::size_t i, std::size_t j) const { return i * (ns + 1) + j; }
    std::size_t wrap(long i) const {
        const long n = static_cast<long>(nx);
        return static_cast<std::size_t>(((i % n) + n) % n);
    }
};

Stencil stencil_of(const Grid& strip) {
    return {strip.extent(0), strip.points(1), strip.spacing(0), strip.spacing(1)};
}

StripMatrix matrix_at(std::span<const double> phi, const Stencil& st, std::size_t i, std::size_t j, double g) {
    const std::size_t ip = st.wrap(static_cast<long>(i) + 1), im = st.wrap(static_cast<long>(i) - 1);
    const double c = phi[st.at(i, j)];
    const double pxx = (phi[st.at(ip, j)] - 2.0 * c + phi[st.at(im, j)]) / (st.hx * st.hx);
    const double pss = (phi[st.at(i, j + 1)] - 2.0 * c + phi[st.at(i, j - 1)]) / (st.hs * st.hs);
    const double pxs = (phi[st.at(ip, j + 1)] - phi[st.at(ip, j - 1)] - phi[st.at(im, j + 1)] + phi[st.at(im, j - 1)]) /
                       (4.0 * st.hx * st.hs);
    return {g + pxx, pxs, pss};
}

struct LogEval {
    std::vector<double> residual;  // log det M - log target, interior nodes in (i, j) order
    double sup = 0.0;
    bool positive = true;
};

LogEval log_residual(std::span<const double> phi, const Stencil& st, const ReferenceData& ref, double gamma) {
    LogEval ev;
    ev.residual.reserve(st.nx * (st.ns - 1));
    for (std::size_t i = 0; i < st.nx; ++i) {
        const double g = ref.g[i];
        const double target = std::log(gamma * gamma * g);
        for (std::size_t j = 1; j < st.ns; ++j) {
            const StripMatrix m = matrix_at(phi, st, i, j, g);
            const double d = m.det();
            if (!(m.m11 > 0.0 && d > 0.0)) {
                ev.positive = false;
                ev.residual.push_back(0.0);
                continue;
            }
            const double r = std::log(d) - target;
            ev.residual.push_back(r);
            ev.sup = std::max(ev.sup, std::abs(r));
        }
    }
    return ev;
}

}  // namespace

Grid make_strip_grid(std::size_t nx, std::size_t ns, double length_x, double length_s) {
    return make_grid(2, {nx, ns}, {length_x, length_s}, {Boundary::periodic, Boundary::dirichlet});
}

std::vector<StripMatrix> strip_matrices(const ScalarField& phi, const ReferenceData& ref) {
    check_strip(phi.grid(), ref);
    const Stencil st = stencil_of(phi.grid());
    std::vector<StripMatrix> out(phi.size(), StripMatrix{0.0, 0.0, 0.0});
    for (std::size_t i = 0; i < st.nx; ++i)
        for (std::size_t j = 1; j < st.ns; ++j) out[st.at(i, j)] = matrix_at(phi.values(), st, i, j, ref.g[i]);
    return out;
}

ScalarField geodesic_residual(const ScalarField& phi, const ReferenceData& ref, double gamma) {
    if (!(gamma >= 0.0 && gamma <= 0.5)) throw std::invalid_argument("geodesic_residual: gamma must lie in [0, 1/2]");
    const auto mats = strip_matrices(phi, ref);
    const Stencil st = stencil_of(phi.grid());
    ScalarField r(phi.grid());
    for (std::size_t i = 0; i < st.nx; ++i)
        for (std::size_t j = 1; j < st.ns; ++j) r[st.at(i, j)] = mats[st.at(i, j)].det() - gamma * gamma * ref.g[i];
    return r;
}

ScalarField geodesic_subsolution(const ReferenceData& ref, const ScalarField& phi0, const ScalarField& phi1,
                                 double gamma, const Grid& strip) {
    check_strip(strip, ref);
    require_same_grid(phi0, ref.g, "geodesic endpoint");
    require_same_grid(phi1, ref.g, "geodesic endpoint");
    const Stencil st = stencil_of(strip);
    const double S = strip.length(1);
    ScalarField phi(strip);
    for (std::size_t i = 0; i < st.nx; ++i)
        for (std::size_t j = 0; j <= st.ns; ++j) {
            const double t = static_cast<double>(j) / static_cast<double>(st.ns);
            phi[st.at(i, j)] = (1.0 - gamma) * ((1.0 - t) * phi0[i] + t * phi1[i]);
        }
    // The boundary rows must be bit-exact copies of (1 - γ) φ_k.
    for (std::size_t i = 0; i < st.nx; ++i) {
        phi[st.at(i, 0)] = (1.0 - gamma) * phi0[i];
        phi[st.at(i, st.ns)] = (1.0 - gamma) * phi1[i];
    }
    // Subtract C s (S - s) with C large enough that det M >= 2 γ² g everywhere.
    double C = 0.0;
    for (std::size_t i = 0; i < st.nx; ++i)
        for (std::size_t j = 1; j < st.ns; ++j) {
            const StripMatrix m = matrix_at(phi.values(), st, i, j, ref.g[i]);
            const double need = (m.m12 * m.m12 + 2.0 * gamma * gamma * ref.g[i]) / (2.0 * m.m11) - 0.5 * m.m22;
            C = std::max(C, need);
        }
    C *= 1.5;
    for (std::size_t i = 0; i < st.nx; ++i)
        for (std::size_t j = 1; j < st.ns; ++j) {
            const double s = strip.coord(1, j);
            phi[st.at(i, j)] -= C * s * (S - s);
        }
    return phi;
}

GeodesicSolution solve_geodesic(const ReferenceData& ref, const ScalarField& phi0, const ScalarField& phi1,
                                double gamma, const Grid& strip, const GeodesicOptions& opt) {
    if (!(gamma > 0.0 && gamma <= 0.5)) throw std::invalid_argument("solve_geodesic: gamma must lie in (0, 1/2]");
    check_strip(strip, ref);
    for (const ScalarField* ep : {&phi0, &phi1}) {
        require_same_grid(*ep, ref.g, "geodesic endpoint");
        const ScalarField lap = laplacian(*ep);
        for (std::size_t i = 0; i < ep->size(); ++i)
            if (!(ref.g[i] + lap[i] > 0.0)) throw std::invalid_argument("solve_geodesic: endpoint is not strictly psh");
    }

    const Stencil st = stencil_of(strip);
    ScalarField phi = geodesic_subsolution(ref, phi0, phi1, gamma, strip);
    GeodesicSolution sol{phi, gamma, phi0, phi1, {}, 0.0};
    NewtonReport& rep = sol.report;

    const std::size_t rows = st.ns - 1;
    const auto unknowns = static_cast<Eigen::Index>(st.nx * rows);
    auto unk = [&](std::size_t i, std::size_t j) { return static_cast<Eigen::Index>(i * rows + (j - 1)); };

    LogEval cur = log_residual(phi.values(), st, ref, gamma);
    if (!cur.positive) throw std::logic_error("solve_geodesic: starting iterate is not admissible");
    rep.residual_history.push_back(cur.sup);
    rep.iterations = 1;

    Eigen::BiCGSTAB<SpMat, Eigen::IncompleteLUT<double>> solver;
    solver.setTolerance(opt.linear_tol);
    std::vector<Eigen::Triplet<double>> trip;

    // Rounding in the second differences bounds how small the log residual
    // can get once γ² g is tiny; never ask for less than that.
    double gmin = std::numeric_limits<double>::infinity(), pmax = 0.0;
    for (std::size_t i = 0; i < st.nx; ++i) gmin = std::min(gmin, ref.g[i]);
    for (std::size_t n = 0; n < phi.size(); ++n) pmax = std::max(pmax, std::abs(phi[n]));
    const double floor = 16.0 * std::numeric_limits<double>::epsilon() * (1.0 + pmax) *
                         (1.0 / (st.hx * st.hx) + 1.0 / (st.hs * st.hs)) / (gamma * gamma * gmin);
    const double tol = std::max(opt.tol, floor);

    while (cur.sup > tol) {
        if (rep.iterations >= opt.max_iter) {
            rep.failure = "iteration limit";
            break;
        }
        trip.clear();
        Eigen::VectorXd rhs(unknowns);
        for (std::size_t i = 0; i < st.nx; ++i) {
            const std::size_t ip = st.wrap(static_cast<long>(i) + 1), im = st.wrap(static_cast<long>(i) - 1);
            for (std::size_t j = 1; j < st.ns; ++j) {
                const StripMatrix m = matrix_at(phi.values(), st, i, j, ref.g[i]);
                const double det = m.det();
                const double cxx = m.m22 / det / (st.hx * st.hx);
                const double css = m.m11 / det / (st.hs * st.hs);
                const double cxs = -2.0 * m.m12 / det / (4.0 * st.hx * st.hs);
                const Eigen::Index row = unk(i, j);
                rhs[row] = -cur.residual[static_cast<std::size_t>(row)];
                auto add = [&](std::size_t ii, std::size_t jj, double v) {
                    if (jj == 0 || jj == st.ns) return;  // fixed boundary data
                    trip.emplace_back(row, unk(ii, jj), v);
                };
                add(i, j, -2.0 * cxx - 2.0 * css);
                add(ip, j, cxx);
                add(im, j, cxx);
                add(i, j + 1, css);
                add(i, j - 1, css);
                add(ip, j + 1, cxs);
                add(im, j - 1, cxs);
                add(ip, j - 1, -cxs);
                add(im, j + 1, -cxs);
            }
        }
        SpMat jac(unknowns, unknowns);
        jac.setFromTriplets(trip.begin(), trip.end());
        solver.compute(jac);
        const Eigen::VectorXd delta = solver.solve(rhs);
        rep.linear_iterations += static_cast<std::size_t>(solver.iterations());

        double step = 1.0;
        bool accepted = false;
        ScalarField trial = phi;
        LogEval next;
        while (step >= opt.min_step) {
            for (std::size_t i = 0; i < st.nx; ++i)
                for (std::size_t j = 1; j < st.ns; ++j) trial[st.at(i, j)] = phi[st.at(i, j)] + step * delta[unk(i, j)];
            next = log_residual(trial.values(), st, ref, gamma);
            if (next.positive && next.sup < cur.sup) {
                accepted = true;
                break;
            }
            step *= 0.5;
            ++rep.damping_events;
        }
        if (!accepted) {
            rep.failure = "line search failed";
            break;
        }
        phi = std::move(trial);
        cur = std::move(next);
        rep.residual_history.push_back(cur.sup);
        ++rep.iterations;
    }
    rep.converged = cur.sup <= tol;
    double margin = std::numeric_limits<double>::infinity();
    for (const StripMatrix& m : strip_matrices(phi, ref)) {
        if (m.m11 == 0.0 && m.m12 == 0.0 && m.m22 == 0.0) continue;  // boundary rows
        margin = std::min(margin, m.det());
    }
    rep.final_positivity_margin = margin;
    sol.det_residual = sup_norm(geodesic_residual(phi, ref, gamma).values());
    sol.phi = std::move(phi);
    return sol;
}

}  // namespace cmalab

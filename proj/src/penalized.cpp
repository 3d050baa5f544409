#include "cmalab/penalized.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/IterativeLinearSolvers>

#include "linalg.hpp"

namespace cmalab {

namespace {

struct Evaluation {
    std::vector<double> residual;
    double sup = 0.0;
    double margin = 0.0;  // min of a + eps g + Δf/2
    bool saturated = false;
};

Evaluation evaluate(const ScalarField& f, const ReferenceData& ref, double epsilon, double beta) {
    const ScalarField lap = laplacian(f);
    Evaluation ev;
    ev.residual.resize(f.size());
    ev.margin = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < f.size(); ++n) {
        const double dens = ref.a[n] + epsilon * ref.g[n] + 0.5 * lap[n];
        double expo = beta * f[n] + std::log(ref.g[n]);
        if (expo > kExpClamp) {
            expo = kExpClamp;
            ev.saturated = true;
        }
        ev.residual[n] = dens - std::exp(expo);
        ev.sup = std::max(ev.sup, std::abs(ev.residual[n]));
        ev.margin = std::min(ev.margin, dens);
    }
    return ev;
}

void check_inputs(const ReferenceData& ref, double epsilon, double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("solve_beta: beta must be > 0");
    if (!(epsilon >= 0.0)) throw std::invalid_argument("solve_beta: epsilon must be >= 0");
    for (std::size_t k = 0; k < ref.grid().dims(); ++k)
        if (ref.grid().boundary(k) != Boundary::periodic)
            throw std::invalid_argument("solve_beta: closed (fully periodic) grid required");
    bool some_positive = false;
    for (std::size_t n = 0; n < ref.a.size() && !some_positive; ++n)
        some_positive = ref.a[n] + epsilon * ref.g[n] > 0.0;
    if (!some_positive) throw std::invalid_argument("solve_beta: a + eps g is nowhere positive");
}

}  // namespace

BetaResidual beta_residual(const ScalarField& f, const ReferenceData& ref, double epsilon, double beta) {
    require_same_grid(f, ref.a, "beta_residual");
    if (!(beta > 0.0)) throw std::invalid_argument("beta_residual: beta must be > 0");
    Evaluation ev = evaluate(f, ref, epsilon, beta);
    return {ScalarField(f.grid(), std::move(ev.residual)), ev.saturated};
}

PenalizedSolution solve_beta(const ReferenceData& ref, double epsilon, double beta,
                             const std::optional<ScalarField>& init, const NewtonOptions& opt) {
    check_inputs(ref, epsilon, beta);
    const Grid& grid = ref.grid();
    ScalarField f = init ? *init : ScalarField(grid);
    require_same_grid(f, ref.a, "solve_beta");

    PenalizedSolution sol{f, epsilon, beta, {}};
    NewtonReport& rep = sol.report;

    const detail::SpMat base = detail::half_neg_laplacian_periodic(grid);
    detail::SpMat jac = base;
    std::vector<double*> diag_ptr(grid.node_count());
    for (Eigen::Index k = 0; k < jac.outerSize(); ++k)
        for (detail::SpMat::InnerIterator it(jac, k); it; ++it)
            if (it.row() == it.col()) diag_ptr[static_cast<std::size_t>(k)] = &it.valueRef();
    std::vector<double> base_diag(grid.node_count());
    for (std::size_t n = 0; n < base_diag.size(); ++n) base_diag[n] = *diag_ptr[n];

    Evaluation cur = evaluate(f, ref, epsilon, beta);
    rep.saturated = cur.saturated;
    rep.residual_history.push_back(cur.sup);
    rep.iterations = 1;

    Eigen::ConjugateGradient<detail::SpMat, Eigen::Lower | Eigen::Upper, Eigen::IncompleteCholesky<double>> cg;
    cg.setTolerance(opt.linear_tol);
    cg.setMaxIterations(static_cast<Eigen::Index>(std::max<std::size_t>(1000, 4 * grid.node_count())));

    while (cur.sup > opt.tol) {
        if (rep.iterations >= opt.max_iter) {
            rep.failure = "iteration limit";
            break;
        }
        // Newton system (-Δ/2 + beta e^{beta f} g) δ = R.
        for (std::size_t n = 0; n < grid.node_count(); ++n) {
            const double expo = std::min(beta * f[n] + std::log(ref.g[n]), kExpClamp);
            *diag_ptr[n] = base_diag[n] + beta * std::exp(expo);
        }
        cg.compute(jac);
        if (cg.info() != Eigen::Success) {
            rep.failure = "preconditioner setup failed";
            break;
        }
        const detail::Vec delta = cg.solve(detail::as_vec(cur.residual));
        rep.linear_iterations += static_cast<std::size_t>(cg.iterations());

        double step = 1.0;
        bool accepted = false;
        ScalarField trial(grid);
        Evaluation next;
        const double margin_floor = std::min(cur.margin, 0.0) - opt.positivity_slack;
        while (step >= opt.min_step) {
            for (std::size_t n = 0; n < f.size(); ++n) trial[n] = f[n] + step * delta[static_cast<Eigen::Index>(n)];
            next = evaluate(trial, ref, epsilon, beta);
            if (std::isfinite(next.sup) && next.sup < cur.sup && next.margin >= margin_floor) {
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
        f = std::move(trial);
        cur = std::move(next);
        rep.saturated = rep.saturated || cur.saturated;
        rep.residual_history.push_back(cur.sup);
        ++rep.iterations;
    }
    rep.converged = cur.sup <= opt.tol;
    rep.final_positivity_margin = cur.margin;
    sol.f = std::move(f);
    return sol;
}

ContinuationResult continuation_beta(const ReferenceData& ref, const std::vector<ScheduleLeg>& schedule,
                                     const NewtonOptions& opt) {
    for (std::size_t k = 1; k < schedule.size(); ++k) {
        if (schedule[k].epsilon > schedule[k - 1].epsilon || schedule[k].beta < schedule[k - 1].beta)
            throw std::invalid_argument("continuation: schedule must have eps non-increasing and beta non-decreasing");
    }
    ContinuationResult out;
    std::optional<ScalarField> warm;
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        PenalizedSolution sol = solve_beta(ref, schedule[k].epsilon, schedule[k].beta, warm, opt);
        const bool ok = sol.report.converged;
        warm = sol.f;
        out.legs.push_back(std::move(sol));
        if (!ok) {
            out.failed_leg = k;
            break;
        }
    }
    return out;
}

}  // namespace cmalab

#include "cmalab/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cmalab {

namespace {

void require_periodic(const Grid& g) {
    for (std::size_t k = 0; k < g.dims(); ++k)
        if (g.boundary(k) != Boundary::periodic)
            throw std::invalid_argument("envelope: closed (fully periodic) grid required");
}

}  // namespace

ScalarField positivity_density(const ReferenceData& ref, double epsilon, const ScalarField& u) {
    require_same_grid(ref.a, u, "positivity_density");
    ScalarField lap = laplacian(u);
    for (std::size_t n = 0; n < lap.size(); ++n) lap[n] = ref.a[n] + epsilon * ref.g[n] + 0.5 * lap[n];
    return lap;
}

double complementarity_residual(const ReferenceData& ref, double epsilon, const ScalarField& u) {
    ScalarField dens = positivity_density(ref, epsilon, u);
    double worst = 0.0;
    for (std::size_t n = 0; n < u.size(); ++n) worst = std::max(worst, std::abs(std::min(-u[n], dens[n])));
    return worst;
}

ObstacleSolution psor_envelope(const ReferenceData& ref, double epsilon, const PsorOptions& opt) {
    return psor_envelope(ref, epsilon, opt, ScalarField(ref.grid()));
}

ObstacleSolution psor_envelope(const ReferenceData& ref, double epsilon, const PsorOptions& opt,
                               ScalarField start) {
    const Grid& g = ref.grid();
    require_periodic(g);
    require_same_grid(ref.a, start, "psor_envelope");
    if (!(opt.relax >= 1.0 && opt.relax < 2.0)) throw std::invalid_argument("psor: relaxation must lie in [1, 2)");
    if (!(epsilon >= 0.0)) throw std::invalid_argument("psor: epsilon must be >= 0");
    if (start.max() > 0.0) throw std::invalid_argument("psor: start must satisfy u <= 0");

    const std::size_t N = g.node_count();
    const std::size_t nx = g.extent(0);
    const std::size_t ny = g.extent(1);
    const double ix2 = 1.0 / (g.spacing(0) * g.spacing(0));
    const double iy2 = g.dims() == 2 ? 1.0 / (g.spacing(1) * g.spacing(1)) : 0.0;
    const double diag = ix2 + iy2;  // coefficient of u_i in -Δu/2

    std::vector<double> src(N);
    for (std::size_t n = 0; n < N; ++n) src[n] = ref.a[n] + epsilon * ref.g[n];

    std::vector<double> u(start.values().begin(), start.values().end());
    ObstacleSolution out{ScalarField(g), epsilon, 0.0, 0, false};

    // Density a + eps g + Δu/2 at node (i, j) using current values.
    auto density = [&](std::size_t i, std::size_t j) {
        const std::size_t ip = i + 1 == nx ? 0 : i + 1;
        const std::size_t im = i == 0 ? nx - 1 : i - 1;
        const std::size_t c = i * ny + j;
        double s = 0.5 * ix2 * (u[ip * ny + j] + u[im * ny + j]);
        if (ny > 1) {
            const std::size_t jp = j + 1 == ny ? 0 : j + 1;
            const std::size_t jm = j == 0 ? ny - 1 : j - 1;
            s += 0.5 * iy2 * (u[i * ny + jp] + u[i * ny + jm]);
        }
        return src[c] + s - diag * u[c];
    };

    for (std::size_t sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
        for (std::size_t i = 0; i < nx; ++i) {
            for (std::size_t j = 0; j < ny; ++j) {
                const std::size_t c = i * ny + j;
                const double next = u[c] + opt.relax * density(i, j) / diag;
                u[c] = std::min(0.0, next);
            }
        }
        out.sweeps = sweep;
        // Full residual evaluation is as expensive as a sweep; do it sparsely.
        if (sweep % 16 == 0 || sweep == opt.max_sweeps) {
            double worst = 0.0;
            for (std::size_t i = 0; i < nx; ++i)
                for (std::size_t j = 0; j < ny; ++j)
                    worst = std::max(worst, std::abs(std::min(-u[i * ny + j], density(i, j))));
            out.comp_residual = worst;
            if (worst <= opt.tol) {
                out.converged = true;
                break;
            }
        }
    }
    out.u = ScalarField(g, std::move(u));
    return out;
}

MonotonicityReport envelope_monotonicity_check(const ReferenceData& ref, const std::vector<double>& eps_list,
                                               const PsorOptions& opt, double tolerance) {
    for (std::size_t k = 1; k < eps_list.size(); ++k)
        if (!(eps_list[k] < eps_list[k - 1])) throw std::invalid_argument("monotonicity: eps list must strictly decrease");
    MonotonicityReport rep;
    rep.epsilons = eps_list;
    rep.tolerance = tolerance;
    for (double eps : eps_list) rep.solutions.push_back(psor_envelope(ref, eps, opt));
    for (std::size_t k = 1; k < rep.solutions.size(); ++k) {
        const auto& prev = rep.solutions[k - 1].u;
        const auto& next = rep.solutions[k].u;
        for (std::size_t n = 0; n < prev.size(); ++n) rep.max_violation = std::max(rep.max_violation, next[n] - prev[n]);
    }
    rep.monotone = rep.max_violation <= tolerance;
    return rep;
}

}  // namespace cmalab

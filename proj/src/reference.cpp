#include "cmalab/reference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cmalab {

namespace {

constexpr double kDegeneracyThreshold = 1e-6;

const ParamMap& preset_defaults(const std::string& preset) {
    // Lengths are fractions of the first axis length, resolved below.
    static const std::map<std::string, ParamMap> defaults = {
        {"kahler", {{"g0", 1.0}, {"kappa", 1.0}}},
        {"degenerate_point",
         {{"px", 0.5}, {"py", 0.5}, {"r_p", 0.05}, {"lam", 3.0}, {"well", 8.0}, {"r_q", 0.05},
          {"kappa", 1.0}, {"sigma", 0.02}}},
        {"degenerate_annulus",
         {{"px", 0.5}, {"py", 0.5}, {"radius", 0.25}, {"r_p", 0.04}, {"lam", 3.0}, {"kappa", 1.0},
          {"sigma", 0.02}}},
        {"custom", {{"a0", 1.0}, {"a1", 0.0}, {"g0", 1.0}, {"kappa", 1.0}}},
    };
    auto it = defaults.find(preset);
    if (it == defaults.end()) throw std::invalid_argument("unknown preset '" + preset + "'");
    return it->second;
}

// Keys given as fractions of the domain length and rescaled on resolution.
bool is_relative_length(const std::string& key) {
    return key == "px" || key == "py" || key == "r_p" || key == "r_q" || key == "radius" || key == "sigma";
}

}  // namespace

bool is_known_preset(const std::string& preset) {
    return preset == "kahler" || preset == "degenerate_point" || preset == "degenerate_annulus" ||
           preset == "custom";
}

ParamMap resolve_preset_params(const std::string& preset, const Grid& grid, const ParamMap& params) {
    const ParamMap& defs = preset_defaults(preset);
    for (const auto& [key, value] : params) {
        if (!defs.contains(key)) throw std::invalid_argument("preset '" + preset + "': unknown parameter '" + key + "'");
        if (!std::isfinite(value)) throw std::invalid_argument("preset '" + preset + "': non-finite '" + key + "'");
    }
    ParamMap out = defs;
    for (const auto& [key, value] : params) out[key] = value;
    // Stored resolved values stay relative; absolute lengths are derived here
    // only for validation.
    if (out.contains("sigma") && out["sigma"] < 0.0) throw std::invalid_argument("preset: sigma must be >= 0");
    if (out.contains("kappa") && !(out["kappa"] > 0.0)) throw std::invalid_argument("preset: kappa must be > 0");
    if (out.contains("g0") && !(out["g0"] > 0.0)) throw std::invalid_argument("preset: g0 must be > 0");
    (void)grid;
    return out;
}

double grid_distance(const Grid& grid, std::span<const double> x, std::span<const double> p) {
    double d2 = 0.0;
    for (std::size_t k = 0; k < grid.dims(); ++k) {
        double d = std::abs(x[k] - p[k]);
        if (grid.boundary(k) == Boundary::periodic) d = std::min(d, grid.length(k) - d);
        d2 += d * d;
    }
    return std::sqrt(d2);
}

ReferenceData make_reference(const std::string& preset, const Grid& grid, const ParamMap& params) {
    ParamMap prm = resolve_preset_params(preset, grid, params);
    const double L = grid.length(0);
    auto abs_len = [&](const std::string& key) { return is_relative_length(key) ? prm.at(key) * L : prm.at(key); };

    const std::size_t N = grid.node_count();
    std::vector<double> a(N), g(N), psi(N, 0.0);
    const double kappa = prm.at("kappa");

    auto node_x = [&](std::size_t n) {
        auto ij = grid.unravel(n);
        std::array<double, 2> x{grid.coord(0, ij[0]), grid.dims() == 2 ? grid.coord(1, ij[1]) : 0.0};
        return x;
    };

    if (preset == "kahler") {
        std::fill(a.begin(), a.end(), prm.at("g0"));
        std::fill(g.begin(), g.end(), prm.at("g0"));
    } else if (preset == "custom") {
        const double a0 = prm.at("a0"), a1 = prm.at("a1");
        for (std::size_t n = 0; n < N; ++n) {
            a[n] = a0 + a1 * std::cos(2.0 * std::numbers::pi * node_x(n)[0] / L);
            g[n] = prm.at("g0");
        }
    } else {
        std::array<double, 2> p{abs_len("px"), grid.dims() == 2 ? abs_len("py") : 0.0};
        const double r_p = abs_len("r_p");
        const double lam = prm.at("lam");
        const double sigma = abs_len("sigma");
        const bool annulus = preset == "degenerate_annulus";
        const double radius = annulus ? abs_len("radius") : 0.0;
        std::array<double, 2> q{};
        double well = 0.0, r_q = 1.0;
        if (!annulus) {
            well = prm.at("well");
            r_q = abs_len("r_q");
            for (std::size_t k = 0; k < grid.dims(); ++k) {
                q[k] = p[k] + 0.5 * grid.length(k);
                if (q[k] >= grid.length(k)) q[k] -= grid.length(k);
            }
        }
        if (!(r_p > 0.0) || !(r_q > 0.0)) throw std::invalid_argument("preset: radii must be > 0");
        for (std::size_t n = 0; n < N; ++n) {
            auto x = node_x(n);
            const double dp = grid_distance(grid, x, p);
            const double s = annulus ? dp - radius : dp;
            const double rho = s * s / (r_p * r_p);
            double val = 1.0 - (1.0 + lam * rho) * std::exp(-rho);
            if (!annulus && well != 0.0) {
                const double dq = grid_distance(grid, x, q);
                val *= 1.0 - well * std::exp(-dq * dq / (r_q * r_q));
            }
            a[n] = val;
            g[n] = 1.0;
            psi[n] = 0.5 * kappa * std::log(s * s + sigma * sigma);
        }
        if (sigma == 0.0)
            for (double v : psi)
                if (!std::isfinite(v)) throw std::invalid_argument("preset: sigma = 0 puts the pole on a node");
        const double top = *std::max_element(psi.begin(), psi.end());
        for (double& v : psi) v -= top;
    }

    double mean_a = 0.0;
    for (double v : a) mean_a += v;
    mean_a /= static_cast<double>(N);
    if (!(mean_a > 0.0)) throw std::invalid_argument("preset: mean(a) must be positive");

    ReferenceData ref{preset, prm, ScalarField(grid, std::move(a)), ScalarField(grid, std::move(g)),
                      ScalarField(grid, std::move(psi)), kappa, {}, 0};
    const double amax = ref.a.max();
    ref.degeneracy_nodes.assign(N, false);
    for (std::size_t n = 0; n < N; ++n) ref.degeneracy_nodes[n] = ref.a[n] < kDegeneracyThreshold * amax;
    auto vals = ref.psi.values();
    ref.pole_node = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
    return ref;
}

WeightField weight(const ReferenceData& ref, double B) {
    if (!(B > 0.0)) throw std::invalid_argument("weight: B must be > 0");
    ScalarField w(ref.grid());
    for (std::size_t n = 0; n < w.size(); ++n) w[n] = std::exp(B * ref.psi[n]);
    return {B, std::move(w)};
}

GammaFamily make_gamma_family(const ScalarField& a0, const ScalarField& a_kahler,
                              const ScalarField& volume_density, double gamma, int n) {
    if (!(gamma > 0.0 && gamma <= 0.5)) throw std::invalid_argument("gamma family: gamma must lie in (0, 1/2]");
    require_same_grid(a0, a_kahler, "gamma family");
    require_same_grid(a0, volume_density, "gamma family");
    if (!(a_kahler.min() > 0.0)) throw std::invalid_argument("gamma family: Kahler density must be positive");
    ScalarField ag(a0.grid()), rhs(a0.grid());
    const double scale = std::pow(gamma, n);
    for (std::size_t k = 0; k < ag.size(); ++k) {
        ag[k] = (1.0 - gamma) * a0[k] + gamma * a_kahler[k];
        rhs[k] = scale * volume_density[k];
    }
    return {gamma, std::move(ag), std::move(rhs)};
}

}  // namespace cmalab

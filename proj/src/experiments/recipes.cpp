#include "recipes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "cmalab/diagnostics.hpp"
#include "cmalab/envelope.hpp"
#include "cmalab/field_io.hpp"
#include "cmalab/geodesic.hpp"
#include "cmalab/penalized.hpp"
#include "cmalab/reference.hpp"

namespace cmalab::detail {

namespace {

// ---------------------------------------------------------------- helpers

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

std::string opt_num(std::optional<double> v) { return v ? format_double(*v) : std::string(); }

std::string csv_line(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t k = 0; k < cells.size(); ++k) out += (k ? "," : "") + cells[k];
    return out + "\n";
}

std::string two_digits(std::size_t k) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02zu", k);
    return buf;
}

std::vector<double> number_list(Json& arr, const std::string& what, bool allow_empty = false) {
    require(arr.is_array(), "'" + what + "' must be an array");
    require(allow_empty || !arr.empty(), "'" + what + "' must not be empty");
    std::vector<double> out;
    for (auto& v : arr) {
        require(v.is_number() && !v.is_boolean(), "'" + what + "' must hold numbers");
        out.push_back(v.get<double>());
        v = out.back();
    }
    return out;
}

std::vector<std::size_t> count_list(const Json& arr, const std::string& what) {
    require(arr.is_array() && !arr.empty(), "'" + what + "' must be a non-empty array");
    std::vector<std::size_t> out;
    for (const auto& v : arr) {
        require(v.is_number_integer() && v.get<long long>() > 0, "'" + what + "' must hold positive integers");
        out.push_back(v.get<std::size_t>());
    }
    return out;
}

Grid periodic_grid(std::size_t dims, std::vector<std::size_t> points, std::vector<double> lengths) {
    return make_grid(dims, std::move(points), std::move(lengths), std::vector<Boundary>(dims, Boundary::periodic));
}

std::size_t grid_dims(const Json& g) {
    const long long d = g["dims"].get<long long>();
    require(d == 1 || d == 2, "'grid.dims' must be 1 or 2");
    return static_cast<std::size_t>(d);
}

std::vector<double> grid_lengths(Json& g, std::size_t dims) {
    auto L = number_list(g["lengths"], "grid.lengths");
    require(L.size() == dims, "'grid.lengths' needs one entry per axis");
    return L;
}

// Grid with explicit per-axis points.
Grid config_grid(Json& g) {
    const std::size_t dims = grid_dims(g);
    auto pts = count_list(g["points"], "grid.points");
    require(pts.size() == dims, "'grid.points' needs one entry per axis");
    return periodic_grid(dims, pts, grid_lengths(g, dims));
}

Grid config_grid(const Json& g) {
    Json copy = g;
    return config_grid(copy);
}

// Grid with n points on every axis.
Grid refined_grid(const Json& g, std::size_t n) {
    Json copy = g;
    const std::size_t dims = grid_dims(copy);
    return periodic_grid(dims, std::vector<std::size_t>(dims, n), grid_lengths(copy, dims));
}

ParamMap params_of(const Json& cfg) {
    ParamMap p;
    for (auto it = cfg["params"].begin(); it != cfg["params"].end(); ++it) p[it.key()] = it.value().get<double>();
    return p;
}

// Validates the preset against a grid and stores the fully resolved parameters.
void resolve_preset(Json& cfg, const Grid& grid) {
    const std::string preset = cfg["preset"].get<std::string>();
    require(is_known_preset(preset), "unknown preset '" + preset + "'");
    const ParamMap resolved = resolve_preset_params(preset, grid, params_of(cfg));
    Json out = Json::object();
    for (const auto& [k, v] : resolved) out[k] = v;
    cfg["params"] = out;
    make_reference(preset, grid, resolved);  // rejects e.g. non-positive mean density
}

ReferenceData reference_for(const Json& cfg, const Grid& grid) {
    return make_reference(cfg["preset"].get<std::string>(), grid, params_of(cfg));
}

NewtonOptions newton_options(const Json& j) {
    NewtonOptions o;
    o.tol = j["tol"].get<double>();
    o.max_iter = j["max_iter"].get<std::size_t>();
    o.linear_tol = j["linear_tol"].get<double>();
    o.min_step = j["min_step"].get<double>();
    o.positivity_slack = j["positivity_slack"].get<double>();
    return o;
}

void check_newton(const Json& j) {
    require(j["tol"].get<double>() > 0.0 && j["linear_tol"].get<double>() > 0.0, "newton tolerances must be > 0");
    require(j["max_iter"].get<std::size_t>() >= 1, "newton.max_iter must be >= 1");
    const double ms = j["min_step"].get<double>();
    require(ms > 0.0 && ms <= 1.0, "newton.min_step must lie in (0, 1]");
    require(j["positivity_slack"].get<double>() >= 0.0, "newton.positivity_slack must be >= 0");
}

PsorOptions psor_options(const Json& j) {
    PsorOptions o;
    o.relax = j["relax"].get<double>();
    o.tol = j["tol"].get<double>();
    o.max_sweeps = j["max_sweeps"].get<std::size_t>();
    return o;
}

void check_psor(const Json& j) {
    const double w = j["relax"].get<double>();
    require(w >= 1.0 && w < 2.0, "psor.relax must lie in [1, 2)");
    require(j["tol"].get<double>() > 0.0, "psor.tol must be > 0");
    require(j["max_sweeps"].get<std::size_t>() >= 1, "psor.max_sweeps must be >= 1");
}

const Json kNewtonDefaults = {{"tol", 1e-9}, {"max_iter", 200}, {"linear_tol", 1e-10}, {"min_step", 0x1p-20},
                              {"positivity_slack", 1e-9}};
const Json kPsorDefaults = {{"relax", 1.8}, {"tol", 1e-8}, {"max_sweeps", 200000}};

Json psor_json(const ObstacleSolution& s) {
    return {{"epsilon", s.epsilon}, {"sweeps", s.sweeps}, {"comp_residual", s.comp_residual}, {"converged", s.converged}};
}

void check_envelope(const ObstacleSolution& s, RunContext& ctx) {
    if (!s.converged)
        ctx.fail("envelope at epsilon " + format_double(s.epsilon) + " did not converge in " + std::to_string(s.sweeps) +
                 " sweeps");
}

Json report_json(const NewtonReport& r) {
    return {{"iterations", r.iterations},
            {"final_residual", r.residual_history.empty() ? 0.0 : r.residual_history.back()},
            {"positivity_margin", r.final_positivity_margin},
            {"saturated", r.saturated},
            {"converged", r.converged},
            {"damping_events", r.damping_events},
            {"linear_iterations", r.linear_iterations},
            {"failure", r.failure}};
}

// ---------------------------------------------------------------- beta-sweep

void validate_beta_sweep(Json& cfg) {
    const Grid grid = config_grid(cfg["grid"]);
    resolve_preset(cfg, grid);
    Json& sched = cfg["schedule"];
    require(sched.is_array() && !sched.empty(), "'schedule' must be a non-empty array");
    std::vector<ScheduleLeg> legs;
    for (auto& leg : sched) {
        require(leg.is_object() && leg.size() == 2 && leg.contains("epsilon") && leg.contains("beta"),
                "schedule legs must be objects with exactly 'epsilon' and 'beta'");
        require(leg["epsilon"].is_number() && leg["beta"].is_number(), "schedule values must be numbers");
        const double eps = leg["epsilon"].get<double>(), beta = leg["beta"].get<double>();
        require(eps >= 0.0 && beta > 0.0, "schedule needs epsilon >= 0 and beta > 0");
        leg = Json{{"epsilon", eps}, {"beta", beta}};
        if (!legs.empty())
            require(eps <= legs.back().epsilon && beta >= legs.back().beta,
                    "schedule must have epsilon non-increasing and beta non-decreasing");
        legs.push_back({eps, beta});
    }
    check_newton(cfg["newton"]);
    check_psor(cfg["psor"]);
    Json& d = cfg["diagnostics"];
    require(d["B"].get<double>() > 0.0, "diagnostics.B must be > 0");
    require(d["kappa_c_factor"].get<double>() > 0.0, "diagnostics.kappa_c_factor must be > 0");
    if (d["mask_level"].is_null()) d["mask_level"] = -0.5 * cfg["params"]["kappa"].get<double>();
}

void run_beta_sweep(const Json& cfg, RunContext& ctx) {
    const Grid grid = config_grid(cfg["grid"]);
    const ReferenceData ref = reference_for(cfg, grid);
    std::vector<ScheduleLeg> legs;
    for (const auto& l : cfg["schedule"]) legs.push_back({l["epsilon"].get<double>(), l["beta"].get<double>()});

    // Envelopes for the distinct epsilons, in schedule order.
    std::vector<double> eps_list;
    for (const auto& l : legs)
        if (std::find(eps_list.begin(), eps_list.end(), l.epsilon) == eps_list.end()) eps_list.push_back(l.epsilon);
    const PsorOptions popt = psor_options(cfg["psor"]);
    std::vector<std::optional<ObstacleSolution>> env(eps_list.size());
    parallel_for(eps_list.size(), ctx.single_thread(), [&](std::size_t k) { env[k] = psor_envelope(ref, eps_list[k], popt); });
    Json envs = Json::array();
    for (std::size_t k = 0; k < env.size(); ++k) {
        ctx.write_field("u_eps" + two_digits(k) + ".csv", env[k]->u);
        envs.push_back(psor_json(*env[k]));
        check_envelope(*env[k], ctx);
    }

    const ContinuationResult cont = continuation_beta(ref, legs, newton_options(cfg["newton"]));
    const Json& dj = cfg["diagnostics"];
    DiagnosticsOptions dopt;
    dopt.A = dj["A"].get<double>();
    dopt.B = dj["B"].get<double>();
    dopt.kappa_c = dj["kappa_c_factor"].get<double>() * grid.spacing(0);
    dopt.mask_level = dj["mask_level"].get<double>();
    const double slack = cfg["checks"]["max_principle_slack"].get<double>();

    std::string sweep = csv_line({"epsilon", "beta", "q_max", "grad_bound", "hess_int", "hess_glob", "vol_relerr",
                                  "fitted_B", "gap"});
    Json legs_json = Json::array();
    bool mp_all = true, gap_decreasing = true;
    std::optional<double> prev_gap;
    for (std::size_t k = 0; k < cont.legs.size(); ++k) {
        const PenalizedSolution& s = cont.legs[k];
        ctx.write_field("f_leg" + two_digits(k) + ".csv", s.f);
        const std::size_t e = static_cast<std::size_t>(std::find(eps_list.begin(), eps_list.end(), s.epsilon) - eps_list.begin());
        const ScalarField& u = env[e]->u;
        const DiagnosticsReport d = diagnose(ref, s.f, u, dopt);
        const double gap = sup_diff(s.f, u);

        // Maximum principle: beta max f <= max log((a + eps g) / g).
        double bound = -std::numeric_limits<double>::infinity();
        for (std::size_t n = 0; n < ref.a.size(); ++n) {
            const double dens = ref.a[n] + s.epsilon * ref.g[n];
            if (dens > 0.0) bound = std::max(bound, std::log(dens / ref.g[n]));
        }
        const double lhs = s.beta * s.f.max();
        const bool mp_ok = !s.report.converged || lhs <= bound + slack;
        mp_all = mp_all && mp_ok;
        // Strictly decreasing, except that an exact solve stays at zero.
        if (prev_gap && !(gap < *prev_gap || (gap == 0.0 && *prev_gap == 0.0))) gap_decreasing = false;
        prev_gap = gap;

        Json leg = {{"preset", ref.preset}, {"epsilon", s.epsilon}, {"beta", s.beta}};
        const Json rj = report_json(s.report);
        for (auto it = rj.begin(); it != rj.end(); ++it) leg[it.key()] = it.value();
        leg["gap"] = gap;
        leg["max_principle"] = {{"beta_max_f", lhs}, {"bound", bound}, {"ok", mp_ok}};
        leg["diagnostics"] = {{"q_max", d.q_max},
                              {"q_argmax", d.q_argmax},
                              {"q_vacuous", d.q_vacuous},
                              {"grad_bound", d.grad_bound},
                              {"hess_int", d.hess_bound_interior},
                              {"hess_glob", d.hess_bound_global},
                              {"volume_lhs", d.volume_lhs},
                              {"volume_rhs", d.volume_rhs},
                              {"vol_relerr", d.volume_relerr},
                              {"fitted_B", d.fitted_B ? Json(*d.fitted_B) : Json()}};
        legs_json.push_back(leg);
        sweep += csv_line({format_double(s.epsilon), format_double(s.beta), d.q_vacuous ? "" : format_double(d.q_max),
                           format_double(d.grad_bound), format_double(d.hess_bound_interior),
                           format_double(d.hess_bound_global), format_double(d.volume_relerr), opt_num(d.fitted_B),
                           format_double(gap)});
    }
    ctx.write_text("sweep.csv", sweep);
    if (cont.failed_leg)
        ctx.fail("leg " + std::to_string(*cont.failed_leg) + ": " + cont.legs[*cont.failed_leg].report.failure);

    Json& sum = ctx.summary();
    sum["envelopes"] = envs;
    sum["legs"] = legs_json;
    sum["checks"] = {{"max_principle_all_legs", mp_all}, {"gap_strictly_decreasing", gap_decreasing}};
}

// ---------------------------------------------------------------- envelope-monotonicity

void validate_monotonicity(Json& cfg) {
    const Grid grid = config_grid(cfg["grid"]);
    resolve_preset(cfg, grid);
    const auto eps = number_list(cfg["epsilons"], "epsilons");
    for (std::size_t k = 0; k < eps.size(); ++k) {
        require(eps[k] >= 0.0, "epsilons must be >= 0");
        if (k) require(eps[k] < eps[k - 1], "epsilons must be strictly decreasing");
    }
    check_psor(cfg["psor"]);
    require(cfg["checks"]["monotone_tol"].get<double>() >= 0.0, "checks.monotone_tol must be >= 0");
}

void run_monotonicity(const Json& cfg, RunContext& ctx) {
    const Grid grid = config_grid(cfg["grid"]);
    const ReferenceData ref = reference_for(cfg, grid);
    std::vector<double> eps;
    for (const auto& e : cfg["epsilons"]) eps.push_back(e.get<double>());
    const PsorOptions popt = psor_options(cfg["psor"]);
    std::vector<std::optional<ObstacleSolution>> sol(eps.size());
    parallel_for(eps.size(), ctx.single_thread(), [&](std::size_t k) { sol[k] = psor_envelope(ref, eps[k], popt); });

    const double tol = cfg["checks"]["monotone_tol"].get<double>();
    std::string sweep = csv_line({"epsilon", "sweeps", "comp_residual", "u_min", "violation"});
    Json runs = Json::array();
    double worst = 0.0;
    for (std::size_t k = 0; k < sol.size(); ++k) {
        ctx.write_field("u_eps" + two_digits(k) + ".csv", sol[k]->u);
        check_envelope(*sol[k], ctx);
        double viol = 0.0;
        if (k)
            for (std::size_t n = 0; n < sol[k]->u.size(); ++n) viol = std::max(viol, sol[k]->u[n] - sol[k - 1]->u[n]);
        worst = std::max(worst, viol);
        runs.push_back(psor_json(*sol[k]));
        sweep += csv_line({format_double(eps[k]), std::to_string(sol[k]->sweeps), format_double(sol[k]->comp_residual),
                           format_double(sol[k]->u.min()), k ? format_double(viol) : ""});
    }
    ctx.write_text("sweep.csv", sweep);
    ctx.summary()["preset"] = ref.preset;
    ctx.summary()["envelopes"] = runs;
    ctx.summary()["checks"] = {{"max_violation", worst}, {"monotone", worst <= tol}};
}

// ---------------------------------------------------------------- volume-identity

void validate_refinement_grid(Json& cfg) {
    const auto ns = count_list(cfg["refinements"], "refinements");
    for (std::size_t k = 1; k < ns.size(); ++k) require(ns[k] > ns[k - 1], "refinements must increase");
    const Grid grid = refined_grid(cfg["grid"], ns.front());
    grid_lengths(cfg["grid"], grid.dims());
    resolve_preset(cfg, grid);
    require(cfg["epsilon"].get<double>() >= 0.0, "epsilon must be >= 0");
    check_psor(cfg["psor"]);
}

void validate_volume(Json& cfg) {
    validate_refinement_grid(cfg);
    require(cfg["kappa_c_factor"].get<double>() > 0.0, "kappa_c_factor must be > 0");
    require(cfg["checks"]["relerr_max"].get<double>() > 0.0, "checks.relerr_max must be > 0");
}

void run_volume(const Json& cfg, RunContext& ctx) {
    const auto ns = count_list(cfg["refinements"], "refinements");
    const double eps = cfg["epsilon"].get<double>(), factor = cfg["kappa_c_factor"].get<double>();
    const PsorOptions popt = psor_options(cfg["psor"]);
    struct Level {
        std::optional<ObstacleSolution> sol;
        VolumeIdentity vi;
        double kappa_c = 0.0, fraction = 0.0, h = 0.0;
    };
    std::vector<Level> lv(ns.size());
    parallel_for(ns.size(), ctx.single_thread(), [&](std::size_t k) {
        const Grid grid = refined_grid(cfg["grid"], ns[k]);
        const ReferenceData ref = reference_for(cfg, grid);
        lv[k].sol = psor_envelope(ref, eps, popt);
        lv[k].h = grid.spacing(0);
        lv[k].kappa_c = factor * lv[k].h;
        lv[k].vi = volume_identity(ref, lv[k].sol->u, lv[k].kappa_c);
        lv[k].fraction = contact_set(lv[k].sol->u, lv[k].kappa_c).fraction;
    });
    std::string sweep = csv_line({"points", "h", "kappa_c", "lhs", "rhs", "relerr", "contact_fraction", "sweeps"});
    Json levels = Json::array();
    bool rhs_le_lhs = true, nonincreasing = true;
    for (std::size_t k = 0; k < lv.size(); ++k) {
        ctx.write_field("u_n" + std::to_string(ns[k]) + ".csv", lv[k].sol->u);
        check_envelope(*lv[k].sol, ctx);
        rhs_le_lhs = rhs_le_lhs && lv[k].vi.rhs <= lv[k].vi.lhs;
        if (k) nonincreasing = nonincreasing && lv[k].vi.relerr <= lv[k - 1].vi.relerr;
        Json j = psor_json(*lv[k].sol);
        j["points"] = ns[k];
        j["kappa_c"] = lv[k].kappa_c;
        j["lhs"] = lv[k].vi.lhs;
        j["rhs"] = lv[k].vi.rhs;
        j["relerr"] = lv[k].vi.relerr;
        j["contact_fraction"] = lv[k].fraction;
        levels.push_back(j);
        sweep += csv_line({std::to_string(ns[k]), format_double(lv[k].h), format_double(lv[k].kappa_c),
                           format_double(lv[k].vi.lhs), format_double(lv[k].vi.rhs), format_double(lv[k].vi.relerr),
                           format_double(lv[k].fraction), std::to_string(lv[k].sol->sweeps)});
    }
    ctx.write_text("sweep.csv", sweep);
    ctx.summary()["preset"] = cfg["preset"];
    ctx.summary()["levels"] = levels;
    ctx.summary()["checks"] = {{"rhs_le_lhs", rhs_le_lhs},
                               {"relerr_nonincreasing", nonincreasing},
                               {"finest_relerr_ok", lv.back().vi.relerr <= cfg["checks"]["relerr_max"].get<double>()}};
}

// ---------------------------------------------------------------- duality-crosscheck

void validate_duality(Json& cfg) {
    require(cfg["preset"].get<std::string>() == "custom", "duality-crosscheck needs the 'custom' preset");
    require(cfg["grid"]["dims"].get<long long>() == 1, "duality-crosscheck is one-dimensional");
    validate_refinement_grid(cfg);
    const long long periods = cfg["periods"].get<long long>();
    require(periods >= 3 && periods % 2 == 1, "periods must be odd and >= 3");
    require(cfg["checks"]["rate_factor"].get<double>() > 0.0, "checks.rate_factor must be > 0");
}

void run_duality(const Json& cfg, RunContext& ctx) {
    const auto ns = count_list(cfg["refinements"], "refinements");
    const double eps = cfg["epsilon"].get<double>();
    const auto periods = cfg["periods"].get<std::size_t>();
    const PsorOptions popt = psor_options(cfg["psor"]);
    std::vector<std::optional<ObstacleSolution>> ps(ns.size());
    std::vector<std::optional<ScalarField>> du(ns.size());
    parallel_for(ns.size(), ctx.single_thread(), [&](std::size_t k) {
        const ReferenceData ref = reference_for(cfg, refined_grid(cfg["grid"], ns[k]));
        ps[k] = psor_envelope(ref, eps, popt);
        du[k] = envelope_by_duality(ref, custom_preset_potential(ref, eps), periods);
    });
    const double factor = cfg["checks"]["rate_factor"].get<double>();
    std::string sweep = csv_line({"points", "h", "gap", "ratio", "sweeps"});
    Json levels = Json::array();
    bool rate_ok = true;
    std::optional<double> prev;
    for (std::size_t k = 0; k < ns.size(); ++k) {
        ctx.write_field("u_psor_n" + std::to_string(ns[k]) + ".csv", ps[k]->u);
        ctx.write_field("u_dual_n" + std::to_string(ns[k]) + ".csv", *du[k]);
        check_envelope(*ps[k], ctx);
        const double gap = sup_diff(ps[k]->u, *du[k]);
        std::optional<double> ratio;
        if (prev) {
            ratio = gap / *prev;
            rate_ok = rate_ok && *ratio <= factor;
        }
        prev = gap;
        levels.push_back({{"points", ns[k]}, {"gap", gap}, {"ratio", ratio ? Json(*ratio) : Json()}, {"sweeps", ps[k]->sweeps}});
        sweep += csv_line({std::to_string(ns[k]), format_double(ps[k]->u.grid().spacing(0)), format_double(gap),
                           opt_num(ratio), std::to_string(ps[k]->sweeps)});
    }
    ctx.write_text("sweep.csv", sweep);
    ctx.summary()["levels"] = levels;
    ctx.summary()["checks"] = {{"gap_rate_ok", rate_ok}};
}

// ---------------------------------------------------------------- geodesic-gamma

struct GeodesicSetup {
    ReferenceData ref;
    ScalarField phi0, phi1;
    Grid strip;
};

GeodesicSetup geodesic_setup(const Json& cfg) {
    const Json& c = cfg["circle"];
    const Grid circle = periodic_grid(1, {c["points"].get<std::size_t>()}, {c["length"].get<double>()});
    ReferenceData ref = reference_for(cfg, circle);
    const Json& e = cfg["endpoints"];
    const double amp = e["amplitude"].get<double>(), shift = e["shift"].get<double>();
    const double k = 2.0 * std::numbers::pi * e["mode"].get<double>() / circle.length(0);
    ScalarField phi0 = ScalarField::sample(circle, [&](double x) { return amp * std::sin(k * x); });
    ScalarField phi1 = phi0;
    for (std::size_t n = 0; n < phi1.size(); ++n) phi1[n] += shift;
    const Json& s = cfg["strip"];
    Grid strip = make_strip_grid(circle.points(0), s["points"].get<std::size_t>(), circle.length(0), s["length"].get<double>());
    return {std::move(ref), std::move(phi0), std::move(phi1), std::move(strip)};
}

void validate_geodesic(Json& cfg) {
    const Json& c = cfg["circle"];
    const Grid circle = periodic_grid(1, {c["points"].get<std::size_t>()}, {c["length"].get<double>()});
    resolve_preset(cfg, circle);
    const auto gammas = number_list(cfg["gammas"], "gammas");
    for (std::size_t k = 0; k < gammas.size(); ++k) {
        require(gammas[k] > 0.0 && gammas[k] <= 0.5, "gammas must lie in (0, 1/2]");
        if (k) require(gammas[k] < gammas[k - 1], "gammas must be strictly decreasing");
    }
    const Json& sol = cfg["solver"];
    require(sol["tol"].get<double>() > 0.0 && sol["linear_tol"].get<double>() > 0.0, "solver tolerances must be > 0");
    require(sol["max_iter"].get<std::size_t>() >= 1, "solver.max_iter must be >= 1");
    const GeodesicSetup g = geodesic_setup(cfg);  // throws on bad strip sizes
    const ScalarField lap = laplacian(g.phi0);
    for (std::size_t n = 0; n < lap.size(); ++n)
        require(g.ref.g[n] + lap[n] > 0.0, "endpoints are not strictly psh: lower 'endpoints.amplitude'");
    require(cfg["checks"]["ode_tol_factor"].get<double>() > 0.0, "checks.ode_tol_factor must be > 0");
}

void run_geodesic(const Json& cfg, RunContext& ctx) {
    const GeodesicSetup g = geodesic_setup(cfg);
    std::vector<double> gammas;
    for (const auto& x : cfg["gammas"]) gammas.push_back(x.get<double>());
    const Json& sj = cfg["solver"];
    GeodesicOptions opt;
    opt.tol = sj["tol"].get<double>();
    opt.max_iter = sj["max_iter"].get<std::size_t>();
    opt.linear_tol = sj["linear_tol"].get<double>();
    opt.min_step = sj["min_step"].get<double>();

    std::vector<std::optional<GeodesicSolution>> sols(gammas.size());
    parallel_for(gammas.size(), ctx.single_thread(),
                 [&](std::size_t k) { sols[k] = solve_geodesic(g.ref, g.phi0, g.phi1, gammas[k], g.strip, opt); });

    // Frozen-x ODE reference: φ_ss = γ² rhs / (g + (1 - γ) φ0'') with rhs = g.
    const double S = g.strip.length(1), shift = cfg["endpoints"]["shift"].get<double>();
    const ScalarField lap0 = laplacian(g.phi0);
    const double rhs_over_g = 1.0;  // the strip family uses rhs = g
    const double ode_tol = cfg["checks"]["ode_tol_factor"].get<double>() * S * S * rhs_over_g;
    const double target = cfg["checks"]["ratio_target"].get<double>(), rslack = cfg["checks"]["ratio_slack"].get<double>();

    std::string sweep = csv_line({"gamma", "iterations", "final_residual", "det_residual", "homog_residual", "homog_ratio", "ode_error"});
    Json legs = Json::array();
    bool ode_ok = true, ratio_ok = true;
    std::optional<double> prev_homog;
    const std::size_t nx = g.strip.extent(0), ns = g.strip.extent(1);
    for (std::size_t k = 0; k < sols.size(); ++k) {
        const GeodesicSolution& s = *sols[k];
        ctx.write_field("phi_g" + two_digits(k) + ".csv", s.phi);
        if (!s.report.converged) ctx.fail("gamma " + format_double(s.gamma) + ": " + s.report.failure);
        const double homog = sup_norm(geodesic_residual(s.phi, g.ref, 0.0).values());
        double ode = 0.0;
        for (std::size_t i = 0; i < nx; ++i) {
            const double coef = s.gamma * s.gamma * g.ref.g[i] / (g.ref.g[i] + (1.0 - s.gamma) * lap0[i]);
            for (std::size_t j = 0; j < ns; ++j) {
                const double sv = g.strip.coord(1, j);
                const double ref_val = (1.0 - s.gamma) * (g.phi0[i] + shift * sv / S) - 0.5 * coef * sv * (S - sv);
                ode = std::max(ode, std::abs(s.phi[g.strip.index(i, j)] - ref_val));
            }
        }
        ode_ok = ode_ok && ode <= ode_tol;
        std::optional<double> ratio;
        if (prev_homog && k && std::abs(gammas[k - 1] - 2.0 * gammas[k]) <= 1e-12 * gammas[k - 1]) {
            ratio = *prev_homog / homog;
            ratio_ok = ratio_ok && std::abs(*ratio - target) <= rslack * target;
        }
        prev_homog = homog;
        Json leg = {{"preset", g.ref.preset}, {"gamma", s.gamma}};
        const Json rj = report_json(s.report);
        for (auto it = rj.begin(); it != rj.end(); ++it) leg[it.key()] = it.value();
        leg["det_residual"] = s.det_residual;
        leg["homog_residual"] = homog;
        leg["homog_ratio"] = ratio ? Json(*ratio) : Json();
        leg["ode_error"] = ode;
        legs.push_back(leg);
        sweep += csv_line({format_double(s.gamma), std::to_string(s.report.iterations),
                           format_double(s.report.residual_history.back()), format_double(s.det_residual),
                           format_double(homog), opt_num(ratio), format_double(ode)});
    }
    ctx.write_text("sweep.csv", sweep);
    ctx.summary()["legs"] = legs;
    ctx.summary()["checks"] = {{"ode_tolerance", ode_tol}, {"ode_ok", ode_ok}, {"gamma_squared_scaling_ok", ratio_ok}};
}

// ---------------------------------------------------------------- toric-ray-audit

RayData ray_from(const Json& cfg) {
    const auto P = cfg["polytope"];
    const double lo = P[0].get<double>(), hi = P[1].get<double>();
    const Polytope poly = Polytope::interval(lo, hi);
    const std::string kind = cfg["u0"]["kind"].get<std::string>();
    const double scale = cfg["u0"]["scale"].get<double>();
    std::function<double(Point2)> u0;
    if (kind == "quadratic") {
        u0 = [scale](Point2 p) { return 0.5 * scale * p[0] * p[0]; };
    } else if (kind == "guillemin") {
        // Boundary-adapted potential: sum of l log l over the facet distances.
        u0 = [scale, lo, hi](Point2 p) {
            auto xlogx = [](double l) { return l > 0.0 ? l * std::log(l) : 0.0; };
            return 0.5 * scale * (xlogx(p[0] - lo) + xlogx(hi - p[0]));
        };
    } else {
        throw ConfigError("u0.kind must be 'quadratic' or 'guillemin'");
    }
    RayData ray{make_sample({uniform_axis(lo, hi, cfg["nodes"].get<std::size_t>())}, u0, poly), {}, {}, {}};
    std::vector<double> slopes, bps;
    for (const auto& v : cfg["F"]["slopes"]) slopes.push_back(v.get<double>());
    for (const auto& v : cfg["F"]["breakpoints"]) bps.push_back(v.get<double>());
    ray.F = pl_from_breakpoints(slopes, bps, cfg["F"]["value_at_zero"].get<double>());
    for (const auto& t : cfg["t_values"]) ray.t_values.push_back(t.get<double>());
    const Json& w = cfg["window"];
    ray.window = {uniform_axis(w["lo"].get<double>(), w["hi"].get<double>(), w["nodes"].get<std::size_t>())};
    return ray;
}

void validate_toric(Json& cfg) {
    const auto P = number_list(cfg["polytope"], "polytope");
    require(P.size() == 2 && P[0] < P[1], "polytope must be [lo, hi] with lo < hi");
    require(cfg["nodes"].get<std::size_t>() >= 4, "nodes must be >= 4");
    require(cfg["u0"]["scale"].get<double>() > 0.0, "u0.scale must be > 0");
    number_list(cfg["F"]["slopes"], "F.slopes");
    const auto bps = number_list(cfg["F"]["breakpoints"], "F.breakpoints", true);
    for (double b : bps) require(b > P[0] && b < P[1], "F.breakpoints must lie inside the polytope");
    const auto ts = number_list(cfg["t_values"], "t_values");
    require(ts.size() >= 3, "t_values needs at least 3 entries");
    const Json& w = cfg["window"];
    require(w["lo"].get<double>() < w["hi"].get<double>() && w["nodes"].get<std::size_t>() >= 4,
            "window needs lo < hi and nodes >= 4");
    RayData ray = ray_from(cfg);
    try {
        toric_ray(ray);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

void run_toric(const Json& cfg, RunContext& ctx) {
    const RayData ray = ray_from(cfg);
    const RayOutput out = toric_ray(ray);
    const RayAudit a = ray_c11_audit(out);
    const Json& c = cfg["checks"];
    const double h = ray.window[0][1] - ray.window[0][0];

    // Discrete geodesic inequality wherever the t-list contains a midpoint.
    const double gslack = c["geodesic_slack"].get<double>();
    double geo_worst = -std::numeric_limits<double>::infinity();
    const auto& t = out.t_values;
    for (std::size_t i = 0; i < t.size(); ++i)
        for (std::size_t k = i + 2; k < t.size(); ++k)
            for (std::size_t m = i + 1; m < k; ++m) {
                if (t[m] != 0.5 * (t[i] + t[k])) continue;
                for (std::size_t n = 0; n < out.potentials[m].size(); ++n)
                    geo_worst = std::max(geo_worst, out.potentials[m].values[n] -
                                                        0.5 * (out.potentials[i].values[n] + out.potentials[k].values[n]));
            }

    std::string sweep = csv_line({"t", "second_x_sup", "crease_images"});
    for (std::size_t j = 0; j < t.size(); ++j) {
        ctx.write_sample("u_t" + two_digits(j) + ".csv", out.symplectic[j]);
        ctx.write_sample("phi_t" + two_digits(j) + ".csv", out.potentials[j]);
        const auto count = std::count_if(a.crease_images.begin(), a.crease_images.end(),
                                         [j](const CreaseImage& ci) { return ci.t_index == j; });
        sweep += csv_line({format_double(t[j]), format_double(a.second_x_sup[j]), std::to_string(count)});
    }
    ctx.write_text("sweep.csv", sweep);

    Json images = Json::array();
    for (const auto& ci : a.crease_images) images.push_back({{"t", t[ci.t_index]}, {"x_lo", ci.x_lo}, {"x_hi", ci.x_hi}});
    const double res_bound = c["residual_factor"].get<double>() * h;
    Json& sum = ctx.summary();
    sum["audit"] = {{"hcma_residual", a.hcma_residual},
                    {"residual_node", {{"x", ray.window[0][a.residual_x]}, {"t", t[a.residual_t]}}},
                    {"audited_nodes", a.audited_nodes},
                    {"excluded_nodes", a.excluded_nodes},
                    {"second_x_sup", a.second_x_sup},
                    {"c11_bound", a.c11_bound},
                    {"c11_ratio", a.c11_ratio},
                    {"crease_detected", a.crease_detected},
                    {"crease_nodes", a.crease_nodes},
                    {"crease_images", images},
                    {"crease_jump", a.crease_jump},
                    {"detector", a.detector},
                    {"geodesic_inequality_worst", std::isfinite(geo_worst) ? Json(geo_worst) : Json()}};
    sum["checks"] = {{"residual_bound", res_bound},
                     {"residual_ok", a.hcma_residual <= res_bound},
                     {"c11_ok", a.c11_ratio <= c["c11_factor"].get<double>()},
                     {"crease_jump_ok", a.crease_jump >= c["jump_min"].get<double>()},
                     {"geodesic_inequality_ok", !std::isfinite(geo_worst) || geo_worst <= gslack}};
}

std::vector<Recipe> build_registry() {
    std::vector<Recipe> r;
    r.push_back({"beta-sweep",
                 "warm-started (epsilon, beta) continuation against the PSOR envelope, with diagnostics",
                 {{"preset", "kahler"},
                  {"params", Json::object()},
                  {"grid", {{"dims", 2}, {"points", {64, 64}}, {"lengths", {1.0, 1.0}}}},
                  {"schedule", Json::array({Json{{"epsilon", 1e-3}, {"beta", 100.0}}})},
                  {"newton", kNewtonDefaults},
                  {"psor", kPsorDefaults},
                  {"diagnostics", {{"A", 10.0}, {"B", 2.0}, {"kappa_c_factor", 10.0}, {"mask_level", nullptr}}},
                  {"checks", {{"max_principle_slack", 1e-6}}}},
                 validate_beta_sweep,
                 run_beta_sweep});
    r.push_back({"duality-crosscheck",
                 "1-d envelope by convex duality versus PSOR under grid refinement",
                 {{"preset", "custom"},
                  {"params", {{"a0", 0.5}, {"a1", 1.0}}},
                  {"grid", {{"dims", 1}, {"lengths", {1.0}}}},
                  {"refinements", {128, 256, 512}},
                  {"epsilon", 1e-3},
                  {"periods", 3},
                  {"psor", {{"relax", 1.98}, {"tol", 1e-10}, {"max_sweeps", 2000000}}},
                  {"checks", {{"rate_factor", 0.65}}}},
                 validate_duality,
                 run_duality});
    r.push_back({"envelope-monotonicity",
                 "PSOR envelopes for a decreasing epsilon list, checked pointwise",
                 {{"preset", "degenerate_point"},
                  {"params", Json::object()},
                  {"grid", {{"dims", 2}, {"points", {64, 64}}, {"lengths", {16.0, 16.0}}}},
                  {"epsilons", {0.1, 0.01, 0.001}},
                  {"psor", kPsorDefaults},
                  {"checks", {{"monotone_tol", 1e-8}}}},
                 validate_monotonicity,
                 run_monotonicity});
    r.push_back({"geodesic-gamma",
                 "gamma-continuation on the strip: ODE reference and gamma^2 residual scaling",
                 {{"preset", "kahler"},
                  {"params", Json::object()},
                  {"circle", {{"points", 64}, {"length", 1.0}}},
                  {"strip", {{"points", 32}, {"length", 1.0}}},
                  {"endpoints", {{"amplitude", 1e-3}, {"mode", 1.0}, {"shift", 0.3}}},
                  {"gammas", {0.5, 0.25, 0.125, 0.0625}},
                  {"solver", {{"tol", 1e-10}, {"max_iter", 100}, {"linear_tol", 1e-10}, {"min_step", 0x1p-20}}},
                  {"checks", {{"ode_tol_factor", 1e-3}, {"ratio_target", 4.0}, {"ratio_slack", 0.3}}}},
                 validate_geodesic,
                 run_geodesic});
    r.push_back({"toric-ray-audit",
                 "toric geodesic ray (u0 + tF)* by Legendre transform, with C^{1,1} audit",
                 {{"polytope", {-1.0, 1.0}},
                  {"nodes", 512},
                  {"u0", {{"kind", "quadratic"}, {"scale", 1.0}}},
                  {"F", {{"slopes", {-0.0625, 0.0625}}, {"breakpoints", {0.5}}, {"value_at_zero", 0.03125}}},
                  {"window", {{"lo", -0.8125}, {"hi", 0.8125}, {"nodes", 416}}},
                  {"t_values", {0.0, 1.0, 2.0, 4.0}},
                  {"checks", {{"residual_factor", 10.0}, {"c11_factor", 2.0}, {"jump_min", 0.25}, {"geodesic_slack", 1e-8}}}},
                 validate_toric,
                 run_toric});
    r.push_back({"volume-identity",
                 "contact-set volume identity of the PSOR envelope under grid refinement",
                 {{"preset", "degenerate_point"},
                  {"params", Json::object()},
                  {"grid", {{"dims", 2}, {"lengths", {16.0, 16.0}}}},
                  {"refinements", {64, 128}},
                  {"epsilon", 1e-3},
                  {"kappa_c_factor", 10.0},
                  {"psor", {{"relax", 1.9}, {"tol", 1e-8}, {"max_sweeps", 200000}}},
                  {"checks", {{"relerr_max", 0.05}}}},
                 validate_volume,
                 run_volume});
    std::sort(r.begin(), r.end(), [](const Recipe& a, const Recipe& b) { return a.name < b.name; });
    return r;
}

}  // namespace

const std::vector<Recipe>& recipe_registry() {
    static const std::vector<Recipe> registry = build_registry();
    return registry;
}

const Recipe& find_recipe(const std::string& name) {
    for (const auto& r : recipe_registry())
        if (r.name == name) return r;
    throw std::out_of_range("unknown recipe '" + name + "'");
}

}  // namespace cmalab::detail

#pragma once

#include <map>
#include <string>

#include "cmalab/grid.hpp"

namespace cmalab {

using ParamMap = std::map<std::string, double>;

/// Model data: density `a` of the (possibly degenerate) class, background
/// density `g`, singular weight `psi` and the degeneracy mask.
struct ReferenceData {
    std::string preset;
    ParamMap params;  ///< fully resolved, defaults included
    ScalarField a;
    ScalarField g;
    ScalarField psi;
    double kappa = 1.0;
    NodeMask degeneracy_nodes;
    std::size_t pole_node = 0;  ///< argmin of psi

    const Grid& grid() const { return a.grid(); }
};

/// Presets:
///  - `kahler`: a = g = g0, psi = 0.
///  - `degenerate_point`: a = (1 - (1 + lam*rho_p) e^{-rho_p}) * (1 - well * e^{-rho_q})
///    with rho_p = d(x,p)^2 / r_p^2 and rho_q = d(x,q)^2 / r_q^2, q antipodal to p.
///    a vanishes quadratically at p and is negative on a ring around it; the
///    optional antipodal well gives a free boundary far from the pole.
///    psi = kappa/2 * log(d(x,p)^2 + sigma^2) - c_norm with max psi = 0.
///  - `degenerate_annulus`: same profile in the distance to the circle
///    |x - p| = radius.
///  - `custom`: a = a0 + a1 cos(2 pi x / L0), g = g0, psi = 0.
///
/// Throws std::invalid_argument on unknown presets or when mean(a) <= 0.
ReferenceData make_reference(const std::string& preset, const Grid& grid, const ParamMap& params = {});

/// Resolved parameter set (defaults merged in) without building fields.
ParamMap resolve_preset_params(const std::string& preset, const Grid& grid, const ParamMap& params);

bool is_known_preset(const std::string& preset);

struct WeightField {
    double B = 0.0;
    ScalarField w;
};

/// w = exp(B * psi). Requires B > 0.
WeightField weight(const ReferenceData& ref, double B);

/// Non-degenerate reference for the geodesic continuation.
struct GammaFamily {
    double gamma = 0.5;
    ScalarField a_gamma;    ///< (1 - gamma) a0 + gamma aK
    ScalarField rhs_gamma;  ///< gamma^n * volume density
};

GammaFamily make_gamma_family(const ScalarField& a0, const ScalarField& a_kahler,
                              const ScalarField& volume_density, double gamma, int n);

/// Periodic-aware Euclidean distance between node coordinates and a point.
double grid_distance(const Grid& grid, std::span<const double> x, std::span<const double> p);

}  // namespace cmalab

#pragma once

#include "cmalab/penalized.hpp"

namespace cmalab {

/// Dirichlet problem on the strip (x periodic, s in [0, S]):
///   det [[g + φ_xx, φ_xs], [φ_xs, φ_ss]] = γ² rhs,  rhs = g,
///   φ(., 0) = (1 - γ) φ0,  φ(., S) = (1 - γ) φ1.
struct GeodesicSolution {
    ScalarField phi;
    double gamma = 0.5;
    ScalarField phi0;
    ScalarField phi1;
    NewtonReport report;  ///< residuals are sup |log det M - log(γ² rhs)|
    double det_residual = 0.0;  ///< sup |det M - γ² rhs| at the final iterate
};

/// Per-node real Monge-Ampère matrix entries at interior nodes.
struct StripMatrix {
    double m11;  ///< g + φ_xx
    double m12;  ///< φ_xs
    double m22;  ///< φ_ss
    double det() const { return m11 * m22 - m12 * m12; }
};

/// x-periodic, s-dirichlet grid with matching x-circle.
Grid make_strip_grid(std::size_t nx, std::size_t ns, double length_x, double length_s);

/// Matrix entries at every node; zero on the boundary rows.
std::vector<StripMatrix> strip_matrices(const ScalarField& phi, const ReferenceData& ref);

/// R = det M(φ) - γ² rhs at interior nodes; zero on the boundary rows.
/// `ref` lives on the x-circle matching the strip's x axis. gamma = 0 gives
/// the homogeneous residual.
ScalarField geodesic_residual(const ScalarField& phi, const ReferenceData& ref, double gamma);

struct GeodesicOptions {
    double tol = 1e-10;  ///< on the log-determinant residual, raised to the rounding floor for small γ
    std::size_t max_iter = 100;
    double linear_tol = 1e-10;
    double min_step = 0x1p-20;
};

/// Damped Newton on log det M, started from the convexified linear
/// interpolant of the boundary data. Throws std::invalid_argument unless
/// both endpoints satisfy g + φ'' > 0 at every node.
GeodesicSolution solve_geodesic(const ReferenceData& ref, const ScalarField& phi0, const ScalarField& phi1,
                                double gamma, const Grid& strip, const GeodesicOptions& opt = {});

/// The starting iterate used by solve_geodesic.
ScalarField geodesic_subsolution(const ReferenceData& ref, const ScalarField& phi0, const ScalarField& phi1,
                                 double gamma, const Grid& strip);

}  // namespace cmalab

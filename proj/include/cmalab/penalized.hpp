#pragma once

#include <optional>
#include <vector>

#include "cmalab/reference.hpp"

namespace cmalab {

struct NewtonReport {
    std::size_t iterations = 0;
    std::vector<double> residual_history;  ///< sup-norms, initial iterate first
    bool converged = false;
    std::size_t damping_events = 0;
    double final_positivity_margin = 0.0;
    bool saturated = false;  ///< the exponential clamp fired at some iterate
    std::size_t linear_iterations = 0;
    std::string failure;  ///< empty on success
};

/// Solution of a + eps g + Δf/2 = e^{beta f} g.
struct PenalizedSolution {
    ScalarField f;
    double epsilon = 0.0;
    double beta = 1.0;
    NewtonReport report;
};

struct NewtonOptions {
    double tol = 1e-9;
    std::size_t max_iter = 200;
    double linear_tol = 1e-10;
    double min_step = 0x1p-20;
    /// Rounding slack for the positivity test: where the density is
    /// exponentially small it cannot be resolved below the residual scale.
    double positivity_slack = 1e-9;
};

/// Exponent cap for e^{beta f + log g}.
inline constexpr double kExpClamp = 700.0;

struct BetaResidual {
    ScalarField residual;
    bool saturated = false;
};

/// R = a + eps g + Δf/2 - e^{beta f} g, exponent clamped at kExpClamp.
BetaResidual beta_residual(const ScalarField& f, const ReferenceData& ref, double epsilon, double beta);

/// Damped Newton. Without `init` the iteration starts from f = 0.
PenalizedSolution solve_beta(const ReferenceData& ref, double epsilon, double beta,
                             const std::optional<ScalarField>& init = std::nullopt,
                             const NewtonOptions& opt = {});

struct ScheduleLeg {
    double epsilon;
    double beta;
};

struct ContinuationResult {
    std::vector<PenalizedSolution> legs;
    std::optional<std::size_t> failed_leg;  ///< index of the first non-converged leg
};

/// Warm-started sweep; epsilon must be non-increasing and beta non-decreasing.
/// Stops at the first leg that fails to converge.
ContinuationResult continuation_beta(const ReferenceData& ref, const std::vector<ScheduleLeg>& schedule,
                                     const NewtonOptions& opt = {});

}  // namespace cmalab

#pragma once

#include <vector>

#include "cmalab/reference.hpp"

namespace cmalab {

/// Discrete envelope: u <= 0, a + eps*g + Δu/2 >= 0, with complementarity.
struct ObstacleSolution {
    ScalarField u;
    double epsilon = 0.0;
    double comp_residual = 0.0;  ///< max |min(-u, a + eps g + Δu/2)|
    std::size_t sweeps = 0;
    bool converged = false;
};

struct PsorOptions {
    double relax = 1.8;
    double tol = 1e-8;
    std::size_t max_sweeps = 200000;
};

/// Projected SOR over nodes in lexicographic order, starting from u = 0.
/// Periodic grids only (the envelope lives on a closed manifold).
ObstacleSolution psor_envelope(const ReferenceData& ref, double epsilon, const PsorOptions& opt = {});

/// Same iteration from a caller-provided start (must satisfy u <= 0).
ObstacleSolution psor_envelope(const ReferenceData& ref, double epsilon, const PsorOptions& opt,
                               ScalarField start);

/// Pointwise complementarity defect of a candidate envelope.
double complementarity_residual(const ReferenceData& ref, double epsilon, const ScalarField& u);

/// a + eps g + Δu/2 at every node.
ScalarField positivity_density(const ReferenceData& ref, double epsilon, const ScalarField& u);

struct MonotonicityReport {
    std::vector<double> epsilons;
    std::vector<ObstacleSolution> solutions;
    double max_violation = 0.0;  ///< max over pairs of (u_{i+1} - u_i)^+
    bool monotone = true;
    double tolerance = 1e-8;
};

/// Checks u_{eps_i} >= u_{eps_{i+1}} - tolerance for a strictly decreasing list.
MonotonicityReport envelope_monotonicity_check(const ReferenceData& ref, const std::vector<double>& eps_list,
                                               const PsorOptions& opt = {}, double tolerance = 1e-8);

}  // namespace cmalab

#pragma once

#include <optional>

#include "cmalab/reference.hpp"

namespace cmalab {

/// rho(tau) = -1/2 log(1 + S - tau) on [0, S], with S frozen when the
/// spec is built.
struct RhoSpec {
    double S = 0.0;
};

struct RhoValue {
    double value;
    double deriv;
    double second_deriv;
};

/// Throws std::domain_error outside [0, S].
RhoValue rho_eval(const RhoSpec& spec, double tau);

/// Largest eigenvalue of the nodal Hessian (closed form, d <= 2).
ScalarField lambda1_field(const HessianField& H);

double lambda1(const Sym2& m, std::size_t dims);

struct QResult {
    ScalarField q;     ///< zero where undefined
    NodeMask defined;  ///< lambda1 > 0
    bool vacuous = true;
    double max = 0.0;
    std::size_t argmax = 0;
    double S = 0.0;  ///< frozen sup of w |∂f|²
};

/// Q = log lambda1(∇²f) + rho(w |∂f|²) - A (f - psi) where lambda1 > 0.
QResult q_functional(const ScalarField& f, const ReferenceData& ref, const WeightField& weight, double A);

/// max w |∂f|².
double weighted_gradient_bound(const ScalarField& f, const WeightField& weight);

struct HessianBounds {
    double global = 0.0;    ///< max w lambda1^+
    double interior = 0.0;  ///< max lambda1^+ on the mask, unweighted
};

HessianBounds weighted_hessian_bound(const ScalarField& f, const WeightField& weight, const NodeMask& interior_mask);

/// Nodes with psi >= level (default -kappa/2): "away from the degeneracy".
NodeMask interior_mask(const ReferenceData& ref, std::optional<double> level = std::nullopt);

struct ContactSet {
    NodeMask mask;
    double kappa_c = 0.0;
    double fraction = 0.0;
};

ContactSet contact_set(const ScalarField& u, double kappa_c);

struct VolumeIdentity {
    double lhs = 0.0;  ///< sum a h^d over all nodes
    double rhs = 0.0;  ///< same sum over the contact mask
    double relerr = 0.0;
};

VolumeIdentity volume_identity(const ReferenceData& ref, const ScalarField& u, double kappa_c);

/// Least-squares slope of log(field) against -psi over the masked band.
/// Throws std::invalid_argument if psi is constant on the band or the
/// field is not positive there.
double growth_fit(const ScalarField& field, const ScalarField& psi, const NodeMask& band);

/// One-dimensional free-boundary audit of an envelope: jump of Δu/2 across
/// each contact/non-contact transition, with the analytic value a + eps g
/// at the transition for comparison.
struct FreeBoundaryJump {
    std::size_t node;  ///< last contact node before the transition
    double jump;
    double analytic;
};

std::vector<FreeBoundaryJump> free_boundary_jumps(const ReferenceData& ref, const ScalarField& u, double epsilon);

struct DiagnosticsOptions {
    double A = 10.0;
    double B = 2.0;
    std::optional<double> kappa_c;  ///< defaults to 10 h
    std::optional<double> mask_level;
};

struct DiagnosticsReport {
    double q_max = 0.0;
    std::size_t q_argmax = 0;
    bool q_vacuous = true;
    double grad_bound = 0.0;
    double hess_bound_interior = 0.0;
    double hess_bound_global = 0.0;
    double volume_lhs = 0.0;
    double volume_rhs = 0.0;
    double volume_relerr = 0.0;
    std::optional<double> fitted_B;
};

/// Runs every audit on a penalized solution `f` against an envelope `u`.
DiagnosticsReport diagnose(const ReferenceData& ref, const ScalarField& f, const ScalarField& u,
                           const DiagnosticsOptions& opt = {});

}  // namespace cmalab

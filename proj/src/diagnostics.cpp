#include "cmalab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cmalab {

RhoValue rho_eval(const RhoSpec& spec, double tau) {
    if (!(spec.S >= 0.0)) throw std::domain_error("rho: S must be >= 0");
    if (!(tau >= 0.0 && tau <= spec.S)) throw std::domain_error("rho: tau outside [0, S]");
    const double arg = 1.0 + spec.S - tau;
    const double d1 = 0.5 / arg;
    return {-0.5 * std::log(arg), d1, 2.0 * d1 * d1};
}

double lambda1(const Sym2& m, std::size_t dims) {
    if (dims == 1) return m.xx;
    const double mean = 0.5 * (m.xx + m.yy);
    const double half = 0.5 * (m.xx - m.yy);
    return mean + std::hypot(half, m.xy);
}

ScalarField lambda1_field(const HessianField& H) {
    ScalarField out(H.grid);
    for (std::size_t n = 0; n < H.entries.size(); ++n) out[n] = lambda1(H.entries[n], H.grid.dims());
    return out;
}

double weighted_gradient_bound(const ScalarField& f, const WeightField& weight) {
    require_same_grid(f, weight.w, "weighted_gradient_bound");
    const ScalarField g2 = gradient_sq(f);
    double m = 0.0;
    for (std::size_t n = 0; n < f.size(); ++n) m = std::max(m, weight.w[n] * g2[n]);
    return m;
}

QResult q_functional(const ScalarField& f, const ReferenceData& ref, const WeightField& weight, double A) {
    require_same_grid(f, ref.psi, "q_functional");
    require_same_grid(f, weight.w, "q_functional");
    const Grid& grid = f.grid();
    const ScalarField lam = lambda1_field(hessian(f));
    const ScalarField g2 = gradient_sq(f);

    QResult out{ScalarField(grid), NodeMask(grid.node_count(), false), true, 0.0, 0, 0.0};
    std::vector<double> tau(grid.node_count());
    for (std::size_t n = 0; n < tau.size(); ++n) {
        tau[n] = weight.w[n] * g2[n];
        out.S = std::max(out.S, tau[n]);
    }
    const RhoSpec spec{out.S};
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < tau.size(); ++n) {
        if (!(lam[n] > 0.0) || grid.on_boundary(n)) continue;
        out.defined[n] = true;
        out.q[n] = std::log(lam[n]) + rho_eval(spec, tau[n]).value - A * (f[n] - ref.psi[n]);
        if (out.q[n] > best) {
            best = out.q[n];
            out.argmax = n;
        }
    }
    out.vacuous = !std::isfinite(best);
    out.max = out.vacuous ? 0.0 : best;
    return out;
}

HessianBounds weighted_hessian_bound(const ScalarField& f, const WeightField& weight, const NodeMask& interior_mask) {
    require_same_grid(f, weight.w, "weighted_hessian_bound");
    if (interior_mask.size() != f.size()) throw std::invalid_argument("weighted_hessian_bound: mask size mismatch");
    const ScalarField lam = lambda1_field(hessian(f));
    HessianBounds b;
    for (std::size_t n = 0; n < f.size(); ++n) {
        const double pos = std::max(lam[n], 0.0);
        b.global = std::max(b.global, weight.w[n] * pos);
        if (interior_mask[n]) b.interior = std::max(b.interior, pos);
    }
    return b;
}

NodeMask interior_mask(const ReferenceData& ref, std::optional<double> level) {
    const double lv = level.value_or(-0.5 * ref.kappa);
    NodeMask m(ref.psi.size());
    for (std::size_t n = 0; n < m.size(); ++n) m[n] = ref.psi[n] >= lv;
    return m;
}

ContactSet contact_set(const ScalarField& u, double kappa_c) {
    if (!(kappa_c > 0.0)) throw std::invalid_argument("contact_set: kappa_c must be > 0");
    ContactSet c{NodeMask(u.size()), kappa_c, 0.0};
    std::size_t count = 0;
    for (std::size_t n = 0; n < u.size(); ++n) {
        c.mask[n] = u[n] >= -kappa_c;
        count += c.mask[n] ? 1 : 0;
    }
    c.fraction = static_cast<double>(count) / static_cast<double>(u.size());
    return c;
}

VolumeIdentity volume_identity(const ReferenceData& ref, const ScalarField& u, double kappa_c) {
    require_same_grid(ref.a, u, "volume_identity");
    const ContactSet cs = contact_set(u, kappa_c);
    const double dv = u.grid().cell_volume();
    VolumeIdentity v;
    for (std::size_t n = 0; n < u.size(); ++n) {
        v.lhs += ref.a[n];
        if (cs.mask[n]) v.rhs += ref.a[n];
    }
    v.lhs *= dv;
    v.rhs *= dv;
    v.relerr = std::abs(v.lhs - v.rhs) / v.lhs;
    return v;
}

double growth_fit(const ScalarField& field, const ScalarField& psi, const NodeMask& band) {
    require_same_grid(field, psi, "growth_fit");
    if (band.size() != field.size()) throw std::invalid_argument("growth_fit: band size mismatch");
    // Two passes around the mean keep the fit well conditioned.
    double sx = 0.0, sy = 0.0;
    std::size_t count = 0;
    for (std::size_t n = 0; n < field.size(); ++n) {
        if (!band[n]) continue;
        if (!(field[n] > 0.0)) throw std::invalid_argument("growth_fit: field must be positive on the band");
        sx += -psi[n];
        sy += std::log(field[n]);
        ++count;
    }
    if (count < 2) throw std::invalid_argument("growth_fit: band needs at least two nodes");
    const double mx = sx / static_cast<double>(count), my = sy / static_cast<double>(count);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t n = 0; n < field.size(); ++n) {
        if (!band[n]) continue;
        const double dx = -psi[n] - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(field[n]) - my);
    }
    if (sxx <= 1e-24 * static_cast<double>(count)) throw std::invalid_argument("growth_fit: psi is constant on the band");
    return sxy / sxx;
}

std::vector<FreeBoundaryJump> free_boundary_jumps(const ReferenceData& ref, const ScalarField& u, double epsilon) {
    const Grid& grid = u.grid();
    if (grid.dims() != 1) throw std::invalid_argument("free_boundary_jumps: one-dimensional grids only");
    require_same_grid(ref.a, u, "free_boundary_jumps");
    const ScalarField lap = laplacian(u);
    const std::size_t N = u.size();
    auto wrap = [N](long k) { return static_cast<std::size_t>(((k % static_cast<long>(N)) + static_cast<long>(N)) % static_cast<long>(N)); };
    std::vector<FreeBoundaryJump> out;
    for (std::size_t i = 0; i < N; ++i) {
        const long k = static_cast<long>(i);
        const bool here = u[i] == 0.0;
        // Contact node followed by a non-contact run, or the mirror image.
        for (int dir : {1, -1}) {
            if (!here || u[wrap(k + dir)] == 0.0) continue;
            const std::size_t inside = wrap(k - dir);      // one node deeper in contact
            const std::size_t outside = wrap(k + 2 * dir);  // one node past the transition
            const double jump = std::abs(0.5 * lap[outside] - 0.5 * lap[inside]);
            const double x_mid = 0.5 * (ref.a[i] + ref.a[wrap(k + dir)]);
            const double g_mid = 0.5 * (ref.g[i] + ref.g[wrap(k + dir)]);
            out.push_back({i, jump, std::abs(x_mid + epsilon * g_mid)});
        }
    }
    return out;
}

DiagnosticsReport diagnose(const ReferenceData& ref, const ScalarField& f, const ScalarField& u,
                           const DiagnosticsOptions& opt) {
    const WeightField w = weight(ref, opt.B);
    DiagnosticsReport rep;
    const QResult q = q_functional(f, ref, w, opt.A);
    rep.q_vacuous = q.vacuous;
    rep.q_max = q.max;
    rep.q_argmax = q.argmax;
    rep.grad_bound = weighted_gradient_bound(f, w);
    const NodeMask mask = interior_mask(ref, opt.mask_level);
    const HessianBounds hb = weighted_hessian_bound(f, w, mask);
    rep.hess_bound_global = hb.global;
    rep.hess_bound_interior = hb.interior;
    const double kc = opt.kappa_c.value_or(10.0 * ref.grid().spacing(0));
    const VolumeIdentity vi = volume_identity(ref, u, kc);
    rep.volume_lhs = vi.lhs;
    rep.volume_rhs = vi.rhs;
    rep.volume_relerr = vi.relerr;

    // Growth of lambda1 against -psi on the band near the pole.
    const ScalarField lam = lambda1_field(hessian(f));
    NodeMask band(f.size());
    bool any = false;
    for (std::size_t n = 0; n < f.size(); ++n) {
        band[n] = !mask[n] && lam[n] > 0.0 && !f.grid().on_boundary(n);
        any = any || band[n];
    }
    if (any) {
        try {
            rep.fitted_B = growth_fit(lam, ref.psi, band);
        } catch (const std::invalid_argument&) {
            rep.fitted_B.reset();
        }
    }
    return rep;
}

}  // namespace cmalab

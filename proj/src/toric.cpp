#include "cmalab/toric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace cmalab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double cross(Point2 o, Point2 a, Point2 b) { return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]); }

void check_axes(const std::vector<std::vector<double>>& axes, const char* what) {
    if (axes.empty() || axes.size() > 2) throw std::invalid_argument(std::string(what) + ": need 1 or 2 axes");
    for (const auto& ax : axes) {
        if (ax.empty()) throw std::invalid_argument(std::string(what) + ": empty grid");
        for (std::size_t k = 0; k < ax.size(); ++k) {
            if (!std::isfinite(ax[k])) throw std::invalid_argument(std::string(what) + ": non-finite coordinate");
            if (k > 0 && !(ax[k] > ax[k - 1])) throw std::invalid_argument(std::string(what) + ": axis must increase");
        }
    }
}

std::size_t node_total(const std::vector<std::vector<double>>& axes) {
    return axes.size() == 1 ? axes[0].size() : axes[0].size() * axes[1].size();
}

Point2 node_point(const std::vector<std::vector<double>>& axes, std::size_t n) {
    if (axes.size() == 1) return {axes[0][n], 0.0};
    const std::size_t m = axes[1].size();
    return {axes[0][n / m], axes[1][n % m]};
}

// The pairing <x, y> - v, spelled identically by every transform path.
double pairing(Point2 x, Point2 y, double v, std::size_t dims) {
    return dims == 1 ? x[0] * y[0] - v : x[0] * y[0] + x[1] * y[1] - v;
}

// Lower convex hull of (x, v) pairs sorted by x; returns indices into the input.
std::vector<std::size_t> lower_hull(const std::vector<double>& x, const std::vector<double>& v) {
    std::vector<std::size_t> h;
    for (std::size_t k = 0; k < x.size(); ++k) {
        while (h.size() >= 2 &&
               cross({x[h[h.size() - 2]], v[h[h.size() - 2]]}, {x[h.back()], v[h.back()]}, {x[k], v[k]}) <= 0.0)
            h.pop_back();
        h.push_back(k);
    }
    return h;
}

std::vector<double> hull_slopes(const std::vector<double>& x, const std::vector<double>& v) {
    const auto h = lower_hull(x, v);
    std::vector<double> s;
    for (std::size_t j = 0; j + 1 < h.size(); ++j) s.push_back((v[h[j + 1]] - v[h[j]]) / (x[h[j + 1]] - x[h[j]]));
    return s;
}

Polytope widened_interval(double lo, double hi) {
    if (hi - lo <= 0.0) {
        const double pad = 1e-12 * std::max(1.0, std::abs(lo));
        return Polytope::interval(lo - pad, hi + pad);
    }
    return Polytope::interval(lo, hi);
}

// Active 1-d samples as parallel coordinate/value arrays.
void active_1d(const ConvexSample& v, std::vector<double>& xs, std::vector<double>& vs) {
    for (std::size_t n = 0; n < v.size(); ++n)
        if (v.is_active(n)) {
            xs.push_back(v.axes[0][n]);
            vs.push_back(v.values[n]);
        }
}

Polytope gradient_range(const ConvexSample& v) {
    if (v.dims() == 1) {
        std::vector<double> xs, vs;
        active_1d(v, xs, vs);
        if (xs.size() < 2) throw std::invalid_argument("sample: need at least two active nodes");
        const auto s = hull_slopes(xs, vs);
        return widened_interval(s.front(), s.back());
    }
    double lo[2] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    double hi[2] = {-lo[0], -lo[1]};
    const std::size_t nx = v.axes[0].size(), ny = v.axes[1].size();
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < ny; ++j) {
            const std::size_t n = v.index(i, j);
            if (!v.is_active(n)) continue;
            if (i + 1 < nx && v.is_active(v.index(i + 1, j))) {
                const double s = (v.values[v.index(i + 1, j)] - v.values[n]) / (v.axes[0][i + 1] - v.axes[0][i]);
                lo[0] = std::min(lo[0], s);
                hi[0] = std::max(hi[0], s);
            }
            if (j + 1 < ny && v.is_active(v.index(i, j + 1))) {
                const double s = (v.values[v.index(i, j + 1)] - v.values[n]) / (v.axes[1][j + 1] - v.axes[1][j]);
                lo[1] = std::min(lo[1], s);
                hi[1] = std::max(hi[1], s);
            }
        }
    if (!std::isfinite(lo[0]) || !std::isfinite(lo[1])) throw std::invalid_argument("sample: too few active neighbours");
    const Polytope bx = widened_interval(lo[0], hi[0]), by = widened_interval(lo[1], hi[1]);
    return Polytope::polygon({{bx.lo(), by.lo()}, {bx.hi(), by.lo()}, {bx.hi(), by.hi()}, {bx.lo(), by.hi()}});
}

// Convex hull (counterclockwise) of the active primal points.
Polytope point_hull(const ConvexSample& v) {
    if (v.dims() == 1) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t n = 0; n < v.size(); ++n)
            if (v.is_active(n)) {
                lo = std::min(lo, v.axes[0][n]);
                hi = std::max(hi, v.axes[0][n]);
            }
        return widened_interval(lo, hi);
    }
    std::vector<Point2> pts;
    for (std::size_t n = 0; n < v.size(); ++n)
        if (v.is_active(n)) pts.push_back(v.point(n));
    std::sort(pts.begin(), pts.end());
    std::vector<Point2> hull;
    for (int pass = 0; pass < 2; ++pass) {
        const std::size_t start = hull.size();
        for (const Point2& p : pts) {
            while (hull.size() >= start + 2 && cross(hull[hull.size() - 2], hull.back(), p) <= 0.0) hull.pop_back();
            hull.push_back(p);
        }
        hull.pop_back();
        std::reverse(pts.begin(), pts.end());
    }
    return Polytope::polygon(std::move(hull));
}

// Brute-force transform without the convexity precondition.
std::vector<double> conjugate(const ConvexSample& v, const std::vector<std::vector<double>>& dual_axes,
                              const NodeMask& dual_active) {
    const std::size_t m = node_total(dual_axes);
    std::vector<double> out(m, 0.0);
    for (std::size_t q = 0; q < m; ++q) {
        if (!dual_active.empty() && !dual_active[q]) continue;
        const Point2 y = node_point(dual_axes, q);
        double best = kNegInf;
        for (std::size_t n = 0; n < v.size(); ++n)
            if (v.is_active(n)) best = std::max(best, pairing(v.point(n), y, v.values[n], v.dims()));
        out[q] = best;
    }
    return out;
}

std::vector<double> conjugate_monotone(const ConvexSample& v, const std::vector<double>& ys) {
    std::vector<std::size_t> idx;
    for (std::size_t n = 0; n < v.size(); ++n)
        if (v.is_active(n)) idx.push_back(n);
    std::vector<double> out(ys.size());
    std::size_t k = 0;
    auto val = [&](std::size_t j, double y) { return pairing(v.point(idx[j]), {y, 0.0}, v.values[idx[j]], 1); };
    for (std::size_t q = 0; q < ys.size(); ++q) {
        // The maximizer moves right as y grows when v is convex.
        while (k + 1 < idx.size() && val(k + 1, ys[q]) >= val(k, ys[q])) ++k;
        out[q] = val(k, ys[q]);
    }
    return out;
}

// Nonuniform three-point derivative weights at the middle node.
struct ThreePoint {
    double d1[3];
    double d2[3];
};

ThreePoint three_point(double xm, double x0, double xp) {
    const double hm = x0 - xm, hp = xp - x0;
    ThreePoint w{};
    w.d1[0] = -hp / (hm * (hm + hp));
    w.d1[1] = (hp - hm) / (hm * hp);
    w.d1[2] = hm / (hp * (hm + hp));
    w.d2[0] = 2.0 / (hm * (hm + hp));
    w.d2[1] = -2.0 / (hm * hp);
    w.d2[2] = 2.0 / (hp * (hm + hp));
    return w;
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
    return v[mid];
}

}  // namespace

Polytope Polytope::interval(double lo, double hi) {
    if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi))
        throw std::invalid_argument("polytope: interval needs lo < hi");
    Polytope p;
    p.dims_ = 1;
    p.lo_ = lo;
    p.hi_ = hi;
    return p;
}

Polytope Polytope::polygon(std::vector<Point2> vertices) {
    const std::size_t n = vertices.size();
    if (n < 3) throw std::invalid_argument("polytope: polygon needs at least 3 vertices");
    double area = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const Point2 &a = vertices[k], &b = vertices[(k + 1) % n], &c = vertices[(k + 2) % n];
        if (!(std::isfinite(a[0]) && std::isfinite(a[1]))) throw std::invalid_argument("polytope: non-finite vertex");
        if (!(cross(a, b, c) > 0.0)) throw std::invalid_argument("polytope: vertices must be strictly convex and counterclockwise");
        area += a[0] * b[1] - b[0] * a[1];
    }
    if (!(area > 0.0)) throw std::invalid_argument("polytope: polygon has no interior");
    Polytope p;
    p.dims_ = 2;
    p.vertices_ = std::move(vertices);
    p.lo_ = p.hi_ = 0.0;
    return p;
}

bool Polytope::contains(double p, double tol) const {
    if (dims_ != 1) throw std::invalid_argument("polytope: scalar query on a polygon");
    return p >= lo_ - tol && p <= hi_ + tol;
}

bool Polytope::contains(Point2 p, double tol) const {
    if (dims_ == 1) return contains(p[0], tol);
    const std::size_t n = vertices_.size();
    for (std::size_t k = 0; k < n; ++k) {
        const Point2 &a = vertices_[k], &b = vertices_[(k + 1) % n];
        const double len = std::hypot(b[0] - a[0], b[1] - a[1]);
        if (cross(a, b, p) < -tol * len) return false;
    }
    return true;
}

bool Polytope::contains(const Polytope& inner, double tol) const {
    if (inner.dims_ != dims_) throw std::invalid_argument("polytope: dimension mismatch");
    if (dims_ == 1) return inner.lo_ >= lo_ - tol && inner.hi_ <= hi_ + tol;
    return std::all_of(inner.vertices_.begin(), inner.vertices_.end(), [&](Point2 v) { return contains(v, tol); });
}

Point2 ConvexSample::point(std::size_t n) const { return node_point(axes, n); }

std::vector<double> uniform_axis(double lo, double hi, std::size_t n) {
    if (n == 0 || !(lo < hi)) throw std::invalid_argument("uniform_axis: need n >= 1 and lo < hi");
    std::vector<double> ax(n + 1);
    for (std::size_t k = 0; k <= n; ++k) ax[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n);
    ax[n] = hi;
    return ax;
}

ConvexSample make_sample(std::vector<std::vector<double>> axes, const std::function<double(Point2)>& fn,
                         const std::optional<Polytope>& domain) {
    check_axes(axes, "make_sample");
    ConvexSample s{std::move(axes), {}, Polytope::interval(0.0, 1.0), {}};
    const std::size_t total = node_total(s.axes);
    s.values.assign(total, 0.0);
    if (domain) {
        if (domain->dims() != s.dims()) throw std::invalid_argument("make_sample: domain dimension mismatch");
        s.active.assign(total, false);
    }
    for (std::size_t n = 0; n < total; ++n) {
        const Point2 p = s.point(n);
        if (domain) {
            if (!domain->contains(p)) continue;
            s.active[n] = true;
        }
        s.values[n] = fn(p);
        if (!std::isfinite(s.values[n])) throw std::invalid_argument("make_sample: non-finite value");
    }
    s.dual = gradient_range(s);
    return s;
}

double min_second_difference(const ConvexSample& v) {
    double worst = std::numeric_limits<double>::infinity();
    const std::size_t nx = v.axes[0].size(), ny = v.dims() == 2 ? v.axes[1].size() : 1;
    auto check = [&](std::size_t a, std::size_t b, std::size_t c) {
        if (!v.is_active(a) || !v.is_active(b) || !v.is_active(c)) return;
        worst = std::min(worst, v.values[a] - 2.0 * v.values[b] + v.values[c]);
    };
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < ny; ++j) {
            if (i > 0 && i + 1 < nx) check(v.index(i - 1, j), v.index(i, j), v.index(i + 1, j));
            if (j > 0 && j + 1 < ny) check(v.index(i, j - 1), v.index(i, j), v.index(i, j + 1));
        }
    return worst;
}

bool is_discretely_convex(const ConvexSample& v, double tol) { return min_second_difference(v) >= -tol; }

ConvexSample legendre(const ConvexSample& v, const std::vector<std::vector<double>>& dual_axes, LegendreMethod method) {
    check_axes(v.axes, "legendre");
    check_axes(dual_axes, "legendre");
    if (dual_axes.size() != v.dims()) throw std::invalid_argument("legendre: dual grid dimension mismatch");
    if (v.values.size() != node_total(v.axes)) throw std::invalid_argument("legendre: value count mismatch");
    bool any = false;
    for (std::size_t n = 0; n < v.size() && !any; ++n) any = v.is_active(n);
    if (!any) throw std::invalid_argument("legendre: empty sample");
    if (!is_discretely_convex(v)) throw std::invalid_argument("legendre: sample is not discretely convex");

    ConvexSample out{dual_axes, {}, point_hull(v), {}};
    if (method == LegendreMethod::monotone) {
        if (v.dims() != 1) throw std::invalid_argument("legendre: monotone path is one-dimensional");
        out.values = conjugate_monotone(v, dual_axes[0]);
    } else {
        out.values = conjugate(v, dual_axes, {});
    }
    return out;
}

ConvexSample toric_envelope(const ConvexSample& v_ref, const Polytope& P,
                            const std::optional<std::vector<std::vector<double>>>& dual_axes) {
    check_axes(v_ref.axes, "toric_envelope");
    if (P.dims() != v_ref.dims()) throw std::invalid_argument("toric_envelope: polytope dimension mismatch");
    const double tol = 1e-12 * std::max(1.0, v_ref.dims() == 1 ? std::max(std::abs(P.lo()), std::abs(P.hi())) : 1.0);
    if (!v_ref.dual.contains(P, tol)) throw std::invalid_argument("toric_envelope: P is not inside the dual range");

    ConvexSample out{v_ref.axes, std::vector<double>(v_ref.size(), 0.0), P, v_ref.active};
    std::vector<std::vector<double>> ys;
    NodeMask ys_active;
    if (v_ref.dims() == 1 && !dual_axes) {
        std::vector<double> xs, vs;
        active_1d(v_ref, xs, vs);
        std::vector<double> y{P.lo()};
        for (double s : hull_slopes(xs, vs))
            if (s > P.lo() && s < P.hi()) y.push_back(s);
        y.push_back(P.hi());
        y.erase(std::unique(y.begin(), y.end()), y.end());
        ys = {std::move(y)};
    } else {
        if (dual_axes) {
            ys = *dual_axes;
        } else {
            double lo[2] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
            double hi[2] = {-lo[0], -lo[1]};
            for (const Point2& p : P.vertices())
                for (int k = 0; k < 2; ++k) {
                    lo[k] = std::min(lo[k], p[k]);
                    hi[k] = std::max(hi[k], p[k]);
                }
            ys = {uniform_axis(lo[0], hi[0], v_ref.axes[0].size() - 1), uniform_axis(lo[1], hi[1], v_ref.axes[1].size() - 1)};
        }
        check_axes(ys, "toric_envelope");
        if (ys.size() != v_ref.dims()) throw std::invalid_argument("toric_envelope: dual grid dimension mismatch");
        ys_active.assign(node_total(ys), false);
        for (std::size_t q = 0; q < ys_active.size(); ++q) ys_active[q] = P.contains(node_point(ys, q));
        if (std::none_of(ys_active.begin(), ys_active.end(), [](bool b) { return b; }))
            throw std::invalid_argument("toric_envelope: no dual samples inside P");
    }

    const std::vector<double> vstar = conjugate(v_ref, ys, ys_active);
    const std::size_t m = node_total(ys);
    for (std::size_t n = 0; n < v_ref.size(); ++n) {
        if (!v_ref.is_active(n)) continue;
        const Point2 x = v_ref.point(n);
        double best = kNegInf;
        for (std::size_t q = 0; q < m; ++q)
            if (ys_active.empty() || ys_active[q]) best = std::max(best, pairing(node_point(ys, q), x, vstar[q], v_ref.dims()));
        out.values[n] = best;
    }
    return out;
}

ScalarField envelope_by_duality(const ReferenceData& ref, const std::function<double(double)>& potential,
                                std::size_t periods) {
    const Grid& grid = ref.grid();
    if (grid.dims() != 1 || grid.boundary(0) != Boundary::periodic)
        throw std::invalid_argument("envelope_by_duality: one-dimensional periodic grid required");
    if (periods < 3 || periods % 2 == 0) throw std::invalid_argument("envelope_by_duality: periods must be odd and >= 3");
    const std::size_t N = grid.extent(0), shift = (periods / 2) * N;
    const double h = grid.spacing(0);
    std::vector<double> xs(periods * N + 1);
    for (std::size_t j = 0; j < xs.size(); ++j) xs[j] = (static_cast<double>(j) - static_cast<double>(shift)) * h;
    const ConvexSample phi = make_sample({xs}, [&](Point2 p) { return potential(p[0]); });
    const ConvexSample hull = toric_envelope(phi, phi.dual);
    ScalarField u(grid);
    for (std::size_t i = 0; i < N; ++i) u[i] = std::min(0.0, hull.values[shift + i] - phi.values[shift + i]);
    return u;
}

std::function<double(double)> custom_preset_potential(const ReferenceData& ref, double epsilon) {
    if (ref.preset != "custom") throw std::invalid_argument("custom_preset_potential: preset must be 'custom'");
    const double a0 = ref.params.at("a0"), a1 = ref.params.at("a1"), g0 = ref.params.at("g0");
    const double k = 2.0 * std::numbers::pi / ref.grid().length(0);
    const double quad = a0 + epsilon * g0, wave = 2.0 * a1 / (k * k);
    return [quad, wave, k](double x) { return quad * x * x - wave * std::cos(k * x); };
}

double PiecewiseLinear::operator()(Point2 p) const {
    double best = kNegInf;
    for (std::size_t k = 0; k < offsets.size(); ++k) {
        const double v = dims == 1 ? slopes[k][0] * p[0] + offsets[k] : slopes[k][0] * p[0] + slopes[k][1] * p[1] + offsets[k];
        best = std::max(best, v);
    }
    return best;
}

PiecewiseLinear pl_from_breakpoints(const std::vector<double>& slopes, const std::vector<double>& breakpoints,
                                    double value_at_zero) {
    if (slopes.size() != breakpoints.size() + 1)
        throw std::invalid_argument("piecewise-linear: need one more slope than breakpoints");
    for (std::size_t k = 1; k < slopes.size(); ++k)
        if (slopes[k] < slopes[k - 1]) throw std::invalid_argument("piecewise-linear: slopes must not decrease");
    for (std::size_t k = 1; k < breakpoints.size(); ++k)
        if (!(breakpoints[k] > breakpoints[k - 1])) throw std::invalid_argument("piecewise-linear: breakpoints must increase");
    PiecewiseLinear F;
    F.dims = 1;
    double c = 0.0;
    for (std::size_t k = 0; k < slopes.size(); ++k) {
        if (k > 0) c += (slopes[k - 1] - slopes[k]) * breakpoints[k - 1];
        F.slopes.push_back({slopes[k], 0.0});
        F.offsets.push_back(c);
    }
    const double shift = value_at_zero - F({0.0, 0.0});
    for (double& o : F.offsets) o += shift;
    return F;
}

PiecewiseLinear pl_from_pieces(std::vector<std::array<double, 3>> pieces) {
    if (pieces.empty()) throw std::invalid_argument("piecewise-linear: no pieces");
    PiecewiseLinear F;
    F.dims = 2;
    for (const auto& pc : pieces) {
        F.slopes.push_back({pc[0], pc[1]});
        F.offsets.push_back(pc[2]);
    }
    return F;
}

RayOutput toric_ray(const RayData& ray) {
    check_axes(ray.window, "toric_ray");
    if (ray.u0.dims() != ray.F.dims || ray.window.size() != ray.u0.dims())
        throw std::invalid_argument("toric_ray: dimension mismatch");
    if (ray.t_values.empty()) throw std::invalid_argument("toric_ray: no t-values");
    for (std::size_t k = 0; k < ray.t_values.size(); ++k) {
        if (!(ray.t_values[k] >= 0.0)) throw std::invalid_argument("toric_ray: t-values must be >= 0");
        if (k > 0 && !(ray.t_values[k] > ray.t_values[k - 1])) throw std::invalid_argument("toric_ray: t-values must increase");
    }
    if (!is_discretely_convex(ray.u0)) throw std::invalid_argument("toric_ray: u0 is not convex");

    RayOutput out;
    out.t_values = ray.t_values;
    for (double t : ray.t_values) {
        ConvexSample ut = ray.u0;
        for (std::size_t n = 0; n < ut.size(); ++n)
            if (ut.is_active(n)) ut.values[n] = ray.u0.values[n] + t * ray.F(ut.point(n));
        if (!is_discretely_convex(ut)) throw std::invalid_argument("toric_ray: u0 + t F is not convex");
        ut.dual = gradient_range(ut);
        out.potentials.push_back(legendre(ut, ray.window));
        out.symplectic.push_back(std::move(ut));
    }
    return out;
}

RayAudit ray_c11_audit(const RayOutput& out) {
    const std::size_t T = out.t_values.size();
    if (T < 3) throw std::invalid_argument("ray_c11_audit: need at least 3 t-values");
    if (out.potentials.size() != T || out.symplectic.size() != T)
        throw std::invalid_argument("ray_c11_audit: output does not match its t-values");
    if (out.potentials[0].dims() != 1) throw std::invalid_argument("ray_c11_audit: one-dimensional rays only");
    const std::vector<double>& x = out.potentials[0].axes[0];
    const std::size_t nx = x.size();
    if (nx < 5) throw std::invalid_argument("ray_c11_audit: window too small");
    for (const auto& p : out.potentials)
        if (p.axes[0] != x) throw std::invalid_argument("ray_c11_audit: potentials must share one window");

    RayAudit rep;
    auto phi = [&](std::size_t j, std::size_t i) { return out.potentials[j].values[i]; };

    // ∂²_x per t at interior window nodes.
    std::vector<std::vector<double>> dxx(T, std::vector<double>(nx, 0.0));
    for (std::size_t j = 0; j < T; ++j) {
        double sup = 0.0;
        for (std::size_t i = 1; i + 1 < nx; ++i) {
            const ThreePoint w = three_point(x[i - 1], x[i], x[i + 1]);
            dxx[j][i] = w.d2[0] * phi(j, i - 1) + w.d2[1] * phi(j, i) + w.d2[2] * phi(j, i + 1);
            sup = std::max(sup, std::abs(dxx[j][i]));
        }
        rep.second_x_sup.push_back(sup);
        rep.c11_bound = std::max(rep.c11_bound, sup);
    }
    rep.c11_ratio = rep.second_x_sup[0] > 0.0 ? rep.c11_bound / rep.second_x_sup[0]
                                              : (rep.c11_bound > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);

    // Crease detection on the symplectic side.
    std::vector<std::size_t> nodes;
    std::vector<std::vector<std::size_t>> flagged(T);
    for (std::size_t j = 0; j < T; ++j) {
        const ConvexSample& u = out.symplectic[j];
        const std::size_t np = u.size();
        std::vector<double> dd(np, 0.0), interior;
        double scale = 0.0;
        for (std::size_t k = 0; k < np; ++k) scale = std::max(scale, std::abs(u.values[k]));
        for (std::size_t k = 1; k + 1 < np; ++k) {
            if (!u.is_active(k - 1) || !u.is_active(k) || !u.is_active(k + 1)) continue;
            dd[k] = u.values[k + 1] - 2.0 * u.values[k] + u.values[k - 1];
            interior.push_back(dd[k]);
        }
        const double threshold = std::max(5.0 * median_of(interior), 1e-12 * (1.0 + scale));
        for (std::size_t k = 1; k + 1 < np; ++k)
            if (dd[k] > threshold) {
                nodes.push_back(k);
                flagged[j].push_back(k);
            }
    }
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

    // Images of crease nodes: subgradient intervals of u_t, per t. Exclusion
    // uses every node flagged at any t; reported images only where flagged.
    const double hx = x[1] - x[0];
    std::vector<std::vector<std::array<double, 2>>> image(T);
    for (std::size_t j = 0; j < T; ++j) {
        const ConvexSample& u = out.symplectic[j];
        const std::vector<double>& p = u.axes[0];
        for (std::size_t k : nodes) {
            const double lo = (u.values[k] - u.values[k - 1]) / (p[k] - p[k - 1]);
            const double hi = (u.values[k + 1] - u.values[k]) / (p[k + 1] - p[k]);
            image[j].push_back({lo, hi});
            const bool here = std::find(flagged[j].begin(), flagged[j].end(), k) != flagged[j].end();
            if (here && hi >= x.front() && lo <= x.back()) rep.crease_images.push_back({j, lo, hi});
        }
    }
    rep.crease_nodes = nodes;
    rep.crease_detected = !rep.crease_images.empty();

    // HCMA residual at interior (x, t) nodes whose stencil avoids every crease.
    for (std::size_t j = 1; j + 1 < T; ++j) {
        const ThreePoint wt = three_point(out.t_values[j - 1], out.t_values[j], out.t_values[j + 1]);
        for (std::size_t i = 1; i + 1 < nx; ++i) {
            bool near = false;
            for (std::size_t c = 0; c < nodes.size() && !near; ++c) {
                double lo = image[j][c][0], hi = image[j][c][1];
                for (std::size_t jj : {j - 1, j + 1}) {
                    lo = std::min(lo, image[jj][c][0]);
                    hi = std::max(hi, image[jj][c][1]);
                }
                near = x[i] >= lo - 2.0 * hx && x[i] <= hi + 2.0 * hx;
            }
            if (near) {
                ++rep.excluded_nodes;
                continue;
            }
            double ftt = 0.0, fxt = 0.0;
            for (std::size_t s = 0; s < 3; ++s) {
                const std::size_t jj = j - 1 + s;
                const double fx = (phi(jj, i + 1) - phi(jj, i - 1)) / (x[i + 1] - x[i - 1]);
                ftt += wt.d2[s] * phi(jj, i);
                fxt += wt.d1[s] * fx;
            }
            const double det = std::abs(dxx[j][i] * ftt - fxt * fxt);
            ++rep.audited_nodes;
            if (det > rep.hcma_residual || rep.audited_nodes == 1) {
                rep.hcma_residual = det;
                rep.residual_x = i;
                rep.residual_t = j;
            }
        }
    }

    // Oscillation of ∂²_x φ_t across each crease image.
    for (const CreaseImage& ci : rep.crease_images) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t i = 1; i + 1 < nx; ++i)
            if (x[i] >= ci.x_lo - 4.0 * hx && x[i] <= ci.x_hi + 4.0 * hx) {
                lo = std::min(lo, dxx[ci.t_index][i]);
                hi = std::max(hi, dxx[ci.t_index][i]);
            }
        if (hi >= lo) rep.crease_jump = std::max(rep.crease_jump, hi - lo);
    }
    return rep;
}

}  // namespace cmalab

#include "cmalab/grid.hpp"

#include <algorithm>
#include <cmath>

namespace cmalab {

Boundary parse_boundary(const std::string& name) {
    if (name == "periodic") return Boundary::periodic;
    if (name == "dirichlet") return Boundary::dirichlet;
    throw std::invalid_argument("unknown boundary kind '" + name + "'");
}

std::string to_string(Boundary b) { return b == Boundary::periodic ? "periodic" : "dirichlet"; }

Grid::Grid(std::size_t dims,
           std::span<const std::size_t> points,
           std::span<const double> lengths,
           std::span<const Boundary> boundaries)
    : dims_(dims) {
    if (dims != 1 && dims != 2) throw std::invalid_argument("grid: dims must be 1 or 2");
    if (points.size() != dims || lengths.size() != dims || boundaries.size() != dims)
        throw std::invalid_argument("grid: per-axis specification does not match dims");
    for (std::size_t k = 0; k < dims; ++k) {
        if (points[k] < 8) throw std::invalid_argument("grid: at least 8 points per axis");
        if (!(lengths[k] > 0.0) || !std::isfinite(lengths[k]))
            throw std::invalid_argument("grid: lengths must be positive");
        points_[k] = points[k];
        lengths_[k] = lengths[k];
        bounds_[k] = boundaries[k];
        extent_[k] = boundaries[k] == Boundary::periodic ? points[k] : points[k] + 1;
    }
}

Grid make_grid(std::size_t dims,
               std::vector<std::size_t> points,
               std::vector<double> lengths,
               std::vector<Boundary> boundaries) {
    return Grid(dims, points, lengths, boundaries);
}

bool Grid::on_boundary(std::size_t n) const {
    auto ij = unravel(n);
    for (std::size_t k = 0; k < dims_; ++k) {
        if (bounds_[k] == Boundary::dirichlet && (ij[k] == 0 || ij[k] + 1 == extent_[k])) return true;
    }
    return false;
}

std::size_t Grid::neighbor(std::size_t n, std::size_t axis, int step) const {
    auto ij = unravel(n);
    const auto ext = static_cast<long>(extent_[axis]);
    long k = static_cast<long>(ij[axis]) + step;
    if (bounds_[axis] == Boundary::periodic) k = ((k % ext) + ext) % ext;
    ij[axis] = static_cast<std::size_t>(k);
    return index(ij[0], ij[1]);
}

double Grid::cell_volume() const {
    double v = spacing(0);
    if (dims_ == 2) v *= spacing(1);
    return v;
}

ScalarField::ScalarField(Grid grid, double fill) : grid_(grid), values_(grid.node_count(), fill) {}

ScalarField::ScalarField(Grid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.node_count())
        throw std::invalid_argument("field: value count does not match grid node count");
    check_finite();
}

double ScalarField::max() const { return *std::max_element(values_.begin(), values_.end()); }
double ScalarField::min() const { return *std::min_element(values_.begin(), values_.end()); }

void ScalarField::check_finite() const {
    for (double v : values_)
        if (!std::isfinite(v)) throw std::invalid_argument("field: non-finite entry");
}

void require_same_grid(const ScalarField& a, const ScalarField& b, const char* what) {
    if (!(a.grid() == b.grid())) throw std::invalid_argument(std::string(what) + ": grid mismatch");
}

ScalarField laplacian(const ScalarField& f) {
    const Grid& g = f.grid();
    ScalarField out(g);
    for (std::size_t n = 0; n < g.node_count(); ++n) {
        if (g.on_boundary(n)) continue;
        double acc = 0.0;
        for (std::size_t k = 0; k < g.dims(); ++k) {
            const double h = g.spacing(k);
            acc += (f[g.neighbor(n, k, 1)] - 2.0 * f[n] + f[g.neighbor(n, k, -1)]) / (h * h);
        }
        out[n] = acc;
    }
    return out;
}

ScalarField gradient_sq(const ScalarField& f) {
    const Grid& g = f.grid();
    ScalarField out(g);
    for (std::size_t n = 0; n < g.node_count(); ++n) {
        if (g.on_boundary(n)) continue;
        double acc = 0.0;
        for (std::size_t k = 0; k < g.dims(); ++k) {
            const double d = (f[g.neighbor(n, k, 1)] - f[g.neighbor(n, k, -1)]) / (2.0 * g.spacing(k));
            acc += d * d;
        }
        out[n] = 0.5 * acc;
    }
    return out;
}

HessianField hessian(const ScalarField& f) {
    const Grid& g = f.grid();
    HessianField out{g, std::vector<Sym2>(g.node_count())};
    const double hx = g.spacing(0);
    for (std::size_t n = 0; n < g.node_count(); ++n) {
        if (g.on_boundary(n)) continue;
        Sym2& e = out.entries[n];
        e.xx = (f[g.neighbor(n, 0, 1)] - 2.0 * f[n] + f[g.neighbor(n, 0, -1)]) / (hx * hx);
        if (g.dims() == 2) {
            const double hy = g.spacing(1);
            e.yy = (f[g.neighbor(n, 1, 1)] - 2.0 * f[n] + f[g.neighbor(n, 1, -1)]) / (hy * hy);
            const std::size_t xp = g.neighbor(n, 0, 1);
            const std::size_t xm = g.neighbor(n, 0, -1);
            e.xy = (f[g.neighbor(xp, 1, 1)] - f[g.neighbor(xp, 1, -1)] - f[g.neighbor(xm, 1, 1)] +
                    f[g.neighbor(xm, 1, -1)]) /
                   (4.0 * hx * hy);
        }
    }
    return out;
}

double sup_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double sup_diff(const ScalarField& a, const ScalarField& b) {
    require_same_grid(a, b, "sup_diff");
    double m = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) m = std::max(m, std::abs(a[n] - b[n]));
    return m;
}

}  // namespace cmalab

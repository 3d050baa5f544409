#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace cmalab {

enum class Boundary { periodic, dirichlet };

Boundary parse_boundary(const std::string& name);
std::string to_string(Boundary b);

/// Rectangular grid in one or two axes.
///
/// A periodic axis with `points` N carries N nodes at k*h, k = 0..N-1.
/// A dirichlet axis carries N+1 nodes at k*h, k = 0..N, so that both
/// endpoints 0 and L are explicit boundary layers. In both cases
/// h = length / points.
class Grid {
public:
    Grid(std::size_t dims,
         std::span<const std::size_t> points,
         std::span<const double> lengths,
         std::span<const Boundary> boundaries);

    std::size_t dims() const { return dims_; }
    std::size_t points(std::size_t axis) const { return points_[axis]; }
    double length(std::size_t axis) const { return lengths_[axis]; }
    double spacing(std::size_t axis) const { return lengths_[axis] / static_cast<double>(points_[axis]); }
    Boundary boundary(std::size_t axis) const { return bounds_[axis]; }

    /// Nodes stored along an axis (N periodic, N+1 dirichlet).
    std::size_t extent(std::size_t axis) const { return extent_[axis]; }
    std::size_t node_count() const { return extent_[0] * extent_[1]; }

    /// Row-major: the last axis varies fastest.
    std::size_t index(std::size_t i, std::size_t j = 0) const { return i * extent_[1] + j; }
    std::array<std::size_t, 2> unravel(std::size_t n) const { return {n / extent_[1], n % extent_[1]}; }

    double coord(std::size_t axis, std::size_t k) const { return static_cast<double>(k) * spacing(axis); }

    /// True when the node sits on a dirichlet boundary layer of any axis.
    bool on_boundary(std::size_t n) const;

    /// Periodic-aware neighbour along an axis; only valid off the boundary.
    std::size_t neighbor(std::size_t n, std::size_t axis, int step) const;

    /// Unit cell measure h_0 * h_1 (or h_0 in one dimension).
    double cell_volume() const;

    bool operator==(const Grid& other) const = default;

private:
    std::size_t dims_;
    std::array<std::size_t, 2> points_{1, 1};
    std::array<double, 2> lengths_{1.0, 1.0};
    std::array<Boundary, 2> bounds_{Boundary::periodic, Boundary::periodic};
    std::array<std::size_t, 2> extent_{1, 1};
};

Grid make_grid(std::size_t dims,
               std::vector<std::size_t> points,
               std::vector<double> lengths,
               std::vector<Boundary> boundaries);

/// Nodal samples of a function on a grid. All entries finite.
class ScalarField {
public:
    explicit ScalarField(Grid grid, double fill = 0.0);
    ScalarField(Grid grid, std::vector<double> values);

    const Grid& grid() const { return grid_; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    std::size_t size() const { return values_.size(); }

    double operator[](std::size_t n) const { return values_[n]; }
    double& operator[](std::size_t n) { return values_[n]; }
    double at(std::size_t i, std::size_t j = 0) const { return values_[grid_.index(i, j)]; }

    double max() const;
    double min() const;

    template <class Fn>
    static ScalarField sample(const Grid& grid, Fn&& fn) {
        ScalarField out(grid);
        for (std::size_t n = 0; n < grid.node_count(); ++n) {
            auto [i, j] = grid.unravel(n);
            if constexpr (std::is_invocable_v<Fn, double, double>) {
                if (grid.dims() != 2) throw std::invalid_argument("sample: binary function on a 1D grid");
                out.values_[n] = fn(grid.coord(0, i), grid.coord(1, j));
            } else {
                if (grid.dims() != 1) throw std::invalid_argument("sample: unary function on a 2D grid");
                out.values_[n] = fn(grid.coord(0, i));
            }
        }
        out.check_finite();
        return out;
    }

    void check_finite() const;

private:
    Grid grid_;
    std::vector<double> values_;
};

/// Symmetric second-derivative matrix at one node. In one dimension
/// only `xx` is meaningful and the others are zero.
struct Sym2 {
    double xx = 0.0;
    double xy = 0.0;
    double yy = 0.0;
};

struct HessianField {
    Grid grid;
    std::vector<Sym2> entries;
};

using NodeMask = std::vector<bool>;

ScalarField laplacian(const ScalarField& f);

/// |∂f|² in the complex normalization: half the squared real gradient.
ScalarField gradient_sq(const ScalarField& f);

HessianField hessian(const ScalarField& f);

double sup_norm(std::span<const double> v);
double sup_diff(const ScalarField& a, const ScalarField& b);

void require_same_grid(const ScalarField& a, const ScalarField& b, const char* what);

}  // namespace cmalab

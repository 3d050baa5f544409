#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cmalab/reference.hpp"

namespace cmalab {

using Point2 = std::array<double, 2>;

/// Interval [lo, hi] or a convex polygon with counterclockwise vertices.
class Polytope {
public:
    /// Throws std::invalid_argument unless lo < hi.
    static Polytope interval(double lo, double hi);
    /// Throws std::invalid_argument unless the vertices form a strictly
    /// convex counterclockwise polygon with positive area.
    static Polytope polygon(std::vector<Point2> vertices);

    std::size_t dims() const { return dims_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    const std::vector<Point2>& vertices() const { return vertices_; }

    /// Boundary inclusive up to `tol`.
    bool contains(double p, double tol = 1e-12) const;
    bool contains(Point2 p, double tol = 1e-12) const;
    /// True if every vertex of `inner` lies in this polytope (tol as above).
    bool contains(const Polytope& inner, double tol = 1e-12) const;

private:
    std::size_t dims_ = 1;
    double lo_ = 0.0, hi_ = 0.0;
    std::vector<Point2> vertices_;
};

/// Sampled function on a tensor grid of primal points. Nodes with
/// `active[n] == false` are outside the domain and carry no value.
struct ConvexSample {
    std::vector<std::vector<double>> axes;  ///< strictly increasing coordinates, 1 or 2 axes
    std::vector<double> values;             ///< row-major, last axis fastest
    Polytope dual;                          ///< gradient range
    NodeMask active;                        ///< empty: every node active

    std::size_t dims() const { return axes.size(); }
    std::size_t size() const { return values.size(); }
    std::size_t index(std::size_t i, std::size_t j = 0) const { return dims() == 1 ? i : i * axes[1].size() + j; }
    bool is_active(std::size_t n) const { return active.empty() || active[n]; }
    Point2 point(std::size_t n) const;
};

/// n+1 equispaced points from lo to hi inclusive.
std::vector<double> uniform_axis(double lo, double hi, std::size_t n);

/// Samples fn over the axes; in two dimensions nodes outside `domain` (if
/// given) are masked. The dual polytope is the gradient range of the lower
/// convex hull of the data (1-d) or the bounding box of the axis slopes (2-d).
ConvexSample make_sample(std::vector<std::vector<double>> axes, const std::function<double(Point2)>& fn,
                         const std::optional<Polytope>& domain = std::nullopt);

/// Worst second difference along the axes (negative means non-convex);
/// triples touching masked nodes are skipped.
double min_second_difference(const ConvexSample& v);
bool is_discretely_convex(const ConvexSample& v, double tol = 1e-10);

enum class LegendreMethod { brute_force, monotone };

/// v*(y) = max over active x of (<x, y> - v(x)) on the dual axes.
/// `monotone` is the linear-time pointer sweep (1-d only); it returns the
/// same maximizer as the brute-force scan on convex data.
/// Throws std::invalid_argument on empty grids or non-convex v.
ConvexSample legendre(const ConvexSample& v, const std::vector<std::vector<double>>& dual_axes,
                      LegendreMethod method = LegendreMethod::brute_force);

/// Largest function below v_ref whose gradient range lies in P, computed as
/// the transform of v_ref* restricted to P and evaluated on v_ref's nodes.
/// In 1-d the dual samples are the slopes of v_ref's lower hull inside P
/// plus P's end points, which makes the result exact on the nodes; in 2-d
/// they are `dual_axes` (default: P's bounding box, same node counts as
/// the primal axes) masked to P. v_ref need not be convex.
/// Throws std::invalid_argument if P is not inside v_ref's dual range.
ConvexSample toric_envelope(const ConvexSample& v_ref, const Polytope& P,
                            const std::optional<std::vector<std::vector<double>>>& dual_axes = std::nullopt);

/// Periodic obstacle envelope of a 1-d reference through convex duality:
/// with a potential Φ satisfying Φ''/2 = a + eps g, the envelope is
/// u = hull(Φ) - Φ, taken over `periods` copies of the circle and read off
/// on the central one. Requires an odd period count >= 3.
ScalarField envelope_by_duality(const ReferenceData& ref, const std::function<double(double)>& potential,
                                std::size_t periods = 3);

/// Closed-form Φ for the `custom` preset: Φ''/2 = a + eps g exactly.
std::function<double(double)> custom_preset_potential(const ReferenceData& ref, double epsilon);

/// Convex piecewise-linear function stored as a max of affine pieces
/// F(p) = max_k (<slope_k, p> + offset_k).
struct PiecewiseLinear {
    std::size_t dims = 1;
    std::vector<Point2> slopes;
    std::vector<double> offsets;

    double operator()(Point2 p) const;
};

/// 1-d data: slopes s_0 <= ... <= s_m, breakpoints b_1 < ... < b_m,
/// value F(0). Throws std::invalid_argument on decreasing slopes, unsorted
/// breakpoints or a count mismatch.
PiecewiseLinear pl_from_breakpoints(const std::vector<double>& slopes, const std::vector<double>& breakpoints,
                                    double value_at_zero);

/// 2-d data: a list of affine pieces {gx, gy, c}. Throws if empty.
PiecewiseLinear pl_from_pieces(std::vector<std::array<double, 3>> pieces);

struct RayData {
    ConvexSample u0;                       ///< symplectic potential on P
    PiecewiseLinear F;
    std::vector<double> t_values;          ///< >= 0, strictly increasing
    std::vector<std::vector<double>> window;  ///< primal axes for the potentials
};

struct RayOutput {
    std::vector<double> t_values;
    std::vector<ConvexSample> symplectic;  ///< u_t = u0 + t F
    std::vector<ConvexSample> potentials;  ///< φ_t = u_t* on the window
};

/// Throws std::invalid_argument on negative or unsorted t, dimension
/// mismatch, or a non-convex u0 + t F.
RayOutput toric_ray(const RayData& ray);

struct CreaseImage {
    std::size_t t_index;
    double x_lo;  ///< subgradient interval of u_t at the crease
    double x_hi;
};

struct RayAudit {
    double hcma_residual = 0.0;  ///< sup |det| at interior (x, t) nodes away from creases
    std::size_t residual_x = 0;
    std::size_t residual_t = 0;
    std::size_t audited_nodes = 0;
    std::size_t excluded_nodes = 0;
    std::vector<double> second_x_sup;  ///< sup |∂²_x φ_t| per t
    double c11_bound = 0.0;            ///< max over t of second_x_sup
    double c11_ratio = 0.0;            ///< c11_bound / second_x_sup at the first t
    bool crease_detected = false;
    std::vector<std::size_t> crease_nodes;  ///< symplectic-side nodes
    std::vector<CreaseImage> crease_images;
    double crease_jump = 0.0;  ///< largest ∂²_x φ_t oscillation across a crease image
    std::string detector = "heuristic: symplectic second difference above 5x its median";
};

/// Audit of a 1-d ray. Creases are detected on the symplectic side and
/// mapped to the primal window through the subgradient of u_t.
/// Throws std::invalid_argument for fewer than 3 t-values or 2-d rays.
RayAudit ray_c11_audit(const RayOutput& out);

}  // namespace cmalab

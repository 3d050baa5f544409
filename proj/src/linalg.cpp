#include "linalg.hpp"

#include <vector>

namespace cmalab::detail {

SpMat half_neg_laplacian_periodic(const Grid& grid) {
    const auto N = static_cast<Eigen::Index>(grid.node_count());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(N) * (1 + 2 * grid.dims()));
    for (std::size_t n = 0; n < grid.node_count(); ++n) {
        double diag = 0.0;
        for (std::size_t k = 0; k < grid.dims(); ++k) {
            const double c = 0.5 / (grid.spacing(k) * grid.spacing(k));
            diag += 2.0 * c;
            trip.emplace_back(n, grid.neighbor(n, k, 1), -c);
            trip.emplace_back(n, grid.neighbor(n, k, -1), -c);
        }
        trip.emplace_back(n, n, diag);
    }
    SpMat m(N, N);
    m.setFromTriplets(trip.begin(), trip.end());
    m.makeCompressed();
    return m;
}

}  // namespace cmalab::detail

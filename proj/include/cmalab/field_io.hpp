#pragma once

#include <iosfwd>
#include <string>

#include "cmalab/grid.hpp"
#include "cmalab/toric.hpp"

namespace cmalab {

/// Shortest-safe decimal form used by every artifact: 17 significant digits.
std::string format_double(double v);

/// Header `x,value` or `x,y,value`, one row per node in storage order.
void write_field_csv(std::ostream& os, const ScalarField& f);

/// Inverse of write_field_csv on a known grid. Throws std::runtime_error on
/// a malformed header, a row count mismatch or coordinates off the grid.
ScalarField read_field_csv(std::istream& is, const Grid& grid);

/// Same layout for a sampled convex function; masked nodes are skipped.
void write_sample_csv(std::ostream& os, const ConvexSample& s);

}  // namespace cmalab

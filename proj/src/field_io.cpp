#include "cmalab/field_io.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace cmalab {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_field_csv(std::ostream& os, const ScalarField& f) {
    const Grid& grid = f.grid();
    os << (grid.dims() == 1 ? "x,value\n" : "x,y,value\n");
    for (std::size_t n = 0; n < f.size(); ++n) {
        const auto [i, j] = grid.unravel(n);
        os << format_double(grid.coord(0, i)) << ',';
        if (grid.dims() == 2) os << format_double(grid.coord(1, j)) << ',';
        os << format_double(f[n]) << '\n';
    }
}

ScalarField read_field_csv(std::istream& is, const Grid& grid) {
    std::string line;
    const std::string header = grid.dims() == 1 ? "x,value" : "x,y,value";
    if (!std::getline(is, line) || line != header) throw std::runtime_error("field csv: expected header '" + header + "'");
    ScalarField f(grid);
    std::size_t n = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (n >= f.size()) throw std::runtime_error("field csv: too many rows");
        std::istringstream row(line);
        std::string cell;
        double vals[3];
        std::size_t k = 0;
        while (std::getline(row, cell, ',')) {
            if (k >= grid.dims() + 1) throw std::runtime_error("field csv: too many columns");
            try {
                vals[k++] = std::stod(cell);
            } catch (const std::exception&) {
                throw std::runtime_error("field csv: bad number '" + cell + "'");
            }
        }
        if (k != grid.dims() + 1) throw std::runtime_error("field csv: too few columns");
        const auto [i, j] = grid.unravel(n);
        const double tol = 1e-12 * (1.0 + grid.length(0));
        if (std::abs(vals[0] - grid.coord(0, i)) > tol || (grid.dims() == 2 && std::abs(vals[1] - grid.coord(1, j)) > tol))
            throw std::runtime_error("field csv: row " + std::to_string(n) + " is off the grid");
        f[n] = vals[grid.dims()];
        ++n;
    }
    if (n != f.size()) throw std::runtime_error("field csv: expected " + std::to_string(f.size()) + " rows");
    return f;
}

void write_sample_csv(std::ostream& os, const ConvexSample& s) {
    os << (s.dims() == 1 ? "x,value\n" : "x,y,value\n");
    for (std::size_t n = 0; n < s.size(); ++n) {
        if (!s.is_active(n)) continue;
        const Point2 p = s.point(n);
        os << format_double(p[0]) << ',';
        if (s.dims() == 2) os << format_double(p[1]) << ',';
        os << format_double(s.values[n]) << '\n';
    }
}

}  // namespace cmalab

#pragma once

#include <vector>

#include "eit/geometry.hpp"

namespace eit {

/// One double per grid node, flat layout grid.index(i,j) = j*nx + i.
struct ScalarField {
    Grid2D grid;
    std::vector<double> v;

    ScalarField() = default;
    explicit ScalarField(const Grid2D& g, double fill = 0.0)
        : grid(g), v(static_cast<std::size_t>(g.size()), fill) {}

    double& at(int i, int j) { return v[grid.index(i, j)]; }
    double at(int i, int j) const { return v[grid.index(i, j)]; }
};

}  // namespace eit

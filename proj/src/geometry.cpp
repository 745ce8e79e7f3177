#include "eit/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace eit {

namespace {

// Rounds len/h to the nearest integer and verifies h divides len to 1e-9
// relative accuracy. Grid constructors rely on exact side subdivision so
// that Omega corners and traces land on nodes.
int exact_steps(double len, double h, const char* what, int min_steps = 1) {
    const double q = len / h;
    const double r = std::round(q);
    if (r < min_steps || std::abs(q - r) > 1e-9 * std::max(1.0, q)) {
        throw std::invalid_argument(std::string("grid spacing does not divide ") + what);
    }
    return static_cast<int>(r);
}

}  // namespace

void validate_geometry(const GeometryConfig& g) {
    auto fail = [](const char* msg) { throw std::invalid_argument(msg); };
    if (!(g.A > 0.0 && g.c1 > 0.0 && g.c2 > 0.0 && g.g_radius > 0.0)) {
        fail("geometry: lengths must be positive");
    }
    const double half_diag = std::hypot(g.c1, g.c2);
    if (!(half_diag < g.A)) {
        fail("geometry: Omega must lie strictly inside the source disk D_A");
    }
    if (!(g.a - g.c1 > 0.0 && g.b - g.c2 > 0.0)) {
        fail("geometry: Omega must keep away from the coordinate axes");
    }
    // The closed source circle, fattened by the bump radius rho, must stay
    // inside G so every source support is interior to G.
    const double cdist = std::hypot(g.a - g.g_center_x, g.b - g.g_center_y);
    if (!(cdist + g.A + g.rho < g.g_radius)) {
        fail("geometry: source circle C_A (plus bump radius) must lie inside G");
    }
    if (!(g.rho > 0.0 && g.rho < 1.0)) {
        fail("geometry: rho must lie in (0,1)");
    }
    if (!(g.rho < g.A - half_diag)) {
        fail("geometry: rho must be smaller than the gap between C_A and Omega");
    }
}

MaskedGrid build_omega_grid(const GeometryConfig& g, double h) {
    validate_geometry(g);
    const int nx = exact_steps(2.0 * g.c1, h, "the Omega side in x") + 1;
    const int ny = exact_steps(2.0 * g.c2, h, "the Omega side in y") + 1;
    if (nx < 5 || ny < 5) {
        throw std::invalid_argument("Omega grid too coarse: need at least 5 nodes per side");
    }
    MaskedGrid m;
    m.grid = Grid2D{g.a - g.c1, g.b - g.c2, h, nx, ny};
    m.mask.assign(static_cast<std::size_t>(nx) * ny, NodeClass::Interior);
    for (int i = 0; i < nx; ++i) {
        m.mask[m.grid.index(i, 0)] = NodeClass::Dirichlet;
        m.mask[m.grid.index(i, ny - 1)] = NodeClass::Dirichlet;
    }
    for (int j = 0; j < ny; ++j) {
        m.mask[m.grid.index(0, j)] = NodeClass::Dirichlet;
        m.mask[m.grid.index(nx - 1, j)] = NodeClass::Dirichlet;
    }
    // Gamma is the open right edge; the two corners stay Dirichlet-only.
    for (int j = 1; j < ny - 1; ++j) {
        m.mask[m.grid.index(nx - 1, j)] = NodeClass::Gamma;
    }
    return m;
}

MaskedGrid build_disk_grid(const GeometryConfig& g, double h) {
    validate_geometry(g);
    const int steps = exact_steps(2.0 * g.g_radius, h, "the bounding box of G");
    const int n = steps + 1;
    MaskedGrid m;
    m.grid = Grid2D{g.g_center_x - g.g_radius, g.g_center_y - g.g_radius, h, n, n};
    // Omega corners must be representable exactly on this grid, or traces
    // taken on disk-grid nodes would miss the Omega boundary.
    exact_steps(g.a - g.c1 - m.grid.x0, h, "the offset of Omega inside G", 0);
    exact_steps(g.b - g.c2 - m.grid.y0, h, "the offset of Omega inside G", 0);
    m.mask.assign(static_cast<std::size_t>(n) * n, NodeClass::Exterior);
    const double r2 = g.g_radius * g.g_radius;
    for (int j = 0; j < n; ++j) {
        const double dy = m.grid.y(j) - g.g_center_y;
        for (int i = 0; i < n; ++i) {
            const double dx = m.grid.x(i) - g.g_center_x;
            if (dx * dx + dy * dy < r2) {
                m.mask[m.grid.index(i, j)] = NodeClass::Interior;
            }
        }
    }
    return m;
}

std::vector<int> boundary_nodes(const Grid2D& grid) {
    std::vector<int> out;
    out.reserve(2 * (grid.nx + grid.ny) - 4);
    for (int i = 0; i < grid.nx; ++i) out.push_back(grid.index(i, 0));
    for (int j = 1; j < grid.ny; ++j) out.push_back(grid.index(grid.nx - 1, j));
    for (int i = grid.nx - 2; i >= 0; --i) out.push_back(grid.index(i, grid.ny - 1));
    for (int j = grid.ny - 2; j >= 1; --j) out.push_back(grid.index(0, j));
    return out;
}

std::vector<int> gamma_nodes(const Grid2D& grid) {
    std::vector<int> out;
    out.reserve(grid.ny - 2);
    for (int j = 1; j < grid.ny - 1; ++j) out.push_back(grid.index(grid.nx - 1, j));
    return out;
}

SourceSet make_sources(const GeometryConfig& g, int count) {
    validate_geometry(g);
    if (count < 2) {
        throw std::invalid_argument("source count must be at least 2");
    }
    SourceSet s;
    s.count = count;
    s.rho = g.rho;
    s.h_phi = 2.0 * std::numbers::pi / (count + 1);
    s.phi.resize(count);
    s.x.resize(count);
    s.y.resize(count);
    for (int n = 0; n < count; ++n) {
        s.phi[n] = n * s.h_phi;
        s.x[n] = g.a + g.A * std::cos(s.phi[n]);
        s.y[n] = g.b + g.A * std::sin(s.phi[n]);
    }
    return s;
}

OmegaInDisk locate_omega(const Grid2D& omega, const Grid2D& disk) {
    OmegaInDisk map;
    map.k = exact_steps(omega.h, disk.h, "the Omega spacing (not a multiple of the disk spacing)");
    map.ix0 = exact_steps(omega.x0 - disk.x0, disk.h, "the Omega offset in x", 0);
    map.iy0 = exact_steps(omega.y0 - disk.y0, disk.h, "the Omega offset in y", 0);
    const int ix_end = map.ix0 + map.k * (omega.nx - 1);
    const int iy_end = map.iy0 + map.k * (omega.ny - 1);
    if (ix_end >= disk.nx || iy_end >= disk.ny) {
        throw std::invalid_argument("Omega grid does not fit inside the disk grid");
    }
    return map;
}

}  // namespace eit

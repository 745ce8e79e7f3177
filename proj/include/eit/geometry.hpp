#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace eit {

/// Geometry of the measurement setup: a large disk G that contains the
/// square observation domain Omega and the circle C_A of source positions.
///
///   G     = disk of radius g_radius centered at (g_center_x, g_center_y)
///   Omega = (a - c1, a + c1) x (b - c2, b + c2)
///   C_A   = circle of radius A centered at (a, b); sources sit on C_A
///   Gamma = right edge of Omega, x = a + c1, y in (b - c2, b + c2),
///           where Neumann data are measured
///
/// Sources are mollified point sources of support radius rho.
struct GeometryConfig {
    double a = 1.5;           ///< x of the Omega/source-circle center
    double b = 1.5;           ///< y of the Omega/source-circle center
    double A = 2.0;           ///< radius of the source circle C_A
    double c1 = 0.5;          ///< half width of Omega in x
    double c2 = 0.5;          ///< half width of Omega in y
    double rho = 0.1;         ///< support radius of the source bump
    double g_radius = 3.0;    ///< radius of the disk G
    double g_center_x = 1.5;  ///< center of G
    double g_center_y = 1.5;
};

/// Checks the placement conditions the inversion relies on; throws
/// std::invalid_argument naming the first violated condition.
///
/// Required: all lengths positive; Omega strictly inside the source disk
/// D_A (sqrt(c1^2+c2^2) < A); the closed source circle C_A inside G with
/// clearance rho; Omega away from the coordinate axes (a - c1 > 0,
/// b - c2 > 0); rho in (0,1) and rho < A - sqrt(c1^2+c2^2) so source
/// supports never touch Omega.
void validate_geometry(const GeometryConfig& g);

/// Uniform tensor grid with spacing h; node (i,j) sits at
/// (x0 + i*h, y0 + j*h), flat index j*nx + i.
struct Grid2D {
    double x0 = 0.0;
    double y0 = 0.0;
    double h = 1.0;
    int nx = 0;
    int ny = 0;

    int size() const { return nx * ny; }
    int index(int i, int j) const { return j * nx + i; }
    double x(int i) const { return x0 + i * h; }
    double y(int j) const { return y0 + j * h; }
};

/// Node classification on a grid. Dirichlet marks boundary nodes of Omega
/// (the trace is prescribed there); Gamma marks the subset on the right
/// edge where Neumann data are additionally known. On disk grids only
/// Interior/Exterior are used.
enum class NodeClass : std::uint8_t { Exterior = 0, Interior, Dirichlet, Gamma };

/// Grid plus per-node classification.
struct MaskedGrid {
    Grid2D grid;
    std::vector<NodeClass> mask;  ///< size grid.size()

    NodeClass at(int i, int j) const { return mask[grid.index(i, j)]; }
};

/// Builds the Omega grid with spacing h. Requires h to divide both side
/// lengths (2*c1, 2*c2) to within 1e-9 relative; throws otherwise. The
/// boundary ring is Dirichlet except the interior of the right edge,
/// which is Gamma.
MaskedGrid build_omega_grid(const GeometryConfig& g, double h);

/// Builds a grid covering the bounding box of G with spacing h, nodes
/// strictly inside G marked Interior, the rest Exterior (homogeneous
/// Dirichlet is imposed on this staircase boundary). Requires h to divide
/// the box side 2*g_radius and the corners of Omega to fall on grid nodes;
/// throws otherwise.
MaskedGrid build_disk_grid(const GeometryConfig& g, double h);

/// Flat indices of the Omega boundary ring in counterclockwise traversal
/// starting at the lower-left corner: bottom row left to right, right
/// column bottom to top, top row right to left, left column top to bottom.
/// This fixed order defines the row layout of all boundary trace arrays.
std::vector<int> boundary_nodes(const Grid2D& grid);

/// Flat indices of the Gamma nodes (right edge, corners excluded) in
/// ascending y. Order defines the row layout of Neumann trace arrays.
std::vector<int> gamma_nodes(const Grid2D& grid);

/// Source positions on C_A: x0_n = (a + A cos phi_n, b + A sin phi_n),
/// phi_n = n * h_phi with h_phi = 2*pi/(count + 1), n = 0..count-1. The
/// spacing leaves a one-step gap so phi_0 = 0 and phi_{count-1} < 2*pi.
struct SourceSet {
    int count = 0;
    double h_phi = 0.0;
    double rho = 0.0;         ///< bump radius, copied from the geometry
    std::vector<double> phi;  ///< angles, ascending
    std::vector<double> x;    ///< source x per angle
    std::vector<double> y;    ///< source y per angle
};

/// Builds the source set for the given geometry; count must be >= 2.
SourceSet make_sources(const GeometryConfig& g, int count);

/// Mapping between the Omega grid and a finer disk grid whose spacing
/// divides the Omega spacing: Omega node (i,j) coincides with disk node
/// (ix0 + k*i, iy0 + k*j).
struct OmegaInDisk {
    int ix0 = 0;
    int iy0 = 0;
    int k = 1;  ///< spacing ratio h_omega / h_disk
};

/// Computes the index mapping; throws if the grids do not nest.
OmegaInDisk locate_omega(const Grid2D& omega, const Grid2D& disk);

}  // namespace eit

#pragma once

#include <vector>

#include "eit/field.hpp"
#include "eit/geometry.hpp"

namespace eit {

/// Normalization constant C_rho of the source bump: the bump
/// exp(|x|^2 / (|x|^2 - rho^2)) on |x| < rho, extended by zero, integrates
/// to 1/C_rho over the plane. Computed by adaptive quadrature to ~1e-12
/// relative accuracy and cached per rho.
double source_normalization(double rho);

/// Mollified unit source centered at (cx, cy): value C_rho *
/// exp(d2 / (d2 - rho^2)) with d2 = (x-cx)^2 + (y-cy)^2 for d2 < rho^2,
/// zero otherwise. Smooth, supported on the closed rho-disk, total mass 1.
double eval_source(double x, double y, double cx, double cy, double rho);

/// Outcome of one conservative five-point solve of
///   div(sigma grad u) = -f   in G,   u = 0 on the staircase boundary.
struct ForwardSolution {
    ScalarField u;            ///< potential on the disk grid (0 outside G)
    int iterations = 0;
    double rel_residual = 0;  ///< final |b - A u| / |b|
    bool converged = false;
};

/// Solves div(sigma grad u) = -rhs with u = 0 on the staircase boundary
/// of G. sigma and rhs live on the disk grid (values outside G are
/// ignored); face conductivities are arithmetic means of the two adjacent
/// nodes. The CG solver is Jacobi preconditioned, stops at relative
/// residual `tol` and is capped at 50*sqrt(nx*ny) iterations; a cap hit
/// throws std::runtime_error.
ForwardSolution solve_poisson(const MaskedGrid& disk, const ScalarField& sigma,
                              const ScalarField& rhs, double tol = 1e-10);

/// Forward solve for one mollified point source at (cx, cy).
ForwardSolution solve_forward(const MaskedGrid& disk, const ScalarField& sigma,
                              double cx, double cy, double rho, double tol = 1e-10);

/// Dirichlet and Neumann traces of the forward solutions on the Omega
/// boundary, for every source angle. Row-major layout: entry [row, n] at
/// row * n_phi + n, rows ordered by boundary_nodes() / gamma_nodes().
struct BoundaryDataset {
    int n_boundary = 0;       ///< rows of g0 (all Omega boundary nodes)
    int n_gamma = 0;          ///< rows of g1 (Gamma nodes)
    int n_phi = 0;            ///< number of source angles
    double h_phi = 0.0;
    std::vector<double> g0;   ///< Dirichlet trace u
    std::vector<double> g1;   ///< Neumann trace du/dx on Gamma (outward)
    double min_u_omega = 0.0; ///< min of u over closed Omega and all angles
    double delta = 0.0;       ///< noise level applied (0 = clean)
    unsigned long long seed = 0;
};

/// Runs the forward solver for every source in `sources` and extracts
/// traces on the Omega boundary (which must consist of disk-grid nodes;
/// `map` from locate_omega). g1 uses the central difference across Gamma
/// on the disk grid. Throws if any solve fails or if u is not strictly
/// positive on closed Omega (the data transform needs log g0).
/// `threads` = 0 picks the hardware concurrency.
BoundaryDataset measure_all(const MaskedGrid& disk, const ScalarField& sigma,
                            const SourceSet& sources, const MaskedGrid& omega,
                            const OmegaInDisk& map, double tol = 1e-10,
                            int threads = 1);

}  // namespace eit

#pragma once

#include <vector>

#include "eit/forward.hpp"

namespace eit {

/// Applies multiplicative noise g <- g * (1 + delta * xi), xi uniform in
/// [-1, 1] from mt19937_64(seed). By default one xi is drawn per boundary
/// node and shared across all source angles (the noise models a fixed
/// per-electrode error); with per_angle = true an independent xi is drawn
/// per (node, angle) pair. Draw order is fixed: all g0 rows first, then
/// all g1 rows, row-major. Records delta and seed in the dataset.
void add_noise(BoundaryDataset& data, double delta, unsigned long long seed,
               bool per_angle = false);

/// Nodal derivative of the natural cubic spline interpolating y on a
/// uniform grid of spacing h (zero second derivative at both ends).
/// Exact for affine data at every node. Requires y.size() >= 2 and h > 0.
std::vector<double> spline_phi_derivative(const std::vector<double>& y, double h);

/// Boundary data after the log/viscosity transform, per node and angle
/// (row-major [row * n_phi + n], same row orders as BoundaryDataset):
///
///   s0 = log g0                 on the whole Omega boundary
///   s1 = g1 / g0                on Gamma
///
/// and the Dirichlet/Neumann values these induce for the pair (r, q),
/// where r approximates the angular derivative of the log potential and
/// q = r - eps * (log potential):
///
///   r = d/dphi s0,   q = d/dphi s0 - eps * s0      on the boundary ring
///   dr/dn = d/dphi s1,   dq/dn = d/dphi s1 - eps * s1   on Gamma
///
/// Angular derivatives come from spline_phi_derivative along each row.
struct TransformedBoundary {
    int n_boundary = 0;
    int n_gamma = 0;
    int n_phi = 0;
    double h_phi = 0.0;
    double eps = 0.0;
    std::vector<double> s0, s1;
    std::vector<double> dphi_s0, dphi_s1;
    std::vector<double> r_dir, q_dir;  ///< ring rows
    std::vector<double> r_neu, q_neu;  ///< Gamma rows
};

/// Computes the transform for viscosity parameter eps > 0. Throws
/// std::domain_error naming the first offending (row, angle) if any g0
/// is not strictly positive, and std::invalid_argument for eps <= 0 or
/// fewer than 3 angles (the spline needs them).
TransformedBoundary log_transform(const BoundaryDataset& data, double eps);

/// Boundary values for one source angle, in ring / Gamma row order.
struct PhiBoundaryData {
    std::vector<double> r_dir, q_dir;  ///< size n_boundary
    std::vector<double> r_neu, q_neu;  ///< size n_gamma
};

/// Extracts the angle-n slice of the transformed data.
PhiBoundaryData extract_slice(const TransformedBoundary& tb, int n);

}  // namespace eit

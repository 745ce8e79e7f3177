#pragma once

#include <vector>

#include "eit/field.hpp"
#include "eit/geometry.hpp"
#include "eit/pipeline.hpp"

namespace eit {

/// Parameters of the Carleman-weighted least-squares functional.
struct ConvexParams {
    double lambda = 3.0;  ///< weight exponent, psi(x) = exp(2*lambda*x^2)
    double alpha = 0.01;  ///< H2 regularization strength
    double eps = 2e-4;    ///< viscosity parameter of the transform
};

/// The unknown pair (r, s) for one source angle on the Omega grid.
///
/// r approximates the angular derivative of the log potential, s its
/// viscosity-shifted companion; the log potential itself is (r - s)/eps.
/// Boundary data pin both fields on the ring (Dirichlet) and, through a
/// first-order one-sided difference, on the grid column next to Gamma
/// (Neumann). Free unknowns are the remaining interior nodes:
/// i in [1, nx-3], j in [1, ny-2]. The residual operators
///
///   L1 = lap r + 2 grad r . grad((r - s)/eps)
///   L2 = lap s + 2 grad r . grad((r - s)/eps)
///
/// are evaluated at free nodes with central differences.
struct PairField {
    Grid2D grid;
    double eps = 0.0;
    std::vector<double> r, s;  ///< full-grid values
    PhiBoundaryData bc;

    /// Number of free nodes per field.
    int n_free() const { return (grid.nx - 3) * (grid.ny - 2); }
    bool is_free(int i, int j) const {
        return i >= 1 && i <= grid.nx - 3 && j >= 1 && j <= grid.ny - 2;
    }

    /// Rewrites the constrained entries (ring and Neumann layer) from bc.
    /// The layer next to Gamma gets value(ring) - h * (Neumann datum).
    void apply_constraints();

    /// Copies the free entries of both fields into / out of a flat vector
    /// of length 2*n_free(), r block first, row-major in (j, i).
    void pack(std::vector<double>& x) const;
    void unpack(const std::vector<double>& x);
};

/// Builds a pair field with the given boundary data applied and zero at
/// the free nodes. Throws if the data sizes do not match the grid.
PairField make_pair_field(const Grid2D& grid, double eps, const PhiBoundaryData& bc);

/// Initial guess for the minimization: both fields are extended from the
/// boundary data into the free box as discrete harmonic functions. The
/// start is then boundary-consistent and smooth, so the initial residuals
/// carry no mesh-scale jumps along the constrained nodes.
PairField harmonic_start(const Grid2D& grid, double eps, const PhiBoundaryData& bc);

/// Residual fields L1, L2 at free nodes (zero elsewhere).
ScalarField eval_L1(const PairField& p);
ScalarField eval_L2(const PairField& p);

/// Discrete squared H2 norm of a full-grid field: h^2 times the sum of
/// squared values over all nodes, squared central first differences and
/// squared second differences (xx, yy and the cross difference) over all
/// nodes where the stencils fit.
double h2_norm2(const Grid2D& grid, const std::vector<double>& u);

/// The weighted functional
///
///   J = sqrt(eps) * sum_free (L1^2 + L2^2) * exp(2*lambda*x^2) * h^2
///       + alpha * (|r|_H2^2 + |s|_H2^2)
///
/// with x the first coordinate of the node. Throws std::invalid_argument
/// if 2*lambda*max(x)^2 > 700 (the weight would overflow) or if
/// params.eps does not match the pair.
double eval_J(const PairField& p, const ConvexParams& params);

/// Exact gradient of eval_J with respect to the packed free values.
std::vector<double> grad_J(const PairField& p, const ConvexParams& params);

/// Exact Hessian of eval_J applied to a packed direction v. The functional
/// is a quartic polynomial of the state, so the Hessian is assembled in
/// closed form (no differencing): Gauss-Newton outer products of the
/// residual gradients, the constant curvature of the bilinear cross term
/// scaled by the residuals, and the constant regularizer Hessian.
std::vector<double> hessvec_J(const PairField& p, const ConvexParams& params,
                              const std::vector<double>& v);

/// Second-order information used to scale descent directions: diagonal of
/// the Gauss-Newton approximation of the residual term plus the exact
/// diagonal of the regularization Hessian, in packed layout. All entries
/// are strictly positive (every free node centers its own residual
/// stencil, so the Gauss-Newton part alone is positive).
std::vector<double> scaling_diagonal(const PairField& p, const ConvexParams& params);

/// Result of the strong-convexity probe on a pair of states with shared
/// boundary data: gap = J(p2) - J(p1) - <grad J(p1), x2 - x1>.
struct ConvexityGap {
    double gap = 0.0;
    double h2_diff2 = 0.0;  ///< |r2-r1|_H2^2 + |s2-s1|_H2^2
};

/// Computes the gap; throws if the two states differ in grid, eps or in
/// any constrained entry by more than 1e-12.
ConvexityGap convexity_gap(const PairField& p1, const PairField& p2,
                           const ConvexParams& params);

/// Minimization settings. Every method only ever accepts a step that does
/// not increase J, so the recorded J trace is non-increasing. Newton (the
/// default) factors the exact sparse Hessian with a banded Cholesky and is
/// the only method that reliably drives the gradient norm to small
/// stopping thresholds on the stiff Carleman-weighted functional; the
/// others are kept for comparison runs.
struct MinimizeOptions {
    enum class Method { GradientDescent, Lbfgs, Newton };
    Method method = Method::Newton;
    double gamma = 0.1;     ///< initial step size (gradient descent)
    double grad_tol = 1e-2; ///< stop when |grad J|_2 falls below this
    int max_iters = 2000;
    int lbfgs_memory = 10;
    bool record_trace = true;
};

struct MinimizeResult {
    PairField pair;
    std::vector<double> j_trace;     ///< J after each accepted iteration
    std::vector<double> grad_trace;  ///< |grad J|_2 matching j_trace
    int iterations = 0;
    bool converged = false;  ///< grad_tol reached before max_iters
};

/// Minimizes J over the free nodes starting from `start` (constraints are
/// reapplied first). Gradient descent uses a fixed step with halving on
/// increase; L-BFGS scales with scaling_diagonal() and backtracks.
MinimizeResult minimize_single_phi(const PairField& start, const ConvexParams& params,
                                   const MinimizeOptions& opts);

/// Log potential w = (r - s)/eps on the full grid.
ScalarField recover_w(const PairField& p);

/// Trapezoid-free quadrature of the coefficient update over all angles:
///
///   a(x) = -(h_phi / (2 pi)) * sum_n [ lap w + |grad w|^2 ](x, phi_n)
///
/// evaluated with central differences at interior nodes; the boundary
/// ring of the result is set to zero. All fields must share one grid.
ScalarField recover_a(const std::vector<ScalarField>& w, double h_phi);

}  // namespace eit

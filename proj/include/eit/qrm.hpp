#pragma once

#include "eit/field.hpp"
#include "eit/geometry.hpp"

namespace eit {

/// Settings for the quasi-reversibility solve of lap V = a V on Omega.
struct QrmOptions {
    double ridge = 0.0;     ///< optional Tikhonov term ridge*|V-1|^2 (off by default)
    double rel_tol = 1e-8;  ///< relative residual target for the normal equations
    int max_iters = 50000;
    double grad_tol = 0.0;  ///< if > 0, also stop once |grad K|_2 < grad_tol
};

struct QrmResult {
    ScalarField V;
    double k_value = 0.0;    ///< K at the returned V
    double grad_norm = 0.0;  ///< |grad K|_2 at the returned V
    int iterations = 0;
    bool converged = false;
};

/// Least-squares value
///
///   K(V) = sum_free (lap V - a V)^2 h^2 + ridge * sum_free (V - 1)^2 h^2
///
/// where the free nodes are i, j in [2, n-3] and the two outermost node
/// layers are the discrete boundary conditions V = 1 on the ring and
/// dV/dn = 0 one layer in (so both layers hold the value 1). Throws if
/// any constrained entry deviates from 1 by more than 1e-9.
double eval_K(const ScalarField& V, const ScalarField& a, double ridge = 0.0);

/// Minimizes K for the given coefficient field by conjugate gradients on
/// the normal equations (Jacobi preconditioned, matrix-free). The
/// returned V holds 1 on the two constrained layers. Never increases K
/// across iterations; non-convergence is reported via the flag, not an
/// exception.
QrmResult minimize_K(const ScalarField& a, const QrmOptions& opts = {});

/// Conductivity from the recovered V: sigma = V^2.
ScalarField sigma_from_V(const ScalarField& V);

}  // namespace eit

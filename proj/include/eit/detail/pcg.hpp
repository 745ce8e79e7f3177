#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace eit::detail {

/// Result of a preconditioned conjugate gradient run.
struct PcgResult {
    int iterations = 0;
    double rel_residual = 0.0;  ///< |b - A x| / |b| at exit
    bool converged = false;
};

/// Jacobi-preconditioned CG for SPD operators given as callables.
///
///   apply(x, y):   y = A x
///   inv_diag[i]:   1 / A_ii
///
/// Iterates until |r| <= tol * |b| or max_iter. x holds the initial guess
/// on entry and the solution on exit. Plain sequential loops keep results
/// bit-reproducible across runs.
template <class Apply>
PcgResult pcg_solve(const Apply& apply, const std::vector<double>& inv_diag,
                    const std::vector<double>& b, std::vector<double>& x,
                    double tol, int max_iter) {
    const std::size_t n = b.size();
    std::vector<double> r(n), z(n), p(n), ap(n);

    apply(x, ap);
    double bnorm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        r[i] = b[i] - ap[i];
        bnorm2 += b[i] * b[i];
    }
    const double stop2 = tol * tol * bnorm2;

    double rz = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = inv_diag[i] * r[i];
        p[i] = z[i];
        rz += r[i] * z[i];
    }

    PcgResult res;
    double rnorm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) rnorm2 += r[i] * r[i];
    if (bnorm2 == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        res.converged = true;
        return res;
    }

    for (int it = 0; it < max_iter && rnorm2 > stop2; ++it) {
        apply(p, ap);
        double pap = 0.0;
        for (std::size_t i = 0; i < n; ++i) pap += p[i] * ap[i];
        if (pap <= 0.0) break;  // loss of positive definiteness; bail out
        const double alpha = rz / pap;
        rnorm2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            rnorm2 += r[i] * r[i];
        }
        double rz_new = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            z[i] = inv_diag[i] * r[i];
            rz_new += r[i] * z[i];
        }
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
        res.iterations = it + 1;
    }
    res.rel_residual = std::sqrt(rnorm2 / bnorm2);
    res.converged = rnorm2 <= stop2;
    return res;
}

}  // namespace eit::detail

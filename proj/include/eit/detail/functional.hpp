#pragma once

#include <cmath>

#include "eit/geometry.hpp"

namespace eit::detail {

/// Math customization point so the functional below can be evaluated in
/// an extended-precision type; tests specialize this for __float128.
template <class Real>
struct MathOps {
    static Real exp(Real x) { return std::exp(x); }
};

/// Reference evaluation of the weighted functional on raw full-grid
/// arrays, templated on the arithmetic type. Mirrors eval_J exactly:
/// residual terms at free nodes (i in [1,nx-3], j in [1,ny-2]) weighted by
/// sqrt(eps)*exp(2*lambda*x^2)*h^2, plus alpha times the discrete H2
/// norms of both fields. Inputs stay double; all arithmetic is Real.
template <class Real>
Real eval_J_any(const Grid2D& g, const double* r, const double* s,
                double lambda, double alpha, double eps) {
    const Real h = static_cast<Real>(g.h);
    const Real inv2h = Real(1) / (Real(2) * h);
    const Real invh2 = Real(1) / (h * h);
    const Real inv_eps = Real(1) / static_cast<Real>(eps);

    auto id = [&](int i, int j) { return j * g.nx + i; };

    Real jres = 0;
    // eps is a double parameter, so the double sqrt is the exact shared
    // constant between this evaluator and eval_J.
    const Real se = static_cast<Real>(std::sqrt(eps));
    for (int j = 1; j <= g.ny - 2; ++j) {
        for (int i = 1; i <= g.nx - 3; ++i) {
            const Real rx = (Real(r[id(i + 1, j)]) - Real(r[id(i - 1, j)])) * inv2h;
            const Real ry = (Real(r[id(i, j + 1)]) - Real(r[id(i, j - 1)])) * inv2h;
            const Real sx = (Real(s[id(i + 1, j)]) - Real(s[id(i - 1, j)])) * inv2h;
            const Real sy = (Real(s[id(i, j + 1)]) - Real(s[id(i, j - 1)])) * inv2h;
            const Real lr = (Real(r[id(i + 1, j)]) + Real(r[id(i - 1, j)]) +
                             Real(r[id(i, j + 1)]) + Real(r[id(i, j - 1)]) -
                             Real(4) * Real(r[id(i, j)])) * invh2;
            const Real ls = (Real(s[id(i + 1, j)]) + Real(s[id(i - 1, j)]) +
                             Real(s[id(i, j + 1)]) + Real(s[id(i, j - 1)]) -
                             Real(4) * Real(s[id(i, j)])) * invh2;
            const Real tx = (rx - sx) * inv_eps;
            const Real ty = (ry - sy) * inv_eps;
            const Real dot = rx * tx + ry * ty;
            const Real l1 = lr + Real(2) * dot;
            const Real l2 = ls + Real(2) * dot;
            const Real x = static_cast<Real>(g.x(i));
            const Real w = MathOps<Real>::exp(Real(2) * static_cast<Real>(lambda) * x * x);
            jres += se * w * h * h * (l1 * l1 + l2 * l2);
        }
    }

    auto h2norm2 = [&](const double* u) {
        Real acc = 0;
        for (int j = 0; j < g.ny; ++j) {
            for (int i = 0; i < g.nx; ++i) {
                const Real v = Real(u[id(i, j)]);
                acc += v * v;
            }
        }
        for (int j = 0; j < g.ny; ++j) {
            for (int i = 1; i <= g.nx - 2; ++i) {
                const Real ux = (Real(u[id(i + 1, j)]) - Real(u[id(i - 1, j)])) * inv2h;
                const Real uxx = (Real(u[id(i + 1, j)]) - Real(2) * Real(u[id(i, j)]) +
                                  Real(u[id(i - 1, j)])) * invh2;
                acc += ux * ux + uxx * uxx;
            }
        }
        for (int j = 1; j <= g.ny - 2; ++j) {
            for (int i = 0; i < g.nx; ++i) {
                const Real uy = (Real(u[id(i, j + 1)]) - Real(u[id(i, j - 1)])) * inv2h;
                const Real uyy = (Real(u[id(i, j + 1)]) - Real(2) * Real(u[id(i, j)]) +
                                  Real(u[id(i, j - 1)])) * invh2;
                acc += uy * uy + uyy * uyy;
            }
        }
        const Real inv4h2 = invh2 * Real(0.25);
        for (int j = 1; j <= g.ny - 2; ++j) {
            for (int i = 1; i <= g.nx - 2; ++i) {
                const Real uxy = (Real(u[id(i + 1, j + 1)]) - Real(u[id(i + 1, j - 1)]) -
                                  Real(u[id(i - 1, j + 1)]) + Real(u[id(i - 1, j - 1)])) * inv4h2;
                acc += uxy * uxy;
            }
        }
        return acc * h * h;
    };

    return jres + static_cast<Real>(alpha) * (h2norm2(r) + h2norm2(s));
}

}  // namespace eit::detail

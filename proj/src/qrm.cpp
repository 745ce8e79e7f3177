#include "eit/qrm.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "eit/detail/pcg.hpp"

namespace eit {

namespace {

// The free block of the residual operator V -> lap V - a V is symmetric
// (five-point Laplacian plus a diagonal), so the normal-equation matrix is
// its square. This helper applies the free block to a free-node vector.
struct QrmOperator {
    const Grid2D* grid = nullptr;
    const double* a = nullptr;
    std::vector<int> node;        // flat index per free unknown
    std::vector<int> free_index;  // flat index -> unknown or -1
    double invh2 = 0.0;

    explicit QrmOperator(const ScalarField& coeff) : grid(&coeff.grid), a(coeff.v.data()) {
        const Grid2D& g = *grid;
        if (g.nx < 7 || g.ny < 7) {
            throw std::invalid_argument("qrm grid too small: need at least 7 nodes per side");
        }
        invh2 = 1.0 / (g.h * g.h);
        free_index.assign(g.size(), -1);
        for (int j = 2; j <= g.ny - 3; ++j) {
            for (int i = 2; i <= g.nx - 3; ++i) {
                free_index[g.index(i, j)] = static_cast<int>(node.size());
                node.push_back(g.index(i, j));
            }
        }
    }

    int n() const { return static_cast<int>(node.size()); }

    // y = A x on the free block; entries of x at constrained nodes are 0.
    void apply(const std::vector<double>& x, std::vector<double>& y) const {
        const Grid2D& g = *grid;
        for (int k = 0; k < n(); ++k) {
            const int p = node[k];
            double lap = -4.0 * x[k];
            const int nb[4] = {p + 1, p - 1, p + g.nx, p - g.nx};
            for (int q : nb) {
                const int f = free_index[q];
                if (f >= 0) lap += x[f];
            }
            y[k] = lap * invh2 - a[p] * x[k];
        }
    }

    // Residual of the affine problem at V = 1 + x: c_k = -a at free nodes
    // (the all-ones field is harmonic).
    void affine_part(std::vector<double>& c) const {
        c.resize(n());
        for (int k = 0; k < n(); ++k) c[k] = -a[node[k]];
    }

    // Diagonal of A^T A (column squared norms) for Jacobi preconditioning.
    void normal_diag(std::vector<double>& d) const {
        const Grid2D& g = *grid;
        d.resize(n());
        for (int k = 0; k < n(); ++k) {
            const int p = node[k];
            const double akk = -4.0 * invh2 - a[p];
            double acc = akk * akk;
            const int nb[4] = {p + 1, p - 1, p + g.nx, p - g.nx};
            for (int q : nb) {
                if (free_index[q] >= 0) acc += invh2 * invh2;
            }
            d[k] = acc;
        }
    }
};

void check_grids(const ScalarField& V, const ScalarField& a) {
    if (V.grid.nx != a.grid.nx || V.grid.ny != a.grid.ny) {
        throw std::invalid_argument("V and a must live on one grid");
    }
}

bool constrained(const Grid2D& g, int i, int j) {
    return i < 2 || j < 2 || i > g.nx - 3 || j > g.ny - 3;
}

}  // namespace

double eval_K(const ScalarField& V, const ScalarField& a, double ridge) {
    check_grids(V, a);
    const Grid2D& g = V.grid;
    if (g.nx < 7 || g.ny < 7) {
        throw std::invalid_argument("qrm grid too small: need at least 7 nodes per side");
    }
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            if (constrained(g, i, j) && std::abs(V.at(i, j) - 1.0) > 1e-9) {
                throw std::invalid_argument("qrm boundary conditions violated: V != 1 on the fixed layers");
            }
        }
    }
    const double invh2 = 1.0 / (g.h * g.h);
    double acc = 0.0;
    for (int j = 2; j <= g.ny - 3; ++j) {
        for (int i = 2; i <= g.nx - 3; ++i) {
            const int c = g.index(i, j);
            const double lap = (V.v[c + 1] + V.v[c - 1] + V.v[c + g.nx] + V.v[c - g.nx] -
                                4.0 * V.v[c]) * invh2;
            const double res = lap - a.v[c] * V.v[c];
            const double dev = V.v[c] - 1.0;
            acc += res * res + ridge * dev * dev;
        }
    }
    return acc * g.h * g.h;
}

QrmResult minimize_K(const ScalarField& a, const QrmOptions& opts) {
    QrmOperator op(a);
    const int n = op.n();
    std::vector<double> c;
    op.affine_part(c);

    // Normal equations (A^2 + ridge I) x = -A c for the free correction x.
    std::vector<double> b(n), tmp(n);
    for (int k = 0; k < n; ++k) tmp[k] = -c[k];
    op.apply(tmp, b);

    std::vector<double> diag;
    op.normal_diag(diag);
    std::vector<double> inv_diag(n);
    for (int k = 0; k < n; ++k) inv_diag[k] = 1.0 / (diag[k] + opts.ridge);

    std::vector<double> mid(n);
    auto normal_apply = [&](const std::vector<double>& x, std::vector<double>& y) {
        op.apply(x, mid);
        op.apply(mid, y);
        if (opts.ridge != 0.0) {
            for (int k = 0; k < n; ++k) y[k] += opts.ridge * x[k];
        }
    };

    // The CG residual b - (A^2 + ridge) x equals -grad K / (2 h^2), so an
    // absolute gradient target converts into an equivalent relative one.
    double tol = opts.rel_tol;
    if (opts.grad_tol > 0.0) {
        double bn = 0.0;
        for (int k = 0; k < n; ++k) bn += b[k] * b[k];
        bn = std::sqrt(bn);
        const double h2g = a.grid.h * a.grid.h;
        if (bn > 0.0) tol = std::max(tol, opts.grad_tol / (2.0 * h2g * bn));
    }

    std::vector<double> x(n, 0.0);
    detail::PcgResult pr = detail::pcg_solve(normal_apply, inv_diag, b, x,
                                             tol, opts.max_iters);

    QrmResult out;
    out.V = ScalarField(a.grid, 1.0);
    for (int k = 0; k < n; ++k) out.V.v[op.node[k]] += x[k];
    out.iterations = pr.iterations;
    out.converged = pr.converged;
    out.k_value = eval_K(out.V, a, opts.ridge);

    // |grad K|: 2 h^2 (A(Ax + c) + ridge x).
    std::vector<double> res(n), grad(n);
    op.apply(x, res);
    for (int k = 0; k < n; ++k) res[k] += c[k];
    op.apply(res, grad);
    double g2 = 0.0;
    const double h2 = a.grid.h * a.grid.h;
    for (int k = 0; k < n; ++k) {
        const double e = 2.0 * h2 * (grad[k] + opts.ridge * x[k]);
        g2 += e * e;
    }
    out.grad_norm = std::sqrt(g2);
    if (opts.grad_tol > 0.0 && out.grad_norm < opts.grad_tol) out.converged = true;
    return out;
}

ScalarField sigma_from_V(const ScalarField& V) {
    ScalarField s(V.grid, 0.0);
    for (std::size_t k = 0; k < V.v.size(); ++k) s.v[k] = V.v[k] * V.v[k];
    return s;
}

}  // namespace eit

#include "eit/convexify.hpp"

#include <cmath>
#include <cstring>
#include <deque>
#include <numbers>
#include <stdexcept>

#include "eit/detail/functional.hpp"

namespace eit {

namespace {

// Residual weight per grid column: sqrt(eps) * exp(2*lambda*x^2) * h^2.
// The weight depends on the first coordinate only.
std::vector<double> column_weights(const Grid2D& g, const ConvexParams& prm) {
    if (prm.lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");
    if (prm.alpha < 0.0) throw std::invalid_argument("alpha must be nonnegative");
    if (!(prm.eps > 0.0)) throw std::invalid_argument("eps must be positive");
    const double xm = std::max(std::abs(g.x(0)), std::abs(g.x(g.nx - 1)));
    if (2.0 * prm.lambda * xm * xm > 700.0) {
        throw std::invalid_argument("carleman weight exp(2*lambda*x^2) overflows; reduce lambda");
    }
    std::vector<double> c(g.nx);
    const double base = std::sqrt(prm.eps) * g.h * g.h;
    for (int i = 0; i < g.nx; ++i) {
        const double x = g.x(i);
        c[i] = base * std::exp(2.0 * prm.lambda * x * x);
    }
    return c;
}

void check_pair(const PairField& p, const ConvexParams& prm) {
    if (p.grid.nx < 5 || p.grid.ny < 5) {
        throw std::invalid_argument("pair field grid too small");
    }
    if (p.eps != prm.eps) {
        throw std::invalid_argument("params.eps does not match the pair field");
    }
}

// One fused sweep over the free nodes: residual part of J and, when grads
// are given, the exact scatter of its derivatives into full-grid arrays.
//
// The per-node kernel runs in long double. The stencils cancel values of
// size 1/h^2 down to near-zero residuals, and the Carleman column weights
// amplify the lost digits by up to ~1e10: in plain double the gradient
// near Gamma carries O(1) evaluation noise at convergence, which caps the
// reachable gradient norm far above the stopping thresholds used here.
// Extended precision in the kernel alone removes that floor; the scatter
// sums are benign and stay double.
// The state scalar XT is double on the public evaluation paths and long
// double inside the Newton iteration, where the iterate itself has to be
// finer than the double lattice (see minimize_single_phi).
template <class XT>
long double residual_sweep_core(const Grid2D& g, const XT* r, const XT* s, double eps,
                                const std::vector<double>& ci,
                                std::vector<double>* grad_r,
                                std::vector<double>* grad_s) {
    const double invh = 1.0 / g.h;
    const long double inv2h = 0.5L / g.h;
    const double invh2 = invh * invh;
    const long double inve = 1.0L / eps;
    long double acc = 0.0L;
    for (int j = 1; j <= g.ny - 2; ++j) {
        for (int i = 1; i <= g.nx - 3; ++i) {
            const int c = g.index(i, j);
            const int e = c + 1, w = c - 1, n = c + g.nx, b = c - g.nx;
            const long double rx = (static_cast<long double>(r[e]) - r[w]) * inv2h;
            const long double ry = (static_cast<long double>(r[n]) - r[b]) * inv2h;
            const long double sx = (static_cast<long double>(s[e]) - s[w]) * inv2h;
            const long double sy = (static_cast<long double>(s[n]) - s[b]) * inv2h;
            const long double lr =
                (static_cast<long double>(r[e]) + r[w] + r[n] + r[b] - 4.0L * r[c]) *
                invh2;
            const long double ls =
                (static_cast<long double>(s[e]) + s[w] + s[n] + s[b] - 4.0L * s[c]) *
                invh2;
            const long double tx = (rx - sx) * inve;
            const long double ty = (ry - sy) * inve;
            const long double dot = rx * tx + ry * ty;
            const long double l1 = lr + 2.0L * dot;
            const long double l2 = ls + 2.0L * dot;
            const double ck = ci[i];
            acc += ck * (l1 * l1 + l2 * l2);
            if (grad_r) {
                std::vector<double>& gr = *grad_r;
                std::vector<double>& gs = *grad_s;
                const double A = static_cast<double>(2.0L * ck * l1);
                const double B = static_cast<double>(2.0L * ck * l2);
                // d(2 dot)/d rx and -d(2 dot)/d sx, with the +-1/(2h)
                // scatter coefficients folded in
                const double cx = static_cast<double>((tx + rx * inve) * invh);
                const double cy = static_cast<double>((ty + ry * inve) * invh);
                const double dx = static_cast<double>(rx * inve * invh);
                const double dy = static_cast<double>(ry * inve * invh);
                gr[e] += A * (invh2 + cx) + B * cx;
                gr[w] += A * (invh2 - cx) - B * cx;
                gr[n] += A * (invh2 + cy) + B * cy;
                gr[b] += A * (invh2 - cy) - B * cy;
                gr[c] -= 4.0 * invh2 * A;
                gs[e] += B * (invh2 - dx) - A * dx;
                gs[w] += B * (invh2 + dx) + A * dx;
                gs[n] += B * (invh2 - dy) - A * dy;
                gs[b] += B * (invh2 + dy) + A * dy;
                gs[c] -= 4.0 * invh2 * B;
            }
        }
    }
    return acc;
}

double residual_sweep(const PairField& p, const std::vector<double>& ci,
                      std::vector<double>* grad_r, std::vector<double>* grad_s) {
    return static_cast<double>(
        residual_sweep_core(p.grid, p.r.data(), p.s.data(), p.eps, ci, grad_r, grad_s));
}

// Gauss-Newton diagonal of the residual term, scattered like the gradient
// but with squared stencil coefficients.
void residual_diag(const PairField& p, const std::vector<double>& ci,
                   std::vector<double>& dr, std::vector<double>& ds) {
    const Grid2D& g = p.grid;
    const double* r = p.r.data();
    const double* s = p.s.data();
    const double invh = 1.0 / g.h;
    const double inv2h = 0.5 * invh;
    const double invh2 = invh * invh;
    const double inve = 1.0 / p.eps;
    auto sq = [](double v) { return v * v; };
    for (int j = 1; j <= g.ny - 2; ++j) {
        for (int i = 1; i <= g.nx - 3; ++i) {
            const int c = g.index(i, j);
            const int e = c + 1, w = c - 1, n = c + g.nx, b = c - g.nx;
            const double rx = (r[e] - r[w]) * inv2h;
            const double ry = (r[n] - r[b]) * inv2h;
            const double sx = (s[e] - s[w]) * inv2h;
            const double sy = (s[n] - s[b]) * inv2h;
            const double tx = (rx - sx) * inve;
            const double ty = (ry - sy) * inve;
            const double cx = (tx + rx * inve) * invh;
            const double cy = (ty + ry * inve) * invh;
            const double dx = rx * inve * invh;
            const double dy = ry * inve * invh;
            const double tk = 2.0 * ci[i];
            dr[e] += tk * (sq(invh2 + cx) + sq(cx));
            dr[w] += tk * (sq(invh2 - cx) + sq(cx));
            dr[n] += tk * (sq(invh2 + cy) + sq(cy));
            dr[b] += tk * (sq(invh2 - cy) + sq(cy));
            dr[c] += tk * sq(4.0 * invh2);
            ds[e] += tk * (sq(dx) + sq(invh2 - dx));
            ds[w] += tk * (sq(dx) + sq(invh2 + dx));
            ds[n] += tk * (sq(dy) + sq(invh2 - dy));
            ds[b] += tk * (sq(dy) + sq(invh2 + dy));
            ds[c] += tk * sq(4.0 * invh2);
        }
    }
}

// Gradient of alpha * |u|_H2^2 scattered into out; the same loops with
// squared coefficients accumulate the exact Hessian diagonal into diag.
void h2_accumulate(const Grid2D& g, const std::vector<double>& u, double alpha,
                   std::vector<double>* out, std::vector<double>* diag) {
    const double h2 = g.h * g.h;
    const double scale = 2.0 * alpha * h2;
    const double invh = 1.0 / g.h;
    const double inv2h = 0.5 * invh;
    const double invh2 = invh * invh;
    const double inv4h2 = 0.25 * invh2;
    auto id = [&](int i, int j) { return j * g.nx + i; };
    for (int m = 0; m < g.size(); ++m) {
        if (out) (*out)[m] += scale * u[m];
        if (diag) (*diag)[m] += scale;
    }
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 1; i <= g.nx - 2; ++i) {
            const int e = id(i + 1, j), w = id(i - 1, j), c = id(i, j);
            if (out) {
                const double ux = (u[e] - u[w]) * inv2h;
                const double uxx = (u[e] - 2.0 * u[c] + u[w]) * invh2;
                (*out)[e] += scale * (ux * inv2h + uxx * invh2);
                (*out)[w] += scale * (-ux * inv2h + uxx * invh2);
                (*out)[c] += scale * (-2.0 * invh2) * uxx;
            }
            if (diag) {
                (*diag)[e] += scale * (inv2h * inv2h + invh2 * invh2);
                (*diag)[w] += scale * (inv2h * inv2h + invh2 * invh2);
                (*diag)[c] += scale * (4.0 * invh2 * invh2);
            }
        }
    }
    for (int j = 1; j <= g.ny - 2; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const int n = id(i, j + 1), b = id(i, j - 1), c = id(i, j);
            if (out) {
                const double uy = (u[n] - u[b]) * inv2h;
                const double uyy = (u[n] - 2.0 * u[c] + u[b]) * invh2;
                (*out)[n] += scale * (uy * inv2h + uyy * invh2);
                (*out)[b] += scale * (-uy * inv2h + uyy * invh2);
                (*out)[c] += scale * (-2.0 * invh2) * uyy;
            }
            if (diag) {
                (*diag)[n] += scale * (inv2h * inv2h + invh2 * invh2);
                (*diag)[b] += scale * (inv2h * inv2h + invh2 * invh2);
                (*diag)[c] += scale * (4.0 * invh2 * invh2);
            }
        }
    }
    for (int j = 1; j <= g.ny - 2; ++j) {
        for (int i = 1; i <= g.nx - 2; ++i) {
            const int ne = id(i + 1, j + 1), se = id(i + 1, j - 1);
            const int nw = id(i - 1, j + 1), sw = id(i - 1, j - 1);
            if (out) {
                const double uxy = (u[ne] - u[se] - u[nw] + u[sw]) * inv4h2;
                (*out)[ne] += scale * uxy * inv4h2;
                (*out)[se] -= scale * uxy * inv4h2;
                (*out)[nw] -= scale * uxy * inv4h2;
                (*out)[sw] += scale * uxy * inv4h2;
            }
            if (diag) {
                (*diag)[ne] += scale * inv4h2 * inv4h2;
                (*diag)[se] += scale * inv4h2 * inv4h2;
                (*diag)[nw] += scale * inv4h2 * inv4h2;
                (*diag)[sw] += scale * inv4h2 * inv4h2;
            }
        }
    }
}

void pack_free(const Grid2D& g, const std::vector<double>& full_r,
               const std::vector<double>& full_s, std::vector<double>& x) {
    const int nf = (g.nx - 3) * (g.ny - 2);
    x.resize(2 * static_cast<std::size_t>(nf));
    std::size_t k = 0;
    for (int j = 1; j <= g.ny - 2; ++j)
        for (int i = 1; i <= g.nx - 3; ++i) x[k++] = full_r[g.index(i, j)];
    for (int j = 1; j <= g.ny - 2; ++j)
        for (int i = 1; i <= g.nx - 3; ++i) x[k++] = full_s[g.index(i, j)];
}

// Symmetric band storage for the exact Hessian over the free unknowns in
// the interleaved order 2 * (free rank of the node) + field. Every
// coupling of J reaches at most two grid steps, so the half bandwidth is
// 4*(nx-3)+5 and a banded Cholesky factors the Newton system in
// O(n * kd^2) time and O(n * kd) memory.
struct BandMatrix {
    int n = 0;   // order
    int kd = 0;  // subdiagonal count
    int ld = 0;  // column stride, kd + 1
    std::vector<double> a;  // a[col*ld + row - col] for col <= row <= col+kd

    void init(int order, int band) {
        n = order;
        kd = std::min(band, order - 1);
        ld = kd + 1;
        a.assign(static_cast<std::size_t>(n) * ld, 0.0);
    }
    void add(int p, int q, double v) {
        if (p < q) std::swap(p, q);
        a[static_cast<std::size_t>(q) * ld + p - q] += v;
    }
};

// Free rank of every node, -1 for ring and Neumann-layer nodes; the rank
// order matches pack_free within one field.
std::vector<int> free_slots(const Grid2D& g) {
    std::vector<int> slot(g.size(), -1);
    int k = 0;
    for (int j = 1; j <= g.ny - 2; ++j)
        for (int i = 1; i <= g.nx - 3; ++i) slot[g.index(i, j)] = k++;
    return slot;
}

// Exact Hessian of J at p. Per residual column the contribution is
// 2*ck*(g1 g1^T + g2 g2^T) from the squared residuals plus the constant
// curvature of the cross term 2 grad r . grad((r-s)/eps) scaled by
// 2*ck*(L1+L2); the regularizer adds outer products of its difference
// stencils. Pinned nodes are constants and simply drop out.
BandMatrix assemble_hessian(const PairField& p, const ConvexParams& prm,
                            const std::vector<double>& ci, const std::vector<int>& slot) {
    const Grid2D& g = p.grid;
    const int nfree = (g.nx - 3) * (g.ny - 2);
    BandMatrix H;
    H.init(2 * nfree, 4 * (g.nx - 3) + 5);
    const double* r = p.r.data();
    const double* s = p.s.data();
    const double invh = 1.0 / g.h;
    const double inv2h = 0.5 * invh;
    const double invh2 = invh * invh;
    const double inve = 1.0 / p.eps;

    int uidx[10];
    double u1[10], u2[10];
    for (int j = 1; j <= g.ny - 2; ++j) {
        for (int i = 1; i <= g.nx - 3; ++i) {
            const int c = g.index(i, j);
            const int e = c + 1, w = c - 1, n = c + g.nx, b = c - g.nx;
            const double rx = (r[e] - r[w]) * inv2h;
            const double ry = (r[n] - r[b]) * inv2h;
            const double sx = (s[e] - s[w]) * inv2h;
            const double sy = (s[n] - s[b]) * inv2h;
            const double lr = (r[e] + r[w] + r[n] + r[b] - 4.0 * r[c]) * invh2;
            const double ls = (s[e] + s[w] + s[n] + s[b] - 4.0 * s[c]) * invh2;
            const double tx = (rx - sx) * inve;
            const double ty = (ry - sy) * inve;
            const double dot = rx * tx + ry * ty;
            const double l1 = lr + 2.0 * dot;
            const double l2 = ls + 2.0 * dot;
            const double ck = ci[i];
            const double cx = (tx + rx * inve) * invh;
            const double cy = (ty + ry * inve) * invh;
            const double dx = rx * inve * invh;
            const double dy = ry * inve * invh;

            const int nodes[5] = {c, e, w, n, b};
            const double g1r[5] = {-4.0 * invh2, invh2 + cx, invh2 - cx,
                                   invh2 + cy, invh2 - cy};
            const double g1s[5] = {0.0, -dx, dx, -dy, dy};
            const double g2r[5] = {0.0, cx, -cx, cy, -cy};
            const double g2s[5] = {-4.0 * invh2, invh2 - dx, invh2 + dx,
                                   invh2 - dy, invh2 + dy};
            int cnt = 0;
            for (int t = 0; t < 5; ++t) {
                const int sl = slot[nodes[t]];
                if (sl < 0) continue;
                uidx[cnt] = 2 * sl;
                u1[cnt] = g1r[t];
                u2[cnt] = g2r[t];
                ++cnt;
                uidx[cnt] = 2 * sl + 1;
                u1[cnt] = g1s[t];
                u2[cnt] = g2s[t];
                ++cnt;
            }
            const double tk = 2.0 * ck;
            for (int a = 0; a < cnt; ++a) {
                for (int b2 = 0; b2 <= a; ++b2) {
                    H.add(uidx[a], uidx[b2], tk * (u1[a] * u1[b2] + u2[a] * u2[b2]));
                }
            }

            // d2(2 dot)/d rx^2 = 4/eps and d2(2 dot)/d rx d sx = -2/eps,
            // chained through the +-1/(2h) difference coefficients
            const double f = tk * (l1 + l2);
            const double frr = f * inve * invh2;
            const double frs = 0.5 * f * inve * invh2;
            const int re = slot[e] < 0 ? -1 : 2 * slot[e];
            const int rw = slot[w] < 0 ? -1 : 2 * slot[w];
            const int rn = slot[n] < 0 ? -1 : 2 * slot[n];
            const int rb = slot[b] < 0 ? -1 : 2 * slot[b];
            const int se = slot[e] < 0 ? -1 : 2 * slot[e] + 1;
            const int sw = slot[w] < 0 ? -1 : 2 * slot[w] + 1;
            const int sn = slot[n] < 0 ? -1 : 2 * slot[n] + 1;
            const int sb = slot[b] < 0 ? -1 : 2 * slot[b] + 1;
            auto addp = [&](int pq, int qq, double v) {
                if (pq >= 0 && qq >= 0) H.add(pq, qq, v);
            };
            addp(re, re, frr);
            addp(rw, rw, frr);
            addp(re, rw, -frr);
            addp(rn, rn, frr);
            addp(rb, rb, frr);
            addp(rn, rb, -frr);
            addp(re, se, -frs);
            addp(re, sw, frs);
            addp(rw, se, frs);
            addp(rw, sw, -frs);
            addp(rn, sn, -frs);
            addp(rn, sb, frs);
            addp(rb, sn, frs);
            addp(rb, sb, -frs);
        }
    }

    // regularizer: same stencil instances as h2_accumulate, one outer
    // product per instance and field
    const double scale = 2.0 * prm.alpha * g.h * g.h;
    const double inv4h2 = 0.25 * invh2;
    auto id = [&](int i, int j) { return j * g.nx + i; };
    auto outer = [&](const int* nds, const double* cf, int cnt, int field) {
        for (int a = 0; a < cnt; ++a) {
            const int sa = slot[nds[a]];
            if (sa < 0) continue;
            for (int b2 = 0; b2 <= a; ++b2) {
                const int sb = slot[nds[b2]];
                if (sb < 0) continue;
                H.add(2 * sa + field, 2 * sb + field, scale * cf[a] * cf[b2]);
            }
        }
    };
    for (int k = 0; k < nfree; ++k) {
        H.add(2 * k, 2 * k, scale);
        H.add(2 * k + 1, 2 * k + 1, scale);
    }
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 1; i <= g.nx - 2; ++i) {
            const int nds2[2] = {id(i + 1, j), id(i - 1, j)};
            const double cf2[2] = {inv2h, -inv2h};
            const int nds3[3] = {id(i + 1, j), id(i - 1, j), id(i, j)};
            const double cf3[3] = {invh2, invh2, -2.0 * invh2};
            for (int field = 0; field < 2; ++field) {
                outer(nds2, cf2, 2, field);
                outer(nds3, cf3, 3, field);
            }
        }
    }
    for (int j = 1; j <= g.ny - 2; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const int nds2[2] = {id(i, j + 1), id(i, j - 1)};
            const double cf2[2] = {inv2h, -inv2h};
            const int nds3[3] = {id(i, j + 1), id(i, j - 1), id(i, j)};
            const double cf3[3] = {invh2, invh2, -2.0 * invh2};
            for (int field = 0; field < 2; ++field) {
                outer(nds2, cf2, 2, field);
                outer(nds3, cf3, 3, field);
            }
        }
    }
    for (int j = 1; j <= g.ny - 2; ++j) {
        for (int i = 1; i <= g.nx - 2; ++i) {
            const int nds4[4] = {id(i + 1, j + 1), id(i + 1, j - 1), id(i - 1, j + 1),
                                 id(i - 1, j - 1)};
            const double cf4[4] = {inv4h2, -inv4h2, -inv4h2, inv4h2};
            for (int field = 0; field < 2; ++field) outer(nds4, cf4, 4, field);
        }
    }
    return H;
}

// In-place lower Cholesky of a positive definite band; false on a
// nonpositive pivot (the caller escalates a Levenberg shift then). The
// right-looking order keeps the trailing update on unit strides.
bool band_cholesky(BandMatrix& m) {
    const int n = m.n, kd = m.kd, ld = m.ld;
    double* a = m.a.data();
    for (int j = 0; j < n; ++j) {
        double* colj = a + static_cast<std::size_t>(j) * ld;
        const double ajj = colj[0];
        if (!(ajj > 0.0)) return false;
        const double root = std::sqrt(ajj);
        colj[0] = root;
        const double inv = 1.0 / root;
        const int len = std::min(n - 1, j + kd) - j;
        for (int i = 1; i <= len; ++i) colj[i] *= inv;
        for (int l = 1; l <= len; ++l) {
            const double ljl = colj[l];
            if (ljl == 0.0) continue;
            double* coll = a + static_cast<std::size_t>(j + l) * ld;
            const double* src = colj + l;
            const int rem = len - l;
            for (int t = 0; t <= rem; ++t) coll[t] -= src[t] * ljl;
        }
    }
    return true;
}

// Solves L L^T x = b in place using a factored band.
void band_solve(const BandMatrix& m, std::vector<double>& b) {
    const int n = m.n, kd = m.kd, ld = m.ld;
    const double* a = m.a.data();
    for (int i = 0; i < n; ++i) {
        double v = b[i];
        const int k0 = std::max(0, i - kd);
        for (int k = k0; k < i; ++k) {
            v -= a[static_cast<std::size_t>(k) * ld + i - k] * b[k];
        }
        b[i] = v / a[static_cast<std::size_t>(i) * ld];
    }
    for (int i = n - 1; i >= 0; --i) {
        double v = b[i];
        const int kmax = std::min(n - 1, i + kd);
        for (int k = i + 1; k <= kmax; ++k) {
            v -= a[static_cast<std::size_t>(i) * ld + k - i] * b[k];
        }
        b[i] = v / a[static_cast<std::size_t>(i) * ld];
    }
}

void band_multiply(const BandMatrix& m, const std::vector<double>& v,
                   std::vector<double>& out) {
    out.assign(m.n, 0.0);
    for (int j = 0; j < m.n; ++j) {
        const std::size_t base = static_cast<std::size_t>(j) * m.ld;
        out[j] += m.a[base] * v[j];
        const int imax = std::min(m.n - 1, j + m.kd);
        for (int i = j + 1; i <= imax; ++i) {
            const double aij = m.a[base + i - j];
            out[i] += aij * v[j];
            out[j] += aij * v[i];
        }
    }
}

}  // namespace

void PairField::apply_constraints() {
    const std::vector<int> ring = boundary_nodes(grid);
    if (bc.r_dir.size() != ring.size() || bc.q_dir.size() != ring.size() ||
        bc.r_neu.size() != static_cast<std::size_t>(grid.ny - 2) ||
        bc.q_neu.size() != static_cast<std::size_t>(grid.ny - 2)) {
        throw std::invalid_argument("boundary data sizes do not match the grid");
    }
    for (std::size_t k = 0; k < ring.size(); ++k) {
        r[ring[k]] = bc.r_dir[k];
        s[ring[k]] = bc.q_dir[k];
    }
    // One-sided difference pins the layer next to Gamma:
    // (value(Gamma) - value(layer)) / h = Neumann datum.
    for (int j = 1; j <= grid.ny - 2; ++j) {
        const int gnode = grid.index(grid.nx - 1, j);
        const int lnode = grid.index(grid.nx - 2, j);
        r[lnode] = r[gnode] - grid.h * bc.r_neu[j - 1];
        s[lnode] = s[gnode] - grid.h * bc.q_neu[j - 1];
    }
}

void PairField::pack(std::vector<double>& x) const { pack_free(grid, r, s, x); }

void PairField::unpack(const std::vector<double>& x) {
    const int nf = n_free();
    if (x.size() != 2 * static_cast<std::size_t>(nf)) {
        throw std::invalid_argument("packed vector has the wrong length");
    }
    std::size_t k = 0;
    for (int j = 1; j <= grid.ny - 2; ++j)
        for (int i = 1; i <= grid.nx - 3; ++i) r[grid.index(i, j)] = x[k++];
    for (int j = 1; j <= grid.ny - 2; ++j)
        for (int i = 1; i <= grid.nx - 3; ++i) s[grid.index(i, j)] = x[k++];
}

PairField make_pair_field(const Grid2D& grid, double eps, const PhiBoundaryData& bc) {
    if (grid.nx < 5 || grid.ny < 5) throw std::invalid_argument("pair field grid too small");
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
    PairField p;
    p.grid = grid;
    p.eps = eps;
    p.bc = bc;
    p.r.assign(grid.size(), 0.0);
    p.s.assign(grid.size(), 0.0);
    p.apply_constraints();
    return p;
}

PairField harmonic_start(const Grid2D& grid, double eps, const PhiBoundaryData& bc) {
    PairField p = make_pair_field(grid, eps, bc);
    // Dirichlet Laplace solve on the free box by conjugate gradients; the
    // pinned ring and Neumann-layer values act as boundary data.
    std::vector<int> free_idx;
    for (int j = 1; j <= grid.ny - 2; ++j)
        for (int i = 1; i <= grid.nx - 3; ++i) free_idx.push_back(grid.index(i, j));
    const std::size_t nf = free_idx.size();
    std::vector<int> slot(grid.size(), -1);
    for (std::size_t k = 0; k < nf; ++k) slot[free_idx[k]] = static_cast<int>(k);

    const int off[4] = {1, -1, grid.nx, -grid.nx};
    auto extend = [&](std::vector<double>& full) {
        std::vector<double> b(nf, 0.0), u(nf, 0.0);
        for (std::size_t k = 0; k < nf; ++k) {
            for (int d : off) {
                const int nb = free_idx[k] + d;
                if (slot[nb] < 0) b[k] += full[nb];
            }
        }
        auto matvec = [&](const std::vector<double>& v, std::vector<double>& out) {
            for (std::size_t k = 0; k < nf; ++k) {
                double acc = 4.0 * v[k];
                for (int d : off) {
                    const int ns = slot[free_idx[k] + d];
                    if (ns >= 0) acc -= v[ns];
                }
                out[k] = acc;
            }
        };
        std::vector<double> res = b, dir = b, tmp(nf);
        double rr = 0.0, bb = 0.0;
        for (std::size_t k = 0; k < nf; ++k) {
            rr += res[k] * res[k];
            bb += b[k] * b[k];
        }
        const double stop = std::max(1e-24 * bb, 1e-300);
        for (std::size_t it = 0; it < 4 * nf && rr > stop; ++it) {
            matvec(dir, tmp);
            double dAd = 0.0;
            for (std::size_t k = 0; k < nf; ++k) dAd += dir[k] * tmp[k];
            if (!(dAd > 0.0)) break;
            const double step = rr / dAd;
            double rr_next = 0.0;
            for (std::size_t k = 0; k < nf; ++k) {
                u[k] += step * dir[k];
                res[k] -= step * tmp[k];
                rr_next += res[k] * res[k];
            }
            const double beta = rr_next / rr;
            rr = rr_next;
            for (std::size_t k = 0; k < nf; ++k) dir[k] = res[k] + beta * dir[k];
        }
        for (std::size_t k = 0; k < nf; ++k) full[free_idx[k]] = u[k];
    };
    extend(p.r);
    extend(p.s);
    return p;
}

ScalarField eval_L1(const PairField& p) {
    ScalarField out(p.grid, 0.0);
    const Grid2D& g = p.grid;
    const double inv2h = 0.5 / g.h, invh2 = 1.0 / (g.h * g.h), inve = 1.0 / p.eps;
    for (int j = 1; j <= g.ny - 2; ++j) {
        for (int i = 1; i <= g.nx - 3; ++i) {
            const int c = g.index(i, j), e = c + 1, w = c - 1, n = c + g.nx, b = c - g.nx;
            const double rx = (p.r[e] - p.r[w]) * inv2h, ry = (p.r[n] - p.r[b]) * inv2h;
            const double sx = (p.s[e] - p.s[w]) * inv2h, sy = (p.s[n] - p.s[b]) * inv2h;
            const double lr = (p.r[e] + p.r[w] + p.r[n] + p.r[b] - 4.0 * p.r[c]) * invh2;
            out.v[c] = lr + 2.0 * (rx * (rx - sx) + ry * (ry - sy)) * inve;
        }
    }
    return out;
}

ScalarField eval_L2(const PairField& p) {
    ScalarField out(p.grid, 0.0);
    const Grid2D& g = p.grid;
    const double inv2h = 0.5 / g.h, invh2 = 1.0 / (g.h * g.h), inve = 1.0 / p.eps;
    for (int j = 1; j <= g.ny - 2; ++j) {
        for (int i = 1; i <= g.nx - 3; ++i) {
            const int c = g.index(i, j), e = c + 1, w = c - 1, n = c + g.nx, b = c - g.nx;
            const double rx = (p.r[e] - p.r[w]) * inv2h, ry = (p.r[n] - p.r[b]) * inv2h;
            const double sx = (p.s[e] - p.s[w]) * inv2h, sy = (p.s[n] - p.s[b]) * inv2h;
            const double ls = (p.s[e] + p.s[w] + p.s[n] + p.s[b] - 4.0 * p.s[c]) * invh2;
            out.v[c] = ls + 2.0 * (rx * (rx - sx) + ry * (ry - sy)) * inve;
        }
    }
    return out;
}

double h2_norm2(const Grid2D& grid, const std::vector<double>& u) {
    if (u.size() != static_cast<std::size_t>(grid.size())) {
        throw std::invalid_argument("field size does not match the grid");
    }
    const double inv2h = 0.5 / grid.h, invh2 = 1.0 / (grid.h * grid.h);
    const double inv4h2 = 0.25 * invh2;
    auto id = [&](int i, int j) { return j * grid.nx + i; };
    double acc = 0.0;
    for (int m = 0; m < grid.size(); ++m) acc += u[m] * u[m];
    for (int j = 0; j < grid.ny; ++j) {
        for (int i = 1; i <= grid.nx - 2; ++i) {
            const double ux = (u[id(i + 1, j)] - u[id(i - 1, j)]) * inv2h;
            const double uxx =
                (u[id(i + 1, j)] - 2.0 * u[id(i, j)] + u[id(i - 1, j)]) * invh2;
            acc += ux * ux + uxx * uxx;
        }
    }
    for (int j = 1; j <= grid.ny - 2; ++j) {
        for (int i = 0; i < grid.nx; ++i) {
            const double uy = (u[id(i, j + 1)] - u[id(i, j - 1)]) * inv2h;
            const double uyy =
                (u[id(i, j + 1)] - 2.0 * u[id(i, j)] + u[id(i, j - 1)]) * invh2;
            acc += uy * uy + uyy * uyy;
        }
    }
    for (int j = 1; j <= grid.ny - 2; ++j) {
        for (int i = 1; i <= grid.nx - 2; ++i) {
            const double uxy = (u[id(i + 1, j + 1)] - u[id(i + 1, j - 1)] -
                                u[id(i - 1, j + 1)] + u[id(i - 1, j - 1)]) * inv4h2;
            acc += uxy * uxy;
        }
    }
    return acc * grid.h * grid.h;
}

double eval_J(const PairField& p, const ConvexParams& params) {
    check_pair(p, params);
    const std::vector<double> ci = column_weights(p.grid, params);
    const double jres = residual_sweep(p, ci, nullptr, nullptr);
    return jres + params.alpha * (h2_norm2(p.grid, p.r) + h2_norm2(p.grid, p.s));
}

std::vector<double> grad_J(const PairField& p, const ConvexParams& params) {
    check_pair(p, params);
    const std::vector<double> ci = column_weights(p.grid, params);
    std::vector<double> gr(p.grid.size(), 0.0), gs(p.grid.size(), 0.0);
    residual_sweep(p, ci, &gr, &gs);
    h2_accumulate(p.grid, p.r, params.alpha, &gr, nullptr);
    h2_accumulate(p.grid, p.s, params.alpha, &gs, nullptr);
    std::vector<double> out;
    pack_free(p.grid, gr, gs, out);
    return out;
}

std::vector<double> hessvec_J(const PairField& p, const ConvexParams& params,
                              const std::vector<double>& v) {
    check_pair(p, params);
    const int nf = p.n_free();
    if (v.size() != 2 * static_cast<std::size_t>(nf)) {
        throw std::invalid_argument("direction vector has the wrong length");
    }
    const std::vector<double> ci = column_weights(p.grid, params);
    const std::vector<int> slot = free_slots(p.grid);
    const BandMatrix H = assemble_hessian(p, params, ci, slot);
    std::vector<double> y(2 * static_cast<std::size_t>(nf)), hy;
    for (int k = 0; k < nf; ++k) {
        y[2 * k] = v[k];
        y[2 * k + 1] = v[nf + k];
    }
    band_multiply(H, y, hy);
    std::vector<double> out(2 * static_cast<std::size_t>(nf));
    for (int k = 0; k < nf; ++k) {
        out[k] = hy[2 * k];
        out[nf + k] = hy[2 * k + 1];
    }
    return out;
}

std::vector<double> scaling_diagonal(const PairField& p, const ConvexParams& params) {
    check_pair(p, params);
    const std::vector<double> ci = column_weights(p.grid, params);
    std::vector<double> dr(p.grid.size(), 0.0), ds(p.grid.size(), 0.0);
    residual_diag(p, ci, dr, ds);
    h2_accumulate(p.grid, p.r, params.alpha, nullptr, &dr);
    h2_accumulate(p.grid, p.s, params.alpha, nullptr, &ds);
    std::vector<double> out;
    pack_free(p.grid, dr, ds, out);
    return out;
}

ConvexityGap convexity_gap(const PairField& p1, const PairField& p2,
                           const ConvexParams& params) {
    if (p1.grid.nx != p2.grid.nx || p1.grid.ny != p2.grid.ny || p1.eps != p2.eps) {
        throw std::invalid_argument("convexity probe needs states on one grid with one eps");
    }
    const Grid2D& g = p1.grid;
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            if (p1.is_free(i, j)) continue;
            const int m = g.index(i, j);
            if (std::abs(p1.r[m] - p2.r[m]) > 1e-12 || std::abs(p1.s[m] - p2.s[m]) > 1e-12) {
                throw std::invalid_argument("convexity probe needs shared boundary data");
            }
        }
    }
    const double j1 = eval_J(p1, params);
    const double j2 = eval_J(p2, params);
    std::vector<double> g1 = grad_J(p1, params);
    std::vector<double> x1, x2;
    p1.pack(x1);
    p2.pack(x2);
    double lin = 0.0;
    for (std::size_t k = 0; k < g1.size(); ++k) lin += g1[k] * (x2[k] - x1[k]);
    std::vector<double> dr(g.size()), ds(g.size());
    for (int m = 0; m < g.size(); ++m) {
        dr[m] = p2.r[m] - p1.r[m];
        ds[m] = p2.s[m] - p1.s[m];
    }
    ConvexityGap out;
    out.gap = j2 - j1 - lin;
    out.h2_diff2 = h2_norm2(g, dr) + h2_norm2(g, ds);
    return out;
}

MinimizeResult minimize_single_phi(const PairField& start, const ConvexParams& params,
                                   const MinimizeOptions& opts) {
    check_pair(start, params);
    MinimizeResult res;
    res.pair = start;
    res.pair.apply_constraints();
    const std::vector<double> ci = column_weights(start.grid, params);

    PairField& cur = res.pair;
    PairField trial = cur;
    std::vector<double> x, xt;
    cur.pack(x);
    const std::size_t n = x.size();

    auto value = [&](const std::vector<double>& state) {
        trial.unpack(state);
        const double jres = residual_sweep(trial, ci, nullptr, nullptr);
        return jres + params.alpha * (h2_norm2(trial.grid, trial.r) +
                                      h2_norm2(trial.grid, trial.s));
    };
    auto value_and_grad = [&](const std::vector<double>& state, std::vector<double>& grad) {
        cur.unpack(state);
        std::vector<double> gr(cur.grid.size(), 0.0), gs(cur.grid.size(), 0.0);
        const double jres = residual_sweep(cur, ci, &gr, &gs);
        h2_accumulate(cur.grid, cur.r, params.alpha, &gr, nullptr);
        h2_accumulate(cur.grid, cur.s, params.alpha, &gs, nullptr);
        pack_free(cur.grid, gr, gs, grad);
        return jres + params.alpha * (h2_norm2(cur.grid, cur.r) + h2_norm2(cur.grid, cur.s));
    };
    auto norm2 = [](const std::vector<double>& v) {
        double a = 0.0;
        for (double e : v) a += e * e;
        return std::sqrt(a);
    };

    std::vector<double> g;
    double J = value_and_grad(x, g);
    double gnorm = norm2(g);
    if (opts.record_trace) {
        res.j_trace.push_back(J);
        res.grad_trace.push_back(gnorm);
    }

    if (opts.method == MinimizeOptions::Method::GradientDescent) {
        double gamma = opts.gamma;
        for (int it = 0; it < opts.max_iters; ++it) {
            if (gnorm < opts.grad_tol) {
                res.converged = true;
                break;
            }
            bool accepted = false;
            while (gamma > 1e-20) {
                xt = x;
                for (std::size_t k = 0; k < n; ++k) xt[k] -= gamma * g[k];
                const double Jt = value(xt);
                if (Jt <= J) {
                    accepted = true;
                    break;
                }
                gamma *= 0.5;
            }
            if (!accepted) break;  // step underflow; J cannot decrease further
            x.swap(xt);
            J = value_and_grad(x, g);
            gnorm = norm2(g);
            res.iterations = it + 1;
            if (opts.record_trace) {
                res.j_trace.push_back(J);
                res.grad_trace.push_back(gnorm);
            }
        }
        if (gnorm < opts.grad_tol) res.converged = true;
        cur.unpack(x);
        return res;
    }

    if (opts.method == MinimizeOptions::Method::Newton) {
        // Damped Newton with the exact sparse Hessian: assemble, factor
        // with a banded Cholesky, solve for the step, backtrack. When a
        // factorization hits a nonpositive pivot outside the convexity
        // region, a Levenberg shift of the scaling diagonal is escalated
        // until it succeeds.
        //
        // The iterate lives in long double. Hessian diagonals near the
        // Neumann edge reach ~1e16 at production parameters, so moving one
        // node of a double state by a single ulp already shifts the
        // gradient by O(0.1): no double state with a small gradient norm
        // exists, and any update scheme stalls around |grad J| ~ 1.
        // Extended state precision lowers that representability floor to
        // ~1e-4. Only the residual kernel reads the long double arrays;
        // the Hessian and the regularizer see the rounded state, whose
        // error is orders of magnitude below what Newton needs from them.
        //
        // Near the minimizer the J-based line search also goes blind: the
        // predicted decrease of a step falls below what two J evaluations
        // can resolve. Once that happens, steps are accepted by
        // gradient-norm descent instead (never letting the measured J
        // increase), which stays informative far below the J floor.
        const std::vector<int> slot = free_slots(cur.grid);
        const int nf = cur.n_free();
        const int sz = cur.grid.size();
        std::vector<int> cells(nf);  // packed slot -> cell, pack_free order
        for (int c = 0; c < sz; ++c) {
            if (slot[c] >= 0) cells[slot[c]] = c;
        }
        std::vector<long double> rl(cur.r.begin(), cur.r.end());
        std::vector<long double> sl(cur.s.begin(), cur.s.end());
        std::vector<long double> rt(rl), st(sl);
        std::vector<double> gr(sz), gs(sz);
        std::vector<double> rhs(n), d(n), gt(n);
        auto ld_value_grad = [&](const std::vector<long double>& rr,
                                 const std::vector<long double>& ss,
                                 std::vector<double>& grad) -> long double {
            std::fill(gr.begin(), gr.end(), 0.0);
            std::fill(gs.begin(), gs.end(), 0.0);
            const long double jres = residual_sweep_core(cur.grid, rr.data(), ss.data(),
                                                         cur.eps, ci, &gr, &gs);
            for (int c = 0; c < sz; ++c) {
                trial.r[c] = static_cast<double>(rr[c]);
                trial.s[c] = static_cast<double>(ss[c]);
            }
            h2_accumulate(trial.grid, trial.r, params.alpha, &gr, nullptr);
            h2_accumulate(trial.grid, trial.s, params.alpha, &gs, nullptr);
            pack_free(trial.grid, gr, gs, grad);
            return jres + params.alpha * (h2_norm2(trial.grid, trial.r) +
                                          h2_norm2(trial.grid, trial.s));
        };
        long double Jl = ld_value_grad(rl, sl, g);
        gnorm = norm2(g);
        bool polish = false;
        for (int it = 0; it < opts.max_iters; ++it) {
            if (gnorm < opts.grad_tol) {
                res.converged = true;
                break;
            }
            for (int c = 0; c < sz; ++c) {
                cur.r[c] = static_cast<double>(rl[c]);
                cur.s[c] = static_cast<double>(sl[c]);
            }
            BandMatrix H0 = assemble_hessian(cur, params, ci, slot);
            const std::vector<double> diag = scaling_diagonal(cur, params);
            // Jacobi-scale the system to unit diagonal before factoring.
            // The raw diagonal spans ~20 decades (regularizer rows vs
            // Carleman-weighted rows near the Neumann edge), so a direct
            // factorization would lose the soft directions to rounding and
            // the computed step would only be Newton in the stiff ones.
            std::vector<double> dsc(static_cast<std::size_t>(H0.n));
            for (int u = 0; u < H0.n; ++u) {
                const double duu = H0.a[static_cast<std::size_t>(u) * H0.ld];
                dsc[u] = 1.0 / std::sqrt(std::max(duu, 1e-300));
            }
            for (int q = 0; q < H0.n; ++q) {
                const int len = std::min(H0.kd, H0.n - 1 - q);
                double* col = &H0.a[static_cast<std::size_t>(q) * H0.ld];
                for (int off = 0; off <= len; ++off) col[off] *= dsc[q] * dsc[q + off];
            }
            for (int k = 0; k < nf; ++k) {
                rhs[2 * k] = -g[k] * dsc[2 * k];
                rhs[2 * k + 1] = -g[nf + k] * dsc[2 * k + 1];
            }
            bool solved = false;
            for (double mu = 0.0; mu <= 1e8; mu = (mu == 0.0 ? 1e-12 : mu * 100.0)) {
                BandMatrix hf = H0;
                if (mu > 0.0) {
                    for (int u = 0; u < hf.n; ++u)
                        hf.a[static_cast<std::size_t>(u) * hf.ld] += mu;
                }
                if (!band_cholesky(hf)) continue;
                std::vector<double> y = rhs;
                band_solve(hf, y);
                for (int k = 0; k < nf; ++k) {
                    d[k] = y[2 * k] * dsc[2 * k];
                    d[nf + k] = y[2 * k + 1] * dsc[2 * k + 1];
                }
                solved = true;
                break;
            }
            if (!solved) {
                for (std::size_t m = 0; m < n; ++m) d[m] = -g[m] / diag[m];
            }

            double gtd = 0.0;
            for (std::size_t m = 0; m < n; ++m) gtd += g[m] * d[m];
            if (!(gtd < 0.0)) {
                for (std::size_t m = 0; m < n; ++m) d[m] = -g[m] / diag[m];
                gtd = 0.0;
                for (std::size_t m = 0; m < n; ++m) gtd += g[m] * d[m];
            }
            if (-gtd < 1e-10 * (1.0 + std::abs(static_cast<double>(Jl)))) polish = true;

            bool accepted = false;
            for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
                double t = 1.0;
                for (int half = 0; half < 60; ++half) {
                    rt = rl;
                    st = sl;
                    for (int k = 0; k < nf; ++k) {
                        rt[cells[k]] += t * d[k];
                        st[cells[k]] += t * d[nf + k];
                    }
                    const long double Jt = ld_value_grad(rt, st, gt);
                    const double gtnorm = norm2(gt);
                    const bool ok = polish ? (gtnorm < gnorm && Jt <= Jl)
                                           : (Jt <= Jl + 1e-4L * t * gtd);
                    if (ok) {
                        accepted = true;
                        rl.swap(rt);
                        sl.swap(st);
                        g.swap(gt);
                        Jl = Jt;
                        gnorm = gtnorm;
                        break;
                    }
                    t *= 0.5;
                }
                if (!accepted) {
                    if (polish) break;  // stationary to rounding
                    polish = true;      // J cannot resolve the decrease anymore
                }
            }
            if (!accepted) break;

            res.iterations = it + 1;
            if (opts.record_trace) {
                res.j_trace.push_back(static_cast<double>(Jl));
                res.grad_trace.push_back(gnorm);
            }
        }
        if (gnorm < opts.grad_tol) res.converged = true;
        for (int c = 0; c < sz; ++c) {
            cur.r[c] = static_cast<double>(rl[c]);
            cur.s[c] = static_cast<double>(sl[c]);
        }
        return res;
    }

    // L-BFGS with the Gauss-Newton/regularization diagonal as the initial
    // metric and monotone Armijo backtracking.
    const int mem = std::max(1, opts.lbfgs_memory);
    std::deque<std::vector<double>> S, Y;
    std::deque<double> rho;
    std::vector<double> d(n), q(n), gnew(n), diag;

    for (int it = 0; it < opts.max_iters; ++it) {
        if (gnorm < opts.grad_tol) {
            res.converged = true;
            break;
        }
        diag = scaling_diagonal(cur, params);
        q = g;
        std::vector<double> alpha_hist(S.size());
        for (int k = static_cast<int>(S.size()) - 1; k >= 0; --k) {
            double sq = 0.0;
            for (std::size_t m = 0; m < n; ++m) sq += S[k][m] * q[m];
            alpha_hist[k] = rho[k] * sq;
            for (std::size_t m = 0; m < n; ++m) q[m] -= alpha_hist[k] * Y[k][m];
        }
        for (std::size_t m = 0; m < n; ++m) q[m] /= diag[m];
        for (std::size_t k = 0; k < S.size(); ++k) {
            double yq = 0.0;
            for (std::size_t m = 0; m < n; ++m) yq += Y[k][m] * q[m];
            const double beta = rho[k] * yq;
            for (std::size_t m = 0; m < n; ++m) q[m] += (alpha_hist[k] - beta) * S[k][m];
        }
        for (std::size_t m = 0; m < n; ++m) d[m] = -q[m];

        double gtd = 0.0;
        for (std::size_t m = 0; m < n; ++m) gtd += g[m] * d[m];
        if (!(gtd < 0.0)) {
            // not a descent direction (stale curvature); drop the memory
            S.clear();
            Y.clear();
            rho.clear();
            for (std::size_t m = 0; m < n; ++m) d[m] = -g[m] / diag[m];
            gtd = 0.0;
            for (std::size_t m = 0; m < n; ++m) gtd += g[m] * d[m];
        }

        double t = 1.0;
        bool accepted = false;
        double Jt = 0.0;
        for (int half = 0; half < 60; ++half) {
            xt = x;
            for (std::size_t m = 0; m < n; ++m) xt[m] += t * d[m];
            Jt = value(xt);
            if (Jt <= J + 1e-4 * t * gtd) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted && !S.empty()) {
            // retry as scaled steepest descent before giving up
            S.clear();
            Y.clear();
            rho.clear();
            for (std::size_t m = 0; m < n; ++m) d[m] = -g[m] / diag[m];
            gtd = 0.0;
            for (std::size_t m = 0; m < n; ++m) gtd += g[m] * d[m];
            t = 1.0;
            for (int half = 0; half < 60; ++half) {
                xt = x;
                for (std::size_t m = 0; m < n; ++m) xt[m] += t * d[m];
                Jt = value(xt);
                if (Jt <= J + 1e-4 * t * gtd) {
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
        }
        if (!accepted) break;  // line search exhausted; stationary to rounding

        J = value_and_grad(xt, gnew);
        std::vector<double> sk(n), yk(n);
        double ys = 0.0, yy = 0.0, ss = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            sk[m] = xt[m] - x[m];
            yk[m] = gnew[m] - g[m];
            ys += yk[m] * sk[m];
            yy += yk[m] * yk[m];
            ss += sk[m] * sk[m];
        }
        if (ys > 1e-12 * std::sqrt(yy * ss)) {
            S.push_back(std::move(sk));
            Y.push_back(std::move(yk));
            rho.push_back(1.0 / ys);
            if (static_cast<int>(S.size()) > mem) {
                S.pop_front();
                Y.pop_front();
                rho.pop_front();
            }
        }
        x = xt;
        g = gnew;
        gnorm = norm2(g);
        res.iterations = it + 1;
        if (opts.record_trace) {
            res.j_trace.push_back(J);
            res.grad_trace.push_back(gnorm);
        }
    }
    if (gnorm < opts.grad_tol) res.converged = true;
    cur.unpack(x);
    return res;
}

ScalarField recover_w(const PairField& p) {
    ScalarField w(p.grid, 0.0);
    const double inve = 1.0 / p.eps;
    for (int m = 0; m < p.grid.size(); ++m) w.v[m] = (p.r[m] - p.s[m]) * inve;
    return w;
}

ScalarField recover_a(const std::vector<ScalarField>& w, double h_phi) {
    if (w.empty()) throw std::invalid_argument("recover_a needs at least one field");
    if (!(h_phi > 0.0)) throw std::invalid_argument("h_phi must be positive");
    const Grid2D& g = w.front().grid;
    for (const ScalarField& f : w) {
        if (f.grid.nx != g.nx || f.grid.ny != g.ny) {
            throw std::invalid_argument("recover_a fields must share one grid");
        }
    }
    ScalarField a(g, 0.0);
    const double inv2h = 0.5 / g.h, invh2 = 1.0 / (g.h * g.h);
    const double scale = -h_phi / (2.0 * std::numbers::pi);
    for (int j = 1; j <= g.ny - 2; ++j) {
        for (int i = 1; i <= g.nx - 2; ++i) {
            const int c = g.index(i, j), e = c + 1, ww = c - 1, n = c + g.nx, b = c - g.nx;
            double acc = 0.0;
            for (const ScalarField& f : w) {
                const double wx = (f.v[e] - f.v[ww]) * inv2h;
                const double wy = (f.v[n] - f.v[b]) * inv2h;
                const double lw = (f.v[e] + f.v[ww] + f.v[n] + f.v[b] - 4.0 * f.v[c]) * invh2;
                acc += lw + wx * wx + wy * wy;
            }
            a.v[c] = scale * acc;
        }
    }
    return a;
}

}  // namespace eit

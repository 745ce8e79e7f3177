#include "eit/forward.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "eit/detail/pcg.hpp"

namespace eit {

namespace {

// Adaptive Simpson on [lo, hi]; fine for the smooth bump profile below.
template <class F>
double simpson_rec(const F& f, double lo, double hi, double flo, double fmid, double fhi,
                   double whole, double tol, int depth) {
    const double mid = 0.5 * (lo + hi);
    const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
    const double flm = f(lm), frm = f(rm);
    const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
    const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol) {
        return left + right + (left + right - whole) / 15.0;
    }
    return simpson_rec(f, lo, mid, flo, flm, fmid, left, 0.5 * tol, depth - 1) +
           simpson_rec(f, mid, hi, fmid, frm, fhi, right, 0.5 * tol, depth - 1);
}

template <class F>
double adaptive_simpson(const F& f, double lo, double hi, double tol) {
    const double mid = 0.5 * (lo + hi);
    const double flo = f(lo), fmid = f(mid), fhi = f(hi);
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    return simpson_rec(f, lo, hi, flo, fmid, fhi, whole, tol, 48);
}

// Radial profile of the unit bump in scaled coordinates u = r/rho. The
// plane integral of the bump is 2*pi*rho^2 * bump_moment, independent of
// rho, so the moment is computed once.
double bump_moment() {
    static const double m = adaptive_simpson(
        [](double u) {
            const double d = u * u - 1.0;
            return d < 0.0 ? u * std::exp(u * u / d) : 0.0;
        },
        0.0, 1.0, 1e-15);
    return m;
}

// Compressed five-point operator for -div(sigma grad u) on the interior
// nodes of the disk, built once per conductivity and reused across source
// positions. Face conductivities are arithmetic means; Dirichlet zero on
// the staircase boundary enters by dropping exterior neighbors.
struct DiskOperator {
    const MaskedGrid* disk = nullptr;
    std::vector<int> node;       // flat grid index per unknown
    std::vector<int> nbr;        // 4 entries per unknown, -1 = boundary
    std::vector<double> coef;    // 4 face conductivities per unknown
    std::vector<double> diag;    // sum of face conductivities
    std::vector<double> inv_diag;
    std::vector<int> unknown_of; // flat grid index -> unknown index or -1
    double inv_h2 = 0.0;

    DiskOperator(const MaskedGrid& d, const ScalarField& sigma) : disk(&d) {
        const Grid2D& g = d.grid;
        if (sigma.grid.nx != g.nx || sigma.grid.ny != g.ny) {
            throw std::invalid_argument("sigma is not defined on the disk grid");
        }
        inv_h2 = 1.0 / (g.h * g.h);
        unknown_of.assign(g.size(), -1);
        for (int j = 0; j < g.ny; ++j) {
            for (int i = 0; i < g.nx; ++i) {
                if (d.at(i, j) == NodeClass::Interior) {
                    unknown_of[g.index(i, j)] = static_cast<int>(node.size());
                    node.push_back(g.index(i, j));
                }
            }
        }
        const int n = static_cast<int>(node.size());
        nbr.assign(4 * static_cast<std::size_t>(n), -1);
        coef.assign(4 * static_cast<std::size_t>(n), 0.0);
        diag.assign(n, 0.0);
        inv_diag.assign(n, 0.0);
        const int step[4] = {1, -1, g.nx, -g.nx};
        for (int k = 0; k < n; ++k) {
            const int p = node[k];
            double dsum = 0.0;
            for (int dir = 0; dir < 4; ++dir) {
                const int q = p + step[dir];
                const double face = 0.5 * (sigma.v[p] + sigma.v[q]);
                coef[4 * k + dir] = face;
                nbr[4 * k + dir] = unknown_of[q];
                dsum += face;
            }
            diag[k] = dsum;
            inv_diag[k] = 1.0 / (dsum * inv_h2);
        }
    }

    void apply(const std::vector<double>& x, std::vector<double>& y) const {
        const int n = static_cast<int>(node.size());
        for (int k = 0; k < n; ++k) {
            double acc = diag[k] * x[k];
            for (int dir = 0; dir < 4; ++dir) {
                const int q = nbr[4 * k + dir];
                if (q >= 0) acc -= coef[4 * k + dir] * x[q];
            }
            y[k] = acc * inv_h2;
        }
    }
};

// Compressed-rhs solve shared by all entry points.
ForwardSolution solve_compressed(const DiskOperator& op, const std::vector<double>& b,
                                 double tol) {
    const Grid2D& g = op.disk->grid;
    const int n = static_cast<int>(op.node.size());
    std::vector<double> x(n, 0.0);
    const int cap = static_cast<int>(50.0 * std::sqrt(double(g.nx) * double(g.ny)));
    auto apply = [&op](const std::vector<double>& in, std::vector<double>& out) {
        op.apply(in, out);
    };
    detail::PcgResult r = detail::pcg_solve(apply, op.inv_diag, b, x, tol, cap);
    if (!r.converged) {
        throw std::runtime_error("forward CG hit the iteration cap before reaching tolerance");
    }
    ForwardSolution out;
    out.u = ScalarField(g, 0.0);
    for (int k = 0; k < n; ++k) out.u.v[op.node[k]] = x[k];
    out.iterations = r.iterations;
    out.rel_residual = r.rel_residual;
    out.converged = r.converged;
    return out;
}

ForwardSolution solve_with_operator(const DiskOperator& op, double cx, double cy,
                                    double rho, double tol) {
    const Grid2D& g = op.disk->grid;
    const int n = static_cast<int>(op.node.size());
    std::vector<double> b(n);
    for (int k = 0; k < n; ++k) {
        const int p = op.node[k];
        b[k] = eval_source(g.x(p % g.nx), g.y(p / g.nx), cx, cy, rho);
    }
    return solve_compressed(op, b, tol);
}

}  // namespace

double source_normalization(double rho) {
    if (!(rho > 0.0)) throw std::invalid_argument("source radius must be positive");
    return 1.0 / (2.0 * std::numbers::pi * rho * rho * bump_moment());
}

double eval_source(double x, double y, double cx, double cy, double rho) {
    const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
    const double r2 = rho * rho;
    if (d2 >= r2) return 0.0;
    return source_normalization(rho) * std::exp(d2 / (d2 - r2));
}

ForwardSolution solve_poisson(const MaskedGrid& disk, const ScalarField& sigma,
                              const ScalarField& rhs, double tol) {
    if (rhs.grid.nx != disk.grid.nx || rhs.grid.ny != disk.grid.ny) {
        throw std::invalid_argument("rhs is not defined on the disk grid");
    }
    DiskOperator op(disk, sigma);
    const int n = static_cast<int>(op.node.size());
    std::vector<double> b(n);
    for (int k = 0; k < n; ++k) b[k] = rhs.v[op.node[k]];
    return solve_compressed(op, b, tol);
}

ForwardSolution solve_forward(const MaskedGrid& disk, const ScalarField& sigma,
                              double cx, double cy, double rho, double tol) {
    DiskOperator op(disk, sigma);
    return solve_with_operator(op, cx, cy, rho, tol);
}

BoundaryDataset measure_all(const MaskedGrid& disk, const ScalarField& sigma,
                            const SourceSet& sources, const MaskedGrid& omega,
                            const OmegaInDisk& map, double tol, int threads) {
    const DiskOperator op(disk, sigma);
    const std::vector<int> ring = boundary_nodes(omega.grid);
    const std::vector<int> gamma = gamma_nodes(omega.grid);
    const Grid2D& og = omega.grid;
    const Grid2D& dg = disk.grid;

    BoundaryDataset data;
    data.n_boundary = static_cast<int>(ring.size());
    data.n_gamma = static_cast<int>(gamma.size());
    data.n_phi = sources.count;
    data.h_phi = sources.h_phi;
    data.g0.assign(static_cast<std::size_t>(data.n_boundary) * data.n_phi, 0.0);
    data.g1.assign(static_cast<std::size_t>(data.n_gamma) * data.n_phi, 0.0);

    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
    threads = std::min(threads, sources.count);

    std::vector<double> min_u(sources.count, 0.0);
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto worker = [&]() {
        for (;;) {
            const int n = next.fetch_add(1);
            if (n >= sources.count) return;
            try {
                ForwardSolution sol =
                    solve_with_operator(op, sources.x[n], sources.y[n], sources.rho, tol);
                const ScalarField& u = sol.u;
                for (std::size_t r = 0; r < ring.size(); ++r) {
                    const int i = ring[r] % og.nx, j = ring[r] / og.nx;
                    data.g0[r * data.n_phi + n] =
                        u.at(map.ix0 + map.k * i, map.iy0 + map.k * j);
                }
                for (std::size_t r = 0; r < gamma.size(); ++r) {
                    const int i = gamma[r] % og.nx, j = gamma[r] / og.nx;
                    const int di = map.ix0 + map.k * i, dj = map.iy0 + map.k * j;
                    data.g1[r * data.n_phi + n] =
                        (u.at(di + 1, dj) - u.at(di - 1, dj)) / (2.0 * dg.h);
                }
                double mn = u.at(map.ix0, map.iy0);
                for (int j = 0; j < og.ny; ++j) {
                    for (int i = 0; i < og.nx; ++i) {
                        mn = std::min(mn, u.at(map.ix0 + map.k * i, map.iy0 + map.k * j));
                    }
                }
                min_u[n] = mn;
            } catch (...) {
                std::scoped_lock lk(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };

    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);

    data.min_u_omega = min_u[0];
    for (double m : min_u) data.min_u_omega = std::min(data.min_u_omega, m);
    if (!(data.min_u_omega > 0.0)) {
        throw std::runtime_error("forward potential is not strictly positive on Omega");
    }
    return data;
}

}  // namespace eit

#include "eit/pipeline.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace eit {

namespace {

// Deterministic uniform on [-1, 1]: top 53 bits of the engine output, so
// the stream is fixed by the standard's mt19937_64 specification.
double symmetric_uniform(std::mt19937_64& gen) {
    const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
    return 2.0 * u - 1.0;
}

}  // namespace

void add_noise(BoundaryDataset& data, double delta, unsigned long long seed,
               bool per_angle) {
    if (delta < 0.0) throw std::invalid_argument("noise level must be nonnegative");
    std::mt19937_64 gen(seed);
    auto corrupt = [&](std::vector<double>& g, int rows) {
        for (int r = 0; r < rows; ++r) {
            double xi = per_angle ? 0.0 : symmetric_uniform(gen);
            for (int n = 0; n < data.n_phi; ++n) {
                if (per_angle) xi = symmetric_uniform(gen);
                g[static_cast<std::size_t>(r) * data.n_phi + n] *= 1.0 + delta * xi;
            }
        }
    };
    corrupt(data.g0, data.n_boundary);
    corrupt(data.g1, data.n_gamma);
    data.delta = delta;
    data.seed = seed;
}

std::vector<double> spline_phi_derivative(const std::vector<double>& y, double h) {
    const int m = static_cast<int>(y.size());
    if (m < 2) throw std::invalid_argument("spline derivative needs at least 2 samples");
    if (!(h > 0.0)) throw std::invalid_argument("spline spacing must be positive");
    std::vector<double> d(m);
    if (m == 2) {
        d[0] = d[1] = (y[1] - y[0]) / h;
        return d;
    }
    // Second derivatives M of the natural spline solve a tridiagonal
    // system with ends pinned to zero; Thomas elimination.
    std::vector<double> M(m, 0.0), c(m, 0.0), rhs(m, 0.0);
    const double off = h / 6.0, dia = 2.0 * h / 3.0;
    double beta = dia;
    c[1] = 0.0;
    rhs[1] = (y[2] - 2.0 * y[1] + y[0]) / h;
    M[1] = rhs[1] / beta;
    for (int i = 2; i <= m - 2; ++i) {
        c[i] = off / beta;
        beta = dia - off * c[i];
        rhs[i] = (y[i + 1] - 2.0 * y[i] + y[i - 1]) / h;
        M[i] = (rhs[i] - off * M[i - 1]) / beta;
    }
    for (int i = m - 3; i >= 1; --i) M[i] -= c[i + 1] * M[i + 1];
    for (int i = 0; i < m - 1; ++i) {
        d[i] = (y[i + 1] - y[i]) / h - h * (2.0 * M[i] + M[i + 1]) / 6.0;
    }
    d[m - 1] = (y[m - 1] - y[m - 2]) / h + h * (2.0 * M[m - 1] + M[m - 2]) / 6.0;
    return d;
}

TransformedBoundary log_transform(const BoundaryDataset& data, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("viscosity eps must be positive");
    if (data.n_phi < 3) throw std::invalid_argument("log transform needs at least 3 angles");

    TransformedBoundary tb;
    tb.n_boundary = data.n_boundary;
    tb.n_gamma = data.n_gamma;
    tb.n_phi = data.n_phi;
    tb.h_phi = data.h_phi;
    tb.eps = eps;
    const std::size_t nb = static_cast<std::size_t>(data.n_boundary) * data.n_phi;
    const std::size_t ng = static_cast<std::size_t>(data.n_gamma) * data.n_phi;
    tb.s0.resize(nb);
    tb.dphi_s0.resize(nb);
    tb.r_dir.resize(nb);
    tb.q_dir.resize(nb);
    tb.s1.resize(ng);
    tb.dphi_s1.resize(ng);
    tb.r_neu.resize(ng);
    tb.q_neu.resize(ng);

    for (int r = 0; r < data.n_boundary; ++r) {
        for (int n = 0; n < data.n_phi; ++n) {
            const double g = data.g0[static_cast<std::size_t>(r) * data.n_phi + n];
            if (!(g > 0.0)) {
                throw std::domain_error("g0 not positive at boundary row " +
                                        std::to_string(r) + ", angle " + std::to_string(n));
            }
            tb.s0[static_cast<std::size_t>(r) * data.n_phi + n] = std::log(g);
        }
    }
    // s1 needs g0 at the Gamma nodes. Both arrays follow the fixed
    // traversals of boundary_nodes() and gamma_nodes(): the ring walks the
    // bottom row (nx nodes) and then ascends the right edge, so Gamma row
    // r (node at j = r + 1) sits at ring row nx + r. The ring length
    // 2(nx+ny)-4 and n_gamma = ny-2 recover nx.
    const int nx = (data.n_boundary + 4) / 2 - (data.n_gamma + 2);

    for (int r = 0; r < data.n_gamma; ++r) {
        const int ring_row = nx + r;
        for (int n = 0; n < data.n_phi; ++n) {
            const double g0 = data.g0[static_cast<std::size_t>(ring_row) * data.n_phi + n];
            const double g1 = data.g1[static_cast<std::size_t>(r) * data.n_phi + n];
            tb.s1[static_cast<std::size_t>(r) * data.n_phi + n] = g1 / g0;
        }
    }

    std::vector<double> row(data.n_phi);
    auto differentiate = [&](const std::vector<double>& src, std::vector<double>& dst, int rows) {
        for (int r = 0; r < rows; ++r) {
            for (int n = 0; n < data.n_phi; ++n) {
                row[n] = src[static_cast<std::size_t>(r) * data.n_phi + n];
            }
            const std::vector<double> d = spline_phi_derivative(row, data.h_phi);
            for (int n = 0; n < data.n_phi; ++n) {
                dst[static_cast<std::size_t>(r) * data.n_phi + n] = d[n];
            }
        }
    };
    differentiate(tb.s0, tb.dphi_s0, data.n_boundary);
    differentiate(tb.s1, tb.dphi_s1, data.n_gamma);

    for (std::size_t k = 0; k < nb; ++k) {
        tb.r_dir[k] = tb.dphi_s0[k];
        tb.q_dir[k] = tb.dphi_s0[k] - eps * tb.s0[k];
    }
    for (std::size_t k = 0; k < ng; ++k) {
        tb.r_neu[k] = tb.dphi_s1[k];
        tb.q_neu[k] = tb.dphi_s1[k] - eps * tb.s1[k];
    }
    return tb;
}

PhiBoundaryData extract_slice(const TransformedBoundary& tb, int n) {
    if (n < 0 || n >= tb.n_phi) throw std::out_of_range("angle index out of range");
    PhiBoundaryData s;
    s.r_dir.resize(tb.n_boundary);
    s.q_dir.resize(tb.n_boundary);
    s.r_neu.resize(tb.n_gamma);
    s.q_neu.resize(tb.n_gamma);
    for (int r = 0; r < tb.n_boundary; ++r) {
        s.r_dir[r] = tb.r_dir[static_cast<std::size_t>(r) * tb.n_phi + n];
        s.q_dir[r] = tb.q_dir[static_cast<std::size_t>(r) * tb.n_phi + n];
    }
    for (int r = 0; r < tb.n_gamma; ++r) {
        s.r_neu[r] = tb.r_neu[static_cast<std::size_t>(r) * tb.n_phi + n];
        s.q_neu[r] = tb.q_neu[static_cast<std::size_t>(r) * tb.n_phi + n];
    }
    return s;
}

}  // namespace eit

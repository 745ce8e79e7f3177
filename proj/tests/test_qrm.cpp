#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "eit/geometry.hpp"
#include "eit/qrm.hpp"

using namespace eit;

namespace {

Grid2D omega_grid(int n) {
    GeometryConfig g;
    return build_omega_grid(g, 1.0 / (n - 1)).grid;
}

// Manufactured V on [1,2]^2: equals 1 on the ring with vanishing normal
// derivative, so the two fixed layers are consistent up to O(h^2).
double v_star(double x, double y) {
    const double sx = std::sin(std::numbers::pi * (x - 1.0));
    const double sy = std::sin(std::numbers::pi * (y - 1.0));
    return 1.0 + 0.5 * sx * sx * sy * sy;
}

double lap_v_star(double x, double y) {
    const double pi = std::numbers::pi;
    const double sx2 = std::sin(pi * (x - 1.0)) * std::sin(pi * (x - 1.0));
    const double sy2 = std::sin(pi * (y - 1.0)) * std::sin(pi * (y - 1.0));
    const double cx2 = std::cos(2.0 * pi * (x - 1.0));
    const double cy2 = std::cos(2.0 * pi * (y - 1.0));
    // d2/dt2 sin^2(pi t) = 2 pi^2 cos(2 pi t)
    return 0.5 * (2.0 * pi * pi * cx2 * sy2 + sx2 * 2.0 * pi * pi * cy2);
}

double manufactured_error(int n) {
    const Grid2D g = omega_grid(n);
    ScalarField a(g, 0.0);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            a.at(i, j) = lap_v_star(g.x(i), g.y(j)) / v_star(g.x(i), g.y(j));
        }
    }
    QrmOptions opts;
    opts.rel_tol = 1e-10;
    const QrmResult res = minimize_K(a, opts);
    REQUIRE(res.converged);
    double err = 0.0;
    for (int j = 2; j <= g.ny - 3; ++j) {
        for (int i = 2; i <= g.nx - 3; ++i) {
            err = std::max(err, std::abs(res.V.at(i, j) - v_star(g.x(i), g.y(j))));
        }
    }
    return err;
}

}  // namespace

TEST_CASE("K vanishes exactly for the homogeneous problem") {
    const Grid2D g = omega_grid(9);
    const ScalarField V(g, 1.0);
    const ScalarField a(g, 0.0);
    CHECK(eval_K(V, a) == 0.0);
    CHECK(eval_K(V, a, 10.0) == 0.0);
}

TEST_CASE("K matches a hand value for constant coefficient") {
    const Grid2D g = omega_grid(9);
    const ScalarField V(g, 1.0);
    ScalarField a(g, 0.0);
    for (double& v : a.v) v = 0.7;
    // lap V = 0 and V = 1, so each of the (n-4)^2 free nodes contributes
    // (0.7)^2 h^2
    const double expected = 25.0 * 0.49 * g.h * g.h;
    CHECK(eval_K(V, a) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("K rejects violated boundary conditions and bad grids") {
    const Grid2D g = omega_grid(9);
    ScalarField V(g, 1.0);
    const ScalarField a(g, 0.0);
    V.at(0, 3) = 1.1;
    CHECK_THROWS_AS(eval_K(V, a), std::invalid_argument);
    V.at(0, 3) = 1.0;
    V.at(g.nx - 2, 4) = 0.9;  // second fixed layer
    CHECK_THROWS_AS(eval_K(V, a), std::invalid_argument);

    const Grid2D tiny{1.0, 1.0, 0.25, 5, 5};
    CHECK_THROWS_AS(eval_K(ScalarField(tiny, 1.0), ScalarField(tiny, 0.0)),
                    std::invalid_argument);
    CHECK_THROWS_AS(eval_K(ScalarField(tiny, 1.0), a), std::invalid_argument);
    CHECK_THROWS_AS(minimize_K(ScalarField(tiny, 0.0)), std::invalid_argument);
}

TEST_CASE("zero coefficient yields the constant solution") {
    const Grid2D g = omega_grid(11);
    const ScalarField a(g, 0.0);
    const QrmResult res = minimize_K(a);
    CHECK(res.converged);
    CHECK(res.k_value == 0.0);
    for (double v : res.V.v) CHECK(v == 1.0);
}

TEST_CASE("minimizer solves a manufactured problem with second-order accuracy") {
    const double e21 = manufactured_error(21);
    const double e41 = manufactured_error(41);
    CHECK(e21 < 0.05);
    CHECK(e41 / e21 <= 0.6);
}

TEST_CASE("returned V minimizes K among random feasible fields") {
    const Grid2D g = omega_grid(11);
    std::mt19937_64 rng(31);
    auto uniform = [&]() { return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0; };
    ScalarField a(g, 0.0);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            a.at(i, j) = 2.0 * std::sin(3.0 * g.x(i)) * std::cos(2.0 * g.y(j));
        }
    }
    QrmOptions opts;
    opts.rel_tol = 1e-12;
    const QrmResult res = minimize_K(a, opts);
    REQUIRE(res.converged);
    for (int trial = 0; trial < 100; ++trial) {
        ScalarField V = res.V;
        for (int j = 2; j <= g.ny - 3; ++j) {
            for (int i = 2; i <= g.nx - 3; ++i) {
                V.at(i, j) += 0.1 * uniform();
            }
        }
        CHECK(eval_K(V, a) >= res.k_value);
    }
}

TEST_CASE("gradient-based stopping rule reports the gradient norm") {
    const Grid2D g = omega_grid(11);
    ScalarField a(g, 0.0);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            a.at(i, j) = 0.5 * (g.x(i) - g.y(j));
        }
    }
    QrmOptions opts;
    opts.rel_tol = 1e-14;
    opts.grad_tol = 1e-6;
    const QrmResult res = minimize_K(a, opts);
    CHECK(res.converged);
    CHECK(res.grad_norm < 1e-6);
    CHECK(res.k_value >= 0.0);
}

TEST_CASE("ridge pulls the solution toward one") {
    const Grid2D g = omega_grid(11);
    ScalarField a(g, 0.0);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            a.at(i, j) = std::sin(2.0 * g.x(i)) + 0.3 * g.y(j);
        }
    }
    const QrmResult plain = minimize_K(a);
    QrmOptions heavy;
    heavy.ridge = 1e6;
    const QrmResult damped = minimize_K(a, heavy);
    double dev_plain = 0.0, dev_damped = 0.0;
    for (std::size_t k = 0; k < plain.V.v.size(); ++k) {
        dev_plain = std::max(dev_plain, std::abs(plain.V.v[k] - 1.0));
        dev_damped = std::max(dev_damped, std::abs(damped.V.v[k] - 1.0));
    }
    CHECK(dev_plain > 0.0);
    CHECK(dev_damped < dev_plain);
}

TEST_CASE("conductivity is the square of V") {
    const Grid2D g = omega_grid(9);
    ScalarField V(g, 1.0);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            V.at(i, j) = 1.0 + 0.1 * g.x(i) + 0.2 * g.y(j);
        }
    }
    const ScalarField s = sigma_from_V(V);
    for (std::size_t k = 0; k < V.v.size(); ++k) {
        CHECK(s.v[k] == V.v[k] * V.v[k]);
    }
}

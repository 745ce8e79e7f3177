#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include "doctest.h"
#include "eit/geometry.hpp"

using namespace eit;

TEST_CASE("default geometry satisfies the placement conditions") {
    GeometryConfig g;
    CHECK_NOTHROW(validate_geometry(g));
}

TEST_CASE("geometry violations are rejected with a specific message") {
    GeometryConfig g;

    SUBCASE("Omega outside the source disk") {
        g.c1 = 3.0;  // sqrt(c1^2+c2^2) >= A
        CHECK_THROWS_AS(validate_geometry(g), std::invalid_argument);
    }
    SUBCASE("Omega touching the coordinate axes") {
        g.a = 0.3;  // a - c1 < 0
        CHECK_THROWS_AS(validate_geometry(g), std::invalid_argument);
    }
    SUBCASE("source circle reaching the boundary of G") {
        g.A = 2.95;  // A + rho > g_radius
        CHECK_THROWS_AS(validate_geometry(g), std::invalid_argument);
    }
    SUBCASE("rho out of range") {
        g.rho = 1.5;
        CHECK_THROWS_AS(validate_geometry(g), std::invalid_argument);
        g.rho = -0.1;
        CHECK_THROWS_AS(validate_geometry(g), std::invalid_argument);
    }
}

TEST_CASE("omega grid layout and classification") {
    GeometryConfig g;
    const MaskedGrid m = build_omega_grid(g, 0.025);
    CHECK(m.grid.nx == 41);
    CHECK(m.grid.ny == 41);
    CHECK(m.grid.x(0) == doctest::Approx(1.0));
    CHECK(m.grid.x(40) == doctest::Approx(2.0));
    CHECK(m.grid.y(40) == doctest::Approx(2.0));

    // ring nodes are Dirichlet, right edge interior is Gamma
    CHECK(m.at(0, 0) == NodeClass::Dirichlet);
    CHECK(m.at(40, 0) == NodeClass::Dirichlet);
    CHECK(m.at(40, 40) == NodeClass::Dirichlet);
    CHECK(m.at(40, 1) == NodeClass::Gamma);
    CHECK(m.at(40, 39) == NodeClass::Gamma);
    CHECK(m.at(20, 20) == NodeClass::Interior);

    int gamma_count = 0, dir_count = 0;
    for (NodeClass c : m.mask) {
        if (c == NodeClass::Gamma) ++gamma_count;
        if (c == NodeClass::Dirichlet) ++dir_count;
    }
    CHECK(gamma_count == 39);
    CHECK(dir_count == 160 - 39);

    // every boundary node can see the interior (8-neighborhood)
    for (int j = 0; j < m.grid.ny; ++j) {
        for (int i = 0; i < m.grid.nx; ++i) {
            if (m.at(i, j) == NodeClass::Interior) continue;
            bool sees_interior = false;
            for (int dj = -1; dj <= 1; ++dj) {
                for (int di = -1; di <= 1; ++di) {
                    const int ii = i + di, jj = j + dj;
                    if (ii < 0 || jj < 0 || ii >= m.grid.nx || jj >= m.grid.ny) continue;
                    if (m.at(ii, jj) == NodeClass::Interior) sees_interior = true;
                }
            }
            CHECK(sees_interior);
        }
    }
}

TEST_CASE("omega grid rejects spacings that do not divide the side") {
    GeometryConfig g;
    CHECK_THROWS_AS(build_omega_grid(g, 0.3), std::invalid_argument);
}

TEST_CASE("disk grid covers the bounding box of G and nests Omega") {
    GeometryConfig g;
    const MaskedGrid disk = build_disk_grid(g, 1.0 / 160.0);
    CHECK(disk.grid.nx == 961);
    CHECK(disk.grid.ny == 961);
    CHECK(disk.grid.x(0) == doctest::Approx(-1.5));
    CHECK(disk.grid.x(960) == doctest::Approx(4.5));

    // corners of the box are outside the disk, the center is inside
    CHECK(disk.at(0, 0) == NodeClass::Exterior);
    CHECK(disk.at(480, 480) == NodeClass::Interior);

    const MaskedGrid omega = build_omega_grid(g, 1.0 / 40.0);
    const OmegaInDisk map = locate_omega(omega.grid, disk.grid);
    CHECK(map.k == 4);
    CHECK(disk.grid.x(map.ix0) == doctest::Approx(omega.grid.x(0)));
    CHECK(disk.grid.y(map.iy0 + map.k * 40) == doctest::Approx(omega.grid.y(40)));

    // all Omega nodes fall strictly inside G
    for (int j = 0; j < omega.grid.ny; ++j) {
        for (int i = 0; i < omega.grid.nx; ++i) {
            CHECK(disk.at(map.ix0 + map.k * i, map.iy0 + map.k * j) == NodeClass::Interior);
        }
    }
}

TEST_CASE("boundary traversal is counterclockwise and complete") {
    GeometryConfig g;
    const MaskedGrid m = build_omega_grid(g, 0.25);  // 5x5 grid
    const std::vector<int> ring = boundary_nodes(m.grid);
    CHECK(ring.size() == 16);
    // starts at the lower-left corner, walks the bottom row first
    CHECK(ring[0] == m.grid.index(0, 0));
    CHECK(ring[1] == m.grid.index(1, 0));
    CHECK(ring[4] == m.grid.index(4, 0));
    CHECK(ring[5] == m.grid.index(4, 1));
    // no duplicates, every boundary node present
    const std::set<int> unique(ring.begin(), ring.end());
    CHECK(unique.size() == ring.size());

    const std::vector<int> gam = gamma_nodes(m.grid);
    CHECK(gam.size() == 3);
    CHECK(gam[0] == m.grid.index(4, 1));
    CHECK(gam[2] == m.grid.index(4, 3));
}

TEST_CASE("source positions sit on the source circle") {
    GeometryConfig g;
    const SourceSet s = make_sources(g, 199);
    CHECK(s.h_phi == doctest::Approx(std::numbers::pi / 100.0));
    CHECK(s.phi[0] == 0.0);
    for (int n = 0; n < s.count; ++n) {
        CHECK(std::hypot(s.x[n] - g.a, s.y[n] - g.b) == doctest::Approx(g.A));
    }
    // quarter turns land on the axis-aligned positions
    const SourceSet s4 = make_sources(g, 3);  // h_phi = pi/2
    CHECK(s4.x[1] == doctest::Approx(1.5));
    CHECK(s4.y[1] == doctest::Approx(3.5));
    CHECK(s4.x[2] == doctest::Approx(-0.5));
    CHECK(s4.y[2] == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("sources stay inside G with the bump support") {
    GeometryConfig g;
    const SourceSet s = make_sources(g, 64);
    for (int n = 0; n < s.count; ++n) {
        const double d = std::hypot(s.x[n] - g.g_center_x, s.y[n] - g.g_center_y);
        CHECK(d + g.rho < g.g_radius);
    }
}

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <unistd.h>

#include "doctest.h"
#include "eit/experiment.hpp"
#include "eit/phantom_image.hpp"

using namespace eit;

namespace {

ExperimentConfig tiny_config() {
    ExperimentConfig cfg;
    cfg.h_omega = 0.1;
    cfg.h_disk = 0.05;
    cfg.source_count = 6;
    cfg.phantom_kind = "uniform";
    cfg.lambda = 1.0;
    cfg.alpha = 0.01;
    cfg.epsilon = 0.01;
    cfg.grad_tol = 0.05;
    cfg.max_iters = 300;
    cfg.forward_tol = 1e-9;
    cfg.threads = 1;
    cfg.write_fields = false;
    return cfg;
}

std::filesystem::path fresh_dir(const char* tag) {
    auto dir = std::filesystem::temp_directory_path() /
               (std::string("eit_test_") + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("config text parses into typed fields") {
    const ExperimentConfig cfg = parse_config_text(
        "# comment line\n"
        "grid.h_omega = 0.05\n"
        "sources.count = 16\n"
        "phantom.kind = disk\n"
        "phantom.sigma_a = 4\n"
        "noise.delta = 0.03\n"
        "noise.per_angle = true\n"
        "convex.lambda = 2.5\n"
        "convex.method = gd\n"
        "sweep.lambda = 0,3,10\n"
        "output.dir = /tmp/somewhere\n");
    CHECK(cfg.h_omega == 0.05);
    CHECK(cfg.source_count == 16);
    CHECK(cfg.phantom_kind == "disk");
    CHECK(cfg.sigma_a == 4.0);
    CHECK(cfg.noise_delta == 0.03);
    CHECK(cfg.noise_per_angle);
    CHECK(cfg.lambda == 2.5);
    CHECK(cfg.method == "gd");
    CHECK(cfg.sweep_lambda == std::vector<double>{0.0, 3.0, 10.0});
    CHECK(cfg.output_dir == "/tmp/somewhere");
    // untouched keys keep their defaults
    CHECK(cfg.h_disk == 0.0125);
    CHECK(cfg.alpha == 0.01);
}

TEST_CASE("config rejects malformed input") {
    ExperimentConfig cfg;
    CHECK_THROWS_AS(apply_config_value(cfg, "no.such.key", "1"), std::invalid_argument);
    CHECK_THROWS_AS(apply_config_value(cfg, "convex.lambda", "abc"), std::invalid_argument);
    CHECK_THROWS_AS(apply_config_value(cfg, "convex.lambda", "1.5x"), std::invalid_argument);
    CHECK_THROWS_AS(apply_config_value(cfg, "noise.per_angle", "yes"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("convex.lambda 3\n"), std::invalid_argument);
}

TEST_CASE("config dump round-trips through the parser") {
    ExperimentConfig cfg = tiny_config();
    cfg.sweep_alpha = {0.01, 0.02};
    cfg.phantom_image = "some/file.pgm";
    cfg.noise_delta = 0.05;
    const std::string text = dump_config(cfg);
    const ExperimentConfig back = parse_config_text(text);
    CHECK(dump_config(back) == text);
    CHECK(back.h_omega == cfg.h_omega);
    CHECK(back.sweep_alpha == cfg.sweep_alpha);
    CHECK(back.phantom_image == cfg.phantom_image);
    CHECK(back.threads == cfg.threads);
}

TEST_CASE("builtin images render and reject unknown names") {
    for (const char* name : {"letter_a", "letter_omega", "disk", "scan_a", "scan_b"}) {
        const GrayImage img = builtin_image(name);
        CHECK(img.width == 160);
        CHECK(img.height == 160);
        int dark = 0;
        for (std::uint8_t p : img.pix) {
            if (p < 128) ++dark;
        }
        CHECK(dark > 0);
        CHECK(dark < img.width * img.height);
    }
    CHECK_THROWS_AS(builtin_image("nope"), std::invalid_argument);
    CHECK_THROWS_AS(builtin_image("disk", 0), std::invalid_argument);
}

TEST_CASE("pgm files round-trip through write and read") {
    const GrayImage img = builtin_image("scan_a", 48);
    const auto dir = fresh_dir("pgm");
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "probe.pgm").string();
    write_pgm(img, path);
    const GrayImage back = read_pgm(path);
    CHECK(back.width == img.width);
    CHECK(back.height == img.height);
    CHECK(back.pix == img.pix);
    std::filesystem::remove_all(dir);
}

TEST_CASE("pgm reader handles ascii and rejects junk") {
    const auto dir = fresh_dir("pgm_ascii");
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "ascii.pgm").string();
    {
        std::ofstream out(path);
        out << "P2\n# with a comment\n2 2\n255\n0 64\n128 255\n";
    }
    const GrayImage img = read_pgm(path);
    CHECK(img.width == 2);
    CHECK(img.height == 2);
    CHECK(img.at(0, 0) == 0);
    CHECK(img.at(1, 0) == 64);
    CHECK(img.at(0, 1) == 128);
    CHECK(img.at(1, 1) == 255);
    {
        std::ofstream out(path);
        out << "P7\n2 2\n255\n";
    }
    CHECK_THROWS_AS(read_pgm(path), std::runtime_error);
    CHECK_THROWS_AS(read_pgm((dir / "missing.pgm").string()), std::runtime_error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("binary phantom marks the inclusion and smooths into the background") {
    GeometryConfig geo;
    const MaskedGrid disk = build_disk_grid(geo, 0.025);
    const MaskedGrid omega = build_omega_grid(geo, 0.05);
    const Phantom ph = make_phantom(builtin_image("disk"), PhantomMode::Binary, 2.0,
                                    geo, disk, omega);
    CHECK(ph.sigma_a == 2.0);
    CHECK(ph.mask_count > 0);
    CHECK(ph.true_contrast > 1.5);
    CHECK(ph.true_contrast <= 2.0 + 1e-12);
    // the builtin disk is centered in the image, hence in Omega
    CHECK(std::abs(ph.centroid_x - 1.5) < 0.05);
    CHECK(std::abs(ph.centroid_y - 1.5) < 0.05);
    double minv = 1e9, maxv = -1e9;
    for (double v : ph.sigma.v) {
        minv = std::min(minv, v);
        maxv = std::max(maxv, v);
    }
    CHECK(minv >= 1.0);
    CHECK(maxv == doctest::Approx(ph.true_contrast));
    // sigma returns to 1 on and outside the Omega boundary
    const OmegaInDisk map = locate_omega(omega.grid, disk.grid);
    for (int i = 0; i < omega.grid.nx; ++i) {
        CHECK(ph.sigma.v[disk.grid.index(map.ix0 + map.k * i, map.iy0)] == 1.0);
        CHECK(ph.sigma_omega.at(i, 0) == 1.0);
    }
    CHECK(ph.sigma_omega.grid.nx == omega.grid.nx);
}

TEST_CASE("linear phantom maps gray levels onto a conductivity ramp") {
    GeometryConfig geo;
    const MaskedGrid disk = build_disk_grid(geo, 0.0125);
    const MaskedGrid omega = build_omega_grid(geo, 0.025);
    const Phantom ph = make_phantom(builtin_image("scan_a"), PhantomMode::Linear, 3.0,
                                    geo, disk, omega);
    CHECK(ph.true_contrast > 1.2);
    CHECK(ph.true_contrast <= 3.0 + 1e-12);
    CHECK(ph.mask_count > 0);
}

TEST_CASE("uniform phantom and flat images give sigma equal to one") {
    GeometryConfig geo;
    const MaskedGrid disk = build_disk_grid(geo, 0.05);
    const MaskedGrid omega = build_omega_grid(geo, 0.1);
    const Phantom uni = uniform_phantom(disk, omega);
    for (double v : uni.sigma.v) CHECK(v == 1.0);
    CHECK(uni.mask_count == 0);
    CHECK(uni.true_contrast == 1.0);

    GrayImage flat;
    flat.width = flat.height = 8;
    flat.pix.assign(64, 200);
    const Phantom ph = make_phantom(flat, PhantomMode::Binary, 2.0, geo, disk, omega);
    for (double v : ph.sigma.v) CHECK(v == 1.0);
    CHECK(ph.mask_count == 0);
}

TEST_CASE("phantom rejects inclusions that touch the boundary") {
    GeometryConfig geo;
    const MaskedGrid disk = build_disk_grid(geo, 0.025);
    const MaskedGrid omega = build_omega_grid(geo, 0.05);
    GrayImage edge;
    edge.width = edge.height = 16;
    edge.pix.assign(256, 255);
    for (int row = 0; row < 16; ++row) edge.pix[row * 16] = 0;  // left column dark
    CHECK_THROWS_AS(make_phantom(edge, PhantomMode::Binary, 2.0, geo, disk, omega),
                    std::invalid_argument);
}

TEST_CASE("forward data generation is deterministic") {
    ExperimentConfig cfg = tiny_config();
    cfg.source_count = 3;
    const ForwardData d1 = generate_forward(cfg);
    const ForwardData d2 = generate_forward(cfg);
    CHECK(d1.clean.g0 == d2.clean.g0);
    CHECK(d1.clean.g1 == d2.clean.g1);
    CHECK(d1.clean.n_phi == 3);
    CHECK(d1.clean.min_u_omega > 0.0);
    CHECK(d1.sources.h_phi == doctest::Approx(2.0 * std::numbers::pi / 4.0));
}

TEST_CASE("coarse uniform run recovers a near-constant conductivity") {
    const ExperimentConfig cfg = tiny_config();
    const RunResult run = run_experiment(cfg);
    CHECK(run.noisy.delta == 0.0);
    CHECK(run.inversion.slices.size() == 6);
    const Metrics& m = run.inversion.metrics;
    CHECK(m.slices_total == 6);
    CHECK(m.slices_monotone == 6);
    CHECK(m.slices_converged == 6);
    CHECK(m.min_sigma >= 0.0);
    CHECK(m.max_abs_dev < 0.1);
    CHECK(m.centroid_error == -1.0);
    CHECK(run.inversion.sigma.grid.nx == 11);
    CHECK(run.inversion.qrm.V.grid.nx == 11);
    CHECK(run.runtime_seconds >= 0.0);
}

TEST_CASE("noise changes the measured traces") {
    ExperimentConfig cfg = tiny_config();
    cfg.source_count = 3;
    cfg.noise_delta = 0.05;
    cfg.noise_seed = 9;
    const ForwardData data = generate_forward(cfg);
    BoundaryDataset noisy = data.clean;
    add_noise(noisy, cfg.noise_delta, cfg.noise_seed, cfg.noise_per_angle);
    CHECK(noisy.g0 != data.clean.g0);
    CHECK(noisy.delta == 0.05);
}

TEST_CASE("run outputs land in the requested directory") {
    ExperimentConfig cfg = tiny_config();
    const auto dir = fresh_dir("out");
    cfg.output_dir = dir.string();
    cfg.write_fields = true;
    cfg.write_traces = true;
    const RunResult run = run_experiment(cfg);
    write_outputs(cfg, run);
    CHECK(std::filesystem::exists(dir / "manifest.txt"));
    CHECK(std::filesystem::exists(dir / "metrics.csv"));
    CHECK(std::filesystem::exists(dir / "slices.csv"));
    CHECK(std::filesystem::exists(dir / "fields.csv"));
    CHECK(std::filesystem::exists(dir / "sigma.pgm"));
    CHECK(std::filesystem::exists(dir / "sigma_true.pgm"));
    CHECK(std::filesystem::exists(dir / "g0.csv"));
    CHECK(std::filesystem::exists(dir / "g1.csv"));

    std::ifstream manifest(dir / "manifest.txt");
    std::string text((std::istreambuf_iterator<char>(manifest)),
                     std::istreambuf_iterator<char>());
    CHECK(text.find("grid.h_omega") != std::string::npos);
    CHECK(text.find("result.contrast_computed") != std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("sweep shares forward data across parameter rows") {
    ExperimentConfig cfg = tiny_config();
    cfg.source_count = 4;
    cfg.sweep_lambda = {0.5, 1.0};
    cfg.max_iters = 150;
    const SweepResult sweep = run_sweep(cfg);
    REQUIRE(sweep.rows.size() == 2);
    CHECK(sweep.rows[0].lambda == 0.5);
    CHECK(sweep.rows[1].lambda == 1.0);
    CHECK(sweep.rows[0].epsilon == cfg.epsilon);
    for (const SweepRow& row : sweep.rows) {
        CHECK(row.metrics.slices_total == 4);
    }

    const auto dir = fresh_dir("sweep");
    cfg.output_dir = dir.string();
    write_sweep_outputs(cfg, sweep);
    CHECK(std::filesystem::exists(dir / "manifest.txt"));
    CHECK(std::filesystem::exists(dir / "metrics.csv"));
    std::filesystem::remove_all(dir);
}

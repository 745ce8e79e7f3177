// Command line driver for the impedance tomography toolkit: synthetic
// data generation, single reconstructions, parameter sweeps and the
// convexity probe.

#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eit/experiment.hpp"

namespace {

eit::ExperimentConfig load_config(const std::string& path,
                                  const std::vector<std::string>& overrides,
                                  long long seed, const std::string& out_dir, int threads) {
    eit::ExperimentConfig cfg =
        path.empty() ? eit::ExperimentConfig{} : eit::parse_config_file(path);
    for (const std::string& kv : overrides) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        }
        eit::apply_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed >= 0) cfg.noise_seed = static_cast<unsigned long long>(seed);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (threads >= 0) cfg.threads = threads;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"2D impedance tomography via convexified inversion"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::vector<std::string> overrides;
    long long seed = -1;
    int threads = -1;
    app.add_option("--config", config_path, "config file (key = value lines)");
    app.add_option("--set", overrides, "override a config key, key=value")->take_all();
    app.add_option("--seed", seed, "override noise.seed");
    app.add_option("--out", out_dir, "override output.dir");
    app.add_option("--threads", threads, "override run.threads");

    CLI::App* cmd_run = app.add_subcommand("run", "one full reconstruction");
    CLI::App* cmd_sweep = app.add_subcommand("sweep", "reconstructions over sweep.* lists");
    CLI::App* cmd_fwd = app.add_subcommand("forward-only", "write synthetic traces and stop");
    CLI::App* cmd_probe =
        app.add_subcommand("probe-convexity", "check the convexity gap on random pairs");
    int probe_trials = 100;
    long long probe_seed = 7;
    cmd_probe->add_option("--trials", probe_trials, "number of random state pairs");
    cmd_probe->add_option("--probe-seed", probe_seed, "rng seed for the probe");
    CLI::App* cmd_assets = app.add_subcommand("make-assets", "write the builtin rasters as PGM");
    std::string assets_dir = "assets";
    cmd_assets->add_option("--dir", assets_dir, "target directory");

    CLI11_PARSE(app, argc, argv);

    try {
        eit::ExperimentConfig cfg = load_config(config_path, overrides, seed, out_dir, threads);

        if (cmd_run->parsed()) {
            eit::RunResult run = eit::run_experiment(cfg);
            eit::write_outputs(cfg, run);
            const eit::Metrics& m = run.inversion.metrics;
            std::printf("contrast %.4f (true %.4f)  rel_l2 %.4f  slices %d/%d converged  "
                        "qrm %s  %.1fs\n",
                        m.contrast_computed, m.contrast_true, m.rel_l2_sigma,
                        m.slices_converged, m.slices_total,
                        m.qrm_converged ? "ok" : "NOT CONVERGED", run.runtime_seconds);
            std::printf("outputs in %s\n", cfg.output_dir.c_str());
            return 0;
        }
        if (cmd_sweep->parsed()) {
            eit::SweepResult sw = eit::run_sweep(cfg);
            eit::write_sweep_outputs(cfg, sw);
            for (const eit::SweepRow& row : sw.rows) {
                std::printf("lambda %-6g alpha %-6g eps %-8g contrast %.4f (true %.4f) "
                            "rel_l2 %.4f\n",
                            row.lambda, row.alpha, row.epsilon, row.metrics.contrast_computed,
                            row.metrics.contrast_true, row.metrics.rel_l2_sigma);
            }
            std::printf("outputs in %s (%.1fs)\n", cfg.output_dir.c_str(), sw.runtime_seconds);
            return 0;
        }
        if (cmd_fwd->parsed()) {
            eit::ForwardData data = eit::generate_forward(cfg);
            eit::BoundaryDataset noisy = data.clean;
            eit::add_noise(noisy, cfg.noise_delta, cfg.noise_seed, cfg.noise_per_angle);
            eit::write_forward_outputs(cfg, data, noisy);
            std::printf("traces for %d angles in %s (min u on Omega: %.3e)\n",
                        noisy.n_phi, cfg.output_dir.c_str(), data.clean.min_u_omega);
            return 0;
        }
        if (cmd_probe->parsed()) {
            const eit::MaskedGrid omega = eit::build_omega_grid(cfg.geometry, cfg.h_omega);
            const eit::ConvexParams prm{cfg.lambda, cfg.alpha, cfg.epsilon};
            std::mt19937_64 rng(static_cast<unsigned long long>(probe_seed));
            double worst_ratio = 0.0;
            bool first = true;
            int violations = 0;
            for (int t = 0; t < probe_trials; ++t) {
                auto [p1, p2] =
                    eit::make_random_probe_pair(omega.grid, cfg.epsilon, rng);
                const eit::ConvexityGap gap = eit::convexity_gap(p1, p2, prm);
                const double bound = cfg.alpha * gap.h2_diff2;
                const double ratio = bound > 0.0 ? gap.gap / bound : 0.0;
                if (first || ratio < worst_ratio) worst_ratio = ratio;
                first = false;
                if (gap.gap < bound) ++violations;
            }
            std::printf("%d trials, %d violations, worst gap / (alpha*|diff|_H2^2) = %.6f\n",
                        probe_trials, violations, worst_ratio);
            return violations == 0 ? 0 : 1;
        }
        if (cmd_assets->parsed()) {
            std::filesystem::create_directories(assets_dir);
            for (const char* name :
                 {"letter_a", "letter_omega", "disk", "scan_a", "scan_b"}) {
                const std::string path = assets_dir + "/" + name + ".pgm";
                eit::write_pgm(eit::builtin_image(name), path);
                std::printf("wrote %s\n", path.c_str());
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

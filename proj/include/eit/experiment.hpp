#pragma once

#include <random>
#include <string>
#include <vector>

#include "eit/convexify.hpp"
#include "eit/forward.hpp"
#include "eit/geometry.hpp"
#include "eit/phantom_image.hpp"
#include "eit/pipeline.hpp"
#include "eit/qrm.hpp"

namespace eit {

/// Every knob of a reconstruction run. Parsed from flat "key = value"
/// config files ('#' starts a comment, unknown keys are errors); the
/// defaults reproduce the desk-scale letter-A experiment.
struct ExperimentConfig {
    GeometryConfig geometry;

    double h_omega = 0.025;   ///< Omega grid spacing
    double h_disk = 0.0125;   ///< disk grid spacing (must divide h_omega)
    int source_count = 64;

    std::string phantom_kind = "letter_a";  ///< builtin name, "uniform" or "image"
    std::string phantom_image;              ///< PGM path when kind == "image"
    std::string phantom_mode = "binary";    ///< "binary" or "linear"
    double sigma_a = 2.0;
    double blur_cells = 2.0;

    double noise_delta = 0.0;
    unsigned long long noise_seed = 1;
    bool noise_per_angle = false;

    double lambda = 3.0;
    double alpha = 0.01;
    double epsilon = 2e-4;
    std::string method = "newton";  ///< "newton", "lbfgs" or "gd"
    double gamma = 0.1;
    double grad_tol = 1e-2;
    int max_iters = 2000;

    double qrm_ridge = 0.0;
    double qrm_rel_tol = 1e-8;
    int qrm_max_iters = 50000;
    double qrm_grad_tol = 0.0;

    std::vector<double> sweep_lambda;   ///< used by run_sweep; empty = {lambda}
    std::vector<double> sweep_alpha;    ///< empty = {alpha}
    std::vector<double> sweep_epsilon;  ///< empty = {epsilon}

    double forward_tol = 1e-10;
    int threads = 0;  ///< 0 = hardware concurrency

    std::string output_dir = "out";
    bool write_fields = true;
    bool write_traces = false;
};

/// Parses a config file / a config string. Values must parse fully;
/// booleans accept true/false/1/0. Lists are comma separated.
ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

/// Applies one "key = value" assignment; throws on unknown keys.
void apply_config_value(ExperimentConfig& cfg, const std::string& key,
                        const std::string& value);

/// Serializes every config key, one "key = value" per line, in the fixed
/// key order of the parser table (manifests stay schema-complete).
std::string dump_config(const ExperimentConfig& cfg);

/// Grids, sources, ground truth and clean synthetic traces for a config.
struct ForwardData {
    MaskedGrid disk;
    MaskedGrid omega;
    OmegaInDisk map;
    SourceSet sources;
    Phantom phantom;
    BoundaryDataset clean;
};

/// Builds grids and phantom from the config, validates the geometry and
/// solves the forward problem for every source angle.
ForwardData generate_forward(const ExperimentConfig& cfg);

/// Per-angle minimization summary.
struct SliceStat {
    int index = 0;
    double phi = 0.0;
    double j_initial = 0.0;
    double j_final = 0.0;
    double grad_final = 0.0;
    int iterations = 0;
    bool converged = false;
    bool monotone = true;  ///< J trace never increased
};

/// Reconstruction quality numbers. Contrast compares the max conductivity
/// against the smoothed ground truth; the centroid is the sigma-weighted
/// center of the hotspot region sigma >= 1 + (max-1)/2.
struct Metrics {
    double contrast_computed = 1.0;
    double contrast_true = 1.0;
    double contrast_error = 0.0;     ///< |computed - true|
    double rel_l2_sigma = 0.0;       ///< relative L2 error on the Omega grid
    double max_abs_dev = 0.0;        ///< max |sigma - 1| (null-phantom metric)
    bool has_centroid = false;
    double centroid_x = 0.0;
    double centroid_y = 0.0;
    double centroid_error = 0.0;     ///< distance to the truth centroid, -1 if n/a
    double min_sigma = 1.0;
    double max_sigma = 1.0;
    int slices_converged = 0;
    int slices_monotone = 0;
    int slices_total = 0;
    double max_grad_final = 0.0;
    bool qrm_converged = false;
};

struct InversionResult {
    ScalarField a;       ///< recovered coefficient on the Omega grid
    QrmResult qrm;       ///< V and solver diagnostics
    ScalarField sigma;   ///< V^2 on the Omega grid
    std::vector<SliceStat> slices;
    Metrics metrics;
};

/// Runs the per-angle convexification minimizations on transformed data,
/// accumulates the coefficient and recovers sigma through the
/// quasi-reversibility solve. `truth` supplies the comparison fields for
/// metrics (pass the run's phantom).
InversionResult invert_from_transform(const ExperimentConfig& cfg, const Grid2D& omega,
                                      const TransformedBoundary& tb, const Phantom& truth);

/// One full experiment: forward data, noise, transform, inversion.
struct RunResult {
    ForwardData data;
    BoundaryDataset noisy;
    InversionResult inversion;
    double runtime_seconds = 0.0;
};

RunResult run_experiment(const ExperimentConfig& cfg);

/// Sweep over sweep_epsilon x sweep_alpha x sweep_lambda (empty lists
/// fall back to the scalar values). Forward data and noise are generated
/// once and shared by all rows.
struct SweepRow {
    double lambda = 0.0, alpha = 0.0, epsilon = 0.0;
    Metrics metrics;
};
struct SweepResult {
    ForwardData data;
    std::vector<SweepRow> rows;
    double runtime_seconds = 0.0;
};

SweepResult run_sweep(const ExperimentConfig& cfg);

/// Writes manifest.txt, metrics.csv, per-slice stats and (optionally)
/// field CSV/PGM dumps under cfg.output_dir.
void write_outputs(const ExperimentConfig& cfg, const RunResult& run);
void write_sweep_outputs(const ExperimentConfig& cfg, const SweepResult& sweep);

/// Writes g0.csv / g1.csv / manifest.txt for the forward stage only.
void write_forward_outputs(const ExperimentConfig& cfg, const ForwardData& data,
                           const BoundaryDataset& noisy);

/// Random smooth states with shared boundary data for convexity probing.
/// Both states share one random boundary slice; their free interiors are
/// independent low-frequency Fourier sums, drawn in (r, w) coordinates
/// with s = r - eps * w so the implied log potential stays O(1) like on a
/// real minimization trajectory. amp_base sizes the first state, amp_delta
/// the perturbation that produces the second.
std::pair<PairField, PairField> make_random_probe_pair(const Grid2D& omega, double eps,
                                                       std::mt19937_64& rng,
                                                       double amp_base = 0.2,
                                                       double amp_delta = 0.05);

}  // namespace eit

#include "eit/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace eit {

namespace {

// ---------------------------------------------------------------------
// config table

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (k) out += ",";
        out += format_double(v[k]);
    }
    return out;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

double parse_double(const std::string& s) {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters in number '" + s + "'");
    return v;
}

long long parse_int(const std::string& s) {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters in integer '" + s + "'");
    return v;
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw std::invalid_argument("expected a boolean, got '" + s + "'");
}

std::vector<double> parse_list(const std::string& s) {
    // an empty value is a valid empty list, so that dump() output round-trips
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_double(item));
    }
    return out;
}

struct ConfigEntry {
    const char* key;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

#define CFG_DOUBLE(key, member)                                                       \
    ConfigEntry{key, [](ExperimentConfig& c, const std::string& v) { c.member = parse_double(v); }, \
                [](const ExperimentConfig& c) { return format_double(c.member); }}
#define CFG_INT(key, member)                                                          \
    ConfigEntry{key, [](ExperimentConfig& c, const std::string& v) { c.member = static_cast<int>(parse_int(v)); }, \
                [](const ExperimentConfig& c) { return std::to_string(c.member); }}
#define CFG_ULL(key, member)                                                          \
    ConfigEntry{key, [](ExperimentConfig& c, const std::string& v) { c.member = static_cast<unsigned long long>(parse_int(v)); }, \
                [](const ExperimentConfig& c) { return std::to_string(c.member); }}
#define CFG_BOOL(key, member)                                                         \
    ConfigEntry{key, [](ExperimentConfig& c, const std::string& v) { c.member = parse_bool(v); }, \
                [](const ExperimentConfig& c) { return c.member ? "true" : "false"; }}
#define CFG_STRING(key, member)                                                       \
    ConfigEntry{key, [](ExperimentConfig& c, const std::string& v) { c.member = v; },  \
                [](const ExperimentConfig& c) { return c.member; }}
#define CFG_LIST(key, member)                                                         \
    ConfigEntry{key, [](ExperimentConfig& c, const std::string& v) { c.member = parse_list(v); }, \
                [](const ExperimentConfig& c) { return format_list(c.member); }}

const std::vector<ConfigEntry>& config_table() {
    static const std::vector<ConfigEntry> table = {
        CFG_DOUBLE("geometry.a", geometry.a),
        CFG_DOUBLE("geometry.b", geometry.b),
        CFG_DOUBLE("geometry.source_radius", geometry.A),
        CFG_DOUBLE("geometry.half_width_x", geometry.c1),
        CFG_DOUBLE("geometry.half_width_y", geometry.c2),
        CFG_DOUBLE("geometry.source_rho", geometry.rho),
        CFG_DOUBLE("geometry.g_radius", geometry.g_radius),
        CFG_DOUBLE("geometry.g_center_x", geometry.g_center_x),
        CFG_DOUBLE("geometry.g_center_y", geometry.g_center_y),
        CFG_DOUBLE("grid.h_omega", h_omega),
        CFG_DOUBLE("grid.h_disk", h_disk),
        CFG_INT("sources.count", source_count),
        CFG_STRING("phantom.kind", phantom_kind),
        CFG_STRING("phantom.image", phantom_image),
        CFG_STRING("phantom.mode", phantom_mode),
        CFG_DOUBLE("phantom.sigma_a", sigma_a),
        CFG_DOUBLE("phantom.blur_cells", blur_cells),
        CFG_DOUBLE("noise.delta", noise_delta),
        CFG_ULL("noise.seed", noise_seed),
        CFG_BOOL("noise.per_angle", noise_per_angle),
        CFG_DOUBLE("convex.lambda", lambda),
        CFG_DOUBLE("convex.alpha", alpha),
        CFG_DOUBLE("convex.epsilon", epsilon),
        CFG_STRING("convex.method", method),
        CFG_DOUBLE("convex.gamma", gamma),
        CFG_DOUBLE("convex.grad_tol", grad_tol),
        CFG_INT("convex.max_iters", max_iters),
        CFG_DOUBLE("qrm.ridge", qrm_ridge),
        CFG_DOUBLE("qrm.rel_tol", qrm_rel_tol),
        CFG_INT("qrm.max_iters", qrm_max_iters),
        CFG_DOUBLE("qrm.grad_tol", qrm_grad_tol),
        CFG_LIST("sweep.lambda", sweep_lambda),
        CFG_LIST("sweep.alpha", sweep_alpha),
        CFG_LIST("sweep.epsilon", sweep_epsilon),
        CFG_DOUBLE("forward.tol", forward_tol),
        CFG_INT("run.threads", threads),
        CFG_STRING("output.dir", output_dir),
        CFG_BOOL("output.write_fields", write_fields),
        CFG_BOOL("output.write_traces", write_traces),
    };
    return table;
}

#undef CFG_DOUBLE
#undef CFG_INT
#undef CFG_ULL
#undef CFG_BOOL
#undef CFG_STRING
#undef CFG_LIST

// ---------------------------------------------------------------------

double symmetric_uniform(std::mt19937_64& gen) {
    return 2.0 * (static_cast<double>(gen() >> 11) * 0x1.0p-53) - 1.0;
}

MinimizeOptions minimize_options(const ExperimentConfig& cfg) {
    MinimizeOptions mo;
    if (cfg.method == "newton") {
        mo.method = MinimizeOptions::Method::Newton;
    } else if (cfg.method == "lbfgs") {
        mo.method = MinimizeOptions::Method::Lbfgs;
    } else if (cfg.method == "gd") {
        mo.method = MinimizeOptions::Method::GradientDescent;
    } else {
        throw std::invalid_argument("unknown convex.method '" + cfg.method + "'");
    }
    mo.gamma = cfg.gamma;
    mo.grad_tol = cfg.grad_tol;
    mo.max_iters = cfg.max_iters;
    return mo;
}

bool nonincreasing(const std::vector<double>& t) {
    for (std::size_t k = 1; k < t.size(); ++k) {
        if (t[k] > t[k - 1]) return false;
    }
    return true;
}

Metrics compute_metrics(const ScalarField& sigma, const Phantom& truth,
                        const std::vector<SliceStat>& slices, bool qrm_ok) {
    const Grid2D& g = sigma.grid;
    Metrics m;
    m.min_sigma = m.max_sigma = sigma.v[0];
    for (double v : sigma.v) {
        m.min_sigma = std::min(m.min_sigma, v);
        m.max_sigma = std::max(m.max_sigma, v);
        m.max_abs_dev = std::max(m.max_abs_dev, std::abs(v - 1.0));
    }
    m.contrast_computed = m.max_sigma;
    m.contrast_true = truth.true_contrast;
    m.contrast_error = std::abs(m.contrast_computed - m.contrast_true);

    double num = 0.0, den = 0.0;
    for (int k = 0; k < g.size(); ++k) {
        const double d = sigma.v[k] - truth.sigma_omega.v[k];
        num += d * d;
        den += truth.sigma_omega.v[k] * truth.sigma_omega.v[k];
    }
    m.rel_l2_sigma = den > 0.0 ? std::sqrt(num / den) : 0.0;

    // sigma-weighted centroid of the hotspot (upper half of the excess)
    if (m.max_sigma - 1.0 >= 0.05) {
        const double thresh = 1.0 + 0.5 * (m.max_sigma - 1.0);
        double wsum = 0.0, cx = 0.0, cy = 0.0;
        for (int j = 0; j < g.ny; ++j) {
            for (int i = 0; i < g.nx; ++i) {
                const double v = sigma.at(i, j);
                if (v >= thresh) {
                    const double w = v - 1.0;
                    wsum += w;
                    cx += w * g.x(i);
                    cy += w * g.y(j);
                }
            }
        }
        if (wsum > 0.0) {
            m.has_centroid = true;
            m.centroid_x = cx / wsum;
            m.centroid_y = cy / wsum;
        }
    }
    m.centroid_error = -1.0;
    if (m.has_centroid && truth.mask_count > 0) {
        m.centroid_error = std::hypot(m.centroid_x - truth.centroid_x,
                                      m.centroid_y - truth.centroid_y);
    }

    m.slices_total = static_cast<int>(slices.size());
    for (const SliceStat& s : slices) {
        if (s.converged) ++m.slices_converged;
        if (s.monotone) ++m.slices_monotone;
        m.max_grad_final = std::max(m.max_grad_final, s.grad_final);
    }
    m.qrm_converged = qrm_ok;
    return m;
}

void write_field_pgm(const ScalarField& f, const std::string& path) {
    double lo = f.v[0], hi = f.v[0];
    for (double v : f.v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    GrayImage img;
    img.width = f.grid.nx;
    img.height = f.grid.ny;
    img.pix.assign(static_cast<std::size_t>(img.width) * img.height, 255);
    if (hi > lo) {
        for (int j = 0; j < f.grid.ny; ++j) {
            for (int i = 0; i < f.grid.nx; ++i) {
                // larger values darker, like the input rasters; row 0 on top
                const double t = (f.at(i, j) - lo) / (hi - lo);
                img.pix[static_cast<std::size_t>(f.grid.ny - 1 - j) * img.width + i] =
                    static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - t)));
            }
        }
    }
    write_pgm(img, path);
}

void metrics_csv_header(std::ostream& out) {
    out << "lambda,alpha,epsilon,contrast_computed,contrast_true,contrast_error,"
           "rel_l2_sigma,max_abs_dev,centroid_x,centroid_y,centroid_error,"
           "min_sigma,max_sigma,slices_converged,slices_monotone,slices_total,"
           "max_grad_final,qrm_converged\n";
}

void metrics_csv_row(std::ostream& out, double lambda, double alpha, double epsilon,
                     const Metrics& m) {
    out << format_double(lambda) << ',' << format_double(alpha) << ','
        << format_double(epsilon) << ',' << format_double(m.contrast_computed) << ','
        << format_double(m.contrast_true) << ',' << format_double(m.contrast_error) << ','
        << format_double(m.rel_l2_sigma) << ',' << format_double(m.max_abs_dev) << ','
        << format_double(m.has_centroid ? m.centroid_x : std::nan("")) << ','
        << format_double(m.has_centroid ? m.centroid_y : std::nan("")) << ','
        << format_double(m.centroid_error) << ',' << format_double(m.min_sigma) << ','
        << format_double(m.max_sigma) << ',' << m.slices_converged << ','
        << m.slices_monotone << ',' << m.slices_total << ','
        << format_double(m.max_grad_final) << ',' << (m.qrm_converged ? 1 : 0) << '\n';
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    return out;
}

void write_manifest(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                    const std::vector<std::pair<std::string, std::string>>& extra) {
    std::ofstream out = open_out(dir / "manifest.txt");
    out << dump_config(cfg);
    for (const auto& [k, v] : extra) out << k << " = " << v << "\n";
}

void write_trace_csv(const std::filesystem::path& path, const Grid2D& og,
                     const std::vector<int>& nodes, const std::vector<double>& values,
                     int n_phi) {
    std::ofstream out = open_out(path);
    out << "x,y";
    for (int n = 0; n < n_phi; ++n) out << ",phi" << n;
    out << "\n";
    for (std::size_t r = 0; r < nodes.size(); ++r) {
        const int i = nodes[r] % og.nx, j = nodes[r] / og.nx;
        out << format_double(og.x(i)) << ',' << format_double(og.y(j));
        for (int n = 0; n < n_phi; ++n) {
            out << ',' << format_double(values[r * n_phi + n]);
        }
        out << "\n";
    }
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected 'key = value'");
        }
        apply_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

void apply_config_value(ExperimentConfig& cfg, const std::string& key,
                        const std::string& value) {
    for (const ConfigEntry& e : config_table()) {
        if (key == e.key) {
            e.set(cfg, value);
            return;
        }
    }
    throw std::invalid_argument("unknown config key '" + key + "'");
}

std::string dump_config(const ExperimentConfig& cfg) {
    std::string out;
    for (const ConfigEntry& e : config_table()) {
        out += e.key;
        out += " = ";
        out += e.get(cfg);
        out += "\n";
    }
    return out;
}

ForwardData generate_forward(const ExperimentConfig& cfg) {
    validate_geometry(cfg.geometry);
    ForwardData d;
    d.disk = build_disk_grid(cfg.geometry, cfg.h_disk);
    d.omega = build_omega_grid(cfg.geometry, cfg.h_omega);
    d.map = locate_omega(d.omega.grid, d.disk.grid);
    d.sources = make_sources(cfg.geometry, cfg.source_count);

    if (cfg.phantom_kind == "uniform") {
        d.phantom = uniform_phantom(d.disk, d.omega);
    } else {
        GrayImage img;
        if (cfg.phantom_kind == "image") {
            if (cfg.phantom_image.empty()) {
                throw std::invalid_argument("phantom.kind = image needs phantom.image");
            }
            img = read_pgm(cfg.phantom_image);
        } else {
            img = builtin_image(cfg.phantom_kind);
        }
        PhantomMode mode;
        if (cfg.phantom_mode == "binary") {
            mode = PhantomMode::Binary;
        } else if (cfg.phantom_mode == "linear") {
            mode = PhantomMode::Linear;
        } else {
            throw std::invalid_argument("unknown phantom.mode '" + cfg.phantom_mode + "'");
        }
        d.phantom = make_phantom(img, mode, cfg.sigma_a, cfg.geometry, d.disk, d.omega,
                                 cfg.blur_cells);
    }

    d.clean = measure_all(d.disk, d.phantom.sigma, d.sources, d.omega, d.map,
                          cfg.forward_tol, cfg.threads);
    return d;
}

InversionResult invert_from_transform(const ExperimentConfig& cfg, const Grid2D& omega,
                                      const TransformedBoundary& tb, const Phantom& truth) {
    if (tb.eps != cfg.epsilon) {
        throw std::invalid_argument("transformed data eps does not match the config");
    }
    ConvexParams prm{cfg.lambda, cfg.alpha, cfg.epsilon};
    const MinimizeOptions mo = minimize_options(cfg);

    InversionResult res;
    res.slices.reserve(tb.n_phi);
    std::vector<ScalarField> ws;
    ws.reserve(tb.n_phi);

    for (int n = 0; n < tb.n_phi; ++n) {
        const PairField p = harmonic_start(omega, cfg.epsilon, extract_slice(tb, n));
        MinimizeResult mr = minimize_single_phi(p, prm, mo);
        SliceStat st;
        st.index = n;
        st.phi = n * tb.h_phi;
        st.j_initial = mr.j_trace.empty() ? 0.0 : mr.j_trace.front();
        st.j_final = mr.j_trace.empty() ? 0.0 : mr.j_trace.back();
        st.grad_final = mr.grad_trace.empty() ? 0.0 : mr.grad_trace.back();
        st.iterations = mr.iterations;
        st.converged = mr.converged;
        st.monotone = nonincreasing(mr.j_trace);
        res.slices.push_back(st);
        ws.push_back(recover_w(mr.pair));
    }

    // recover_a integrates lap w + |grad w|^2, which equals the
    // coefficient of the Schroedinger form lap p + a p = 0 of the log
    // potential. The quasi-reversibility model solves lap V = a V with
    // a = lap(sqrt sigma)/sqrt(sigma), the negation of that coefficient.
    ScalarField a_tilde = recover_a(ws, tb.h_phi);
    res.a = ScalarField(omega, 0.0);
    for (int k = 0; k < omega.size(); ++k) res.a.v[k] = -a_tilde.v[k];

    QrmOptions qo;
    qo.ridge = cfg.qrm_ridge;
    qo.rel_tol = cfg.qrm_rel_tol;
    qo.max_iters = cfg.qrm_max_iters;
    qo.grad_tol = cfg.qrm_grad_tol;
    res.qrm = minimize_K(res.a, qo);
    res.sigma = sigma_from_V(res.qrm.V);
    res.metrics = compute_metrics(res.sigma, truth, res.slices, res.qrm.converged);
    return res;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    RunResult run;
    run.data = generate_forward(cfg);
    run.noisy = run.data.clean;
    add_noise(run.noisy, cfg.noise_delta, cfg.noise_seed, cfg.noise_per_angle);
    const TransformedBoundary tb = log_transform(run.noisy, cfg.epsilon);
    run.inversion = invert_from_transform(cfg, run.data.omega.grid, tb, run.data.phantom);
    run.runtime_seconds = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - t0).count();
    return run;
}

SweepResult run_sweep(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    SweepResult sw;
    sw.data = generate_forward(cfg);
    BoundaryDataset noisy = sw.data.clean;
    add_noise(noisy, cfg.noise_delta, cfg.noise_seed, cfg.noise_per_angle);

    const std::vector<double> eps_list =
        cfg.sweep_epsilon.empty() ? std::vector<double>{cfg.epsilon} : cfg.sweep_epsilon;
    const std::vector<double> alpha_list =
        cfg.sweep_alpha.empty() ? std::vector<double>{cfg.alpha} : cfg.sweep_alpha;
    const std::vector<double> lambda_list =
        cfg.sweep_lambda.empty() ? std::vector<double>{cfg.lambda} : cfg.sweep_lambda;

    for (double eps : eps_list) {
        ExperimentConfig c = cfg;
        c.epsilon = eps;
        const TransformedBoundary tb = log_transform(noisy, eps);
        for (double alpha : alpha_list) {
            for (double lambda : lambda_list) {
                c.alpha = alpha;
                c.lambda = lambda;
                InversionResult inv =
                    invert_from_transform(c, sw.data.omega.grid, tb, sw.data.phantom);
                sw.rows.push_back(SweepRow{lambda, alpha, eps, inv.metrics});
            }
        }
    }
    sw.runtime_seconds = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - t0).count();
    return sw;
}

void write_outputs(const ExperimentConfig& cfg, const RunResult& run) {
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    const Metrics& m = run.inversion.metrics;

    std::vector<std::pair<std::string, std::string>> extra = {
        {"result.n_boundary", std::to_string(run.noisy.n_boundary)},
        {"result.n_gamma", std::to_string(run.noisy.n_gamma)},
        {"result.min_u_omega", format_double(run.data.clean.min_u_omega)},
        {"result.contrast_computed", format_double(m.contrast_computed)},
        {"result.contrast_true", format_double(m.contrast_true)},
        {"result.rel_l2_sigma", format_double(m.rel_l2_sigma)},
        {"result.max_abs_dev", format_double(m.max_abs_dev)},
        {"result.slices_converged", std::to_string(m.slices_converged)},
        {"result.slices_total", std::to_string(m.slices_total)},
        {"result.qrm_converged", m.qrm_converged ? "true" : "false"},
        {"result.runtime_seconds", format_double(run.runtime_seconds)},
    };
    write_manifest(cfg, dir, extra);

    {
        std::ofstream out = open_out(dir / "metrics.csv");
        metrics_csv_header(out);
        metrics_csv_row(out, cfg.lambda, cfg.alpha, cfg.epsilon, m);
    }
    {
        std::ofstream out = open_out(dir / "slices.csv");
        out << "index,phi,j_initial,j_final,grad_final,iterations,converged,monotone\n";
        for (const SliceStat& s : run.inversion.slices) {
            out << s.index << ',' << format_double(s.phi) << ','
                << format_double(s.j_initial) << ',' << format_double(s.j_final) << ','
                << format_double(s.grad_final) << ',' << s.iterations << ','
                << (s.converged ? 1 : 0) << ',' << (s.monotone ? 1 : 0) << "\n";
        }
    }
    if (cfg.write_fields) {
        const Grid2D& g = run.inversion.sigma.grid;
        std::ofstream out = open_out(dir / "fields.csv");
        out << "x,y,sigma_true,sigma_computed,a,V\n";
        for (int j = 0; j < g.ny; ++j) {
            for (int i = 0; i < g.nx; ++i) {
                out << format_double(g.x(i)) << ',' << format_double(g.y(j)) << ','
                    << format_double(run.data.phantom.sigma_omega.at(i, j)) << ','
                    << format_double(run.inversion.sigma.at(i, j)) << ','
                    << format_double(run.inversion.a.at(i, j)) << ','
                    << format_double(run.inversion.qrm.V.at(i, j)) << "\n";
            }
        }
        write_field_pgm(run.inversion.sigma, (dir / "sigma.pgm").string());
        write_field_pgm(run.data.phantom.sigma_omega, (dir / "sigma_true.pgm").string());
    }
    if (cfg.write_traces) {
        write_trace_csv(dir / "g0.csv", run.data.omega.grid,
                        boundary_nodes(run.data.omega.grid), run.noisy.g0, run.noisy.n_phi);
        write_trace_csv(dir / "g1.csv", run.data.omega.grid,
                        gamma_nodes(run.data.omega.grid), run.noisy.g1, run.noisy.n_phi);
    }
}

void write_sweep_outputs(const ExperimentConfig& cfg, const SweepResult& sweep) {
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    write_manifest(cfg, dir, {{"result.sweep_rows", std::to_string(sweep.rows.size())},
                              {"result.runtime_seconds", format_double(sweep.runtime_seconds)}});
    std::ofstream out = open_out(dir / "metrics.csv");
    metrics_csv_header(out);
    for (const SweepRow& row : sweep.rows) {
        metrics_csv_row(out, row.lambda, row.alpha, row.epsilon, row.metrics);
    }
}

void write_forward_outputs(const ExperimentConfig& cfg, const ForwardData& data,
                           const BoundaryDataset& noisy) {
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    write_manifest(cfg, dir,
                   {{"result.n_boundary", std::to_string(noisy.n_boundary)},
                    {"result.n_gamma", std::to_string(noisy.n_gamma)},
                    {"result.min_u_omega", format_double(data.clean.min_u_omega)}});
    write_trace_csv(dir / "g0.csv", data.omega.grid, boundary_nodes(data.omega.grid),
                    noisy.g0, noisy.n_phi);
    write_trace_csv(dir / "g1.csv", data.omega.grid, gamma_nodes(data.omega.grid),
                    noisy.g1, noisy.n_phi);
}

std::pair<PairField, PairField> make_random_probe_pair(const Grid2D& omega, double eps,
                                                       std::mt19937_64& rng,
                                                       double amp_base, double amp_delta) {
    // States are sampled in (r, w) coordinates with s = r - eps * w, the
    // shape of genuine transformed states: w is the O(1) log potential.
    // Drawing r and s independently instead would put (r - s) / eps at
    // O(amp / eps), a region no minimization trajectory ever visits.
    //
    // The base state is the restriction of a globally smooth random field,
    // and its boundary data are the exact trace and one-sided difference of
    // that field. Sampling the ring independently of the interior would put
    // mesh-scale kinks next to the boundary, with residuals of order
    // amp / h^2 that no smooth minimizer exhibits.
    const double lx = omega.h * (omega.nx - 1), ly = omega.h * (omega.ny - 1);
    auto smooth_field = [&](double amp) {
        double coef[4][4];
        for (auto& row : coef)
            for (double& c : row) c = amp * symmetric_uniform(rng);
        std::vector<double> field(static_cast<std::size_t>(omega.size()));
        for (int j = 0; j < omega.ny; ++j) {
            for (int i = 0; i < omega.nx; ++i) {
                const double xi = (omega.x(i) - omega.x0) / lx;
                const double et = (omega.y(j) - omega.y0) / ly;
                const double bx[4] = {1.0, std::sin(std::numbers::pi * xi),
                                      std::cos(std::numbers::pi * xi),
                                      std::sin(2.0 * std::numbers::pi * xi)};
                const double by[4] = {1.0, std::sin(std::numbers::pi * et),
                                      std::cos(std::numbers::pi * et),
                                      std::sin(2.0 * std::numbers::pi * et)};
                double v = 0.0;
                for (int m = 0; m < 4; ++m) {
                    for (int l = 0; l < 4; ++l) {
                        v += coef[m][l] * bx[m] * by[l] / (1.0 + m + l);
                    }
                }
                field[omega.index(i, j)] = v;
            }
        }
        return field;
    };
    const std::vector<double> base_r = smooth_field(amp_base);
    const std::vector<double> base_w = smooth_field(amp_base);

    PhiBoundaryData bc;
    for (const int k : boundary_nodes(omega)) {
        bc.r_dir.push_back(base_r[k]);
        bc.q_dir.push_back(base_r[k] - eps * base_w[k]);
    }
    for (int j = 1; j <= omega.ny - 2; ++j) {
        const int g = omega.index(omega.nx - 1, j);
        const int l = omega.index(omega.nx - 2, j);
        bc.r_neu.push_back((base_r[g] - base_r[l]) / omega.h);
        bc.q_neu.push_back(((base_r[g] - eps * base_w[g]) - (base_r[l] - eps * base_w[l])) /
                           omega.h);
    }

    PairField p1 = make_pair_field(omega, eps, bc);
    for (int k = 0; k < omega.size(); ++k) {
        p1.r[k] = base_r[k];
        p1.s[k] = base_r[k] - eps * base_w[k];
    }
    p1.apply_constraints();
    auto mode_field = [&](double amp) {
        std::vector<double> field(static_cast<std::size_t>(omega.size()), 0.0);
        double coef[3][3];
        for (auto& row : coef)
            for (double& c : row) c = amp * symmetric_uniform(rng);
        for (int j = 1; j <= omega.ny - 2; ++j) {
            for (int i = 1; i <= omega.nx - 3; ++i) {
                const double xi = (omega.x(i) - omega.x0) / lx;
                const double et = (omega.y(j) - omega.y0) / ly;
                double v = 0.0;
                for (int mm = 1; mm <= 3; ++mm) {
                    for (int ll = 1; ll <= 3; ++ll) {
                        v += coef[mm - 1][ll - 1] *
                             std::sin(std::numbers::pi * mm * xi) *
                             std::sin(std::numbers::pi * ll * et);
                    }
                }
                field[omega.index(i, j)] = v;
            }
        }
        return field;
    };
    auto add_state = [&](PairField& p, double amp) {
        const std::vector<double> fr = mode_field(amp);
        const std::vector<double> fw = mode_field(amp);
        for (int k = 0; k < omega.size(); ++k) {
            p.r[k] += fr[k];
            p.s[k] += fr[k] - eps * fw[k];
        }
    };
    PairField p2 = p1;
    add_state(p2, amp_delta);
    return {p1, p2};
}

}  // namespace eit

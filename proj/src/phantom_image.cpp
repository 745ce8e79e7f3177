#include "eit/phantom_image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace eit {

namespace {

// Skips whitespace and '#' comment lines in a PGM header.
int next_header_int(std::istream& in, const std::string& path) {
    for (;;) {
        const int c = in.peek();
        if (c == EOF) throw std::runtime_error("unexpected end of PGM header in " + path);
        if (std::isspace(c)) {
            in.get();
        } else if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else {
            break;
        }
    }
    int value = 0;
    if (!(in >> value)) throw std::runtime_error("malformed PGM header in " + path);
    return value;
}

double dist_to_segment(double px, double py, double ax, double ay, double bx, double by) {
    const double vx = bx - ax, vy = by - ay;
    const double wx = px - ax, wy = py - ay;
    const double vv = vx * vx + vy * vy;
    double t = vv > 0.0 ? (wx * vx + wy * vy) / vv : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(px - (ax + t * vx), py - (ay + t * vy));
}

bool in_ellipse(double u, double v, double cu, double cv, double ru, double rv,
                double rot_deg = 0.0) {
    const double c = std::cos(rot_deg * std::acos(-1.0) / 180.0);
    const double s = std::sin(rot_deg * std::acos(-1.0) / 180.0);
    const double du = u - cu, dv = v - cv;
    const double a = (c * du + s * dv) / ru;
    const double b = (-s * du + c * dv) / rv;
    return a * a + b * b <= 1.0;
}

// Capital A: two legs meeting at the apex plus a crossbar, black on white.
std::uint8_t draw_letter_a(double u, double v) {
    const double hw = 0.05;
    const bool leg1 = dist_to_segment(u, v, 0.5, 0.20, 0.32, 0.80) <= hw;
    const bool leg2 = dist_to_segment(u, v, 0.5, 0.20, 0.68, 0.80) <= hw;
    const bool bar = dist_to_segment(u, v, 0.41, 0.60, 0.59, 0.60) <= 0.045;
    return (leg1 || leg2 || bar) ? 0 : 255;
}

// Capital Omega: an annulus with a bottom gap and two feet.
std::uint8_t draw_letter_omega(double u, double v) {
    const double cu = 0.5, cv = 0.44;
    const double du = u - cu, dv = v - cv;
    const double d = std::hypot(du, dv);
    bool ring = d >= 0.14 && d <= 0.26;
    if (ring && dv > 0.0 && dv / d > 0.83) ring = false;  // gap toward the feet
    const bool foot1 = u >= 0.27 && u <= 0.42 && v >= 0.70 && v <= 0.80;
    const bool foot2 = u >= 0.58 && u <= 0.73 && v >= 0.70 && v <= 0.80;
    return (ring || foot1 || foot2) ? 0 : 255;
}

std::uint8_t draw_disk(double u, double v) {
    const double d = std::hypot(u - 0.5, v - 0.5);
    return d <= 0.22 ? 0 : 255;
}

// Abdominal-style grayscale surrogates: a bright body ellipse containing
// darker organ-like blobs. Darker means more conductive in Linear mode.
std::uint8_t draw_scan(double u, double v, bool variant_b) {
    if (!in_ellipse(u, v, 0.5, 0.52, 0.30, 0.24)) return 255;
    std::uint8_t value = 150;  // body background
    if (!variant_b) {
        if (in_ellipse(u, v, 0.45, 0.40, 0.08, 0.05, 10.0)) value = 110;   // stomach
        if (in_ellipse(u, v, 0.61, 0.41, 0.09, 0.07, -15.0)) value = 90;   // liver
        if (in_ellipse(u, v, 0.38, 0.58, 0.055, 0.035, 25.0)) value = 60;  // kidney
        if (in_ellipse(u, v, 0.62, 0.58, 0.055, 0.035, -25.0)) value = 60; // kidney
        if (std::hypot(u - 0.5, v - 0.70) <= 0.05) value = 40;             // spine
    } else {
        if (in_ellipse(u, v, 0.42, 0.44, 0.10, 0.06, -20.0)) value = 115;
        if (in_ellipse(u, v, 0.60, 0.45, 0.07, 0.06, 30.0)) value = 85;
        if (in_ellipse(u, v, 0.36, 0.60, 0.05, 0.04, 40.0)) value = 55;
        if (in_ellipse(u, v, 0.64, 0.59, 0.06, 0.035, -35.0)) value = 65;
        if (std::hypot(u - 0.52, v - 0.71) <= 0.045) value = 40;
    }
    return value;
}

}  // namespace

GrayImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open PGM file " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5" && magic != "P2") {
        throw std::runtime_error("unsupported PGM magic '" + magic + "' in " + path);
    }
    GrayImage img;
    img.width = next_header_int(in, path);
    img.height = next_header_int(in, path);
    const int maxval = next_header_int(in, path);
    if (img.width <= 0 || img.height <= 0 || maxval <= 0 || maxval > 255) {
        throw std::runtime_error("unsupported PGM dimensions or maxval in " + path);
    }
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    img.pix.resize(n);
    if (magic == "P5") {
        in.get();  // single whitespace after maxval
        in.read(reinterpret_cast<char*>(img.pix.data()), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n) {
            throw std::runtime_error("truncated PGM pixel data in " + path);
        }
    } else {
        for (std::size_t k = 0; k < n; ++k) {
            int value = 0;
            if (!(in >> value) || value < 0 || value > maxval) {
                throw std::runtime_error("malformed PGM pixel data in " + path);
            }
            img.pix[k] = static_cast<std::uint8_t>(value);
        }
    }
    return img;
}

void write_pgm(const GrayImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write PGM file " + path);
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pix.data()),
              static_cast<std::streamsize>(img.pix.size()));
    if (!out) throw std::runtime_error("short write to PGM file " + path);
}

GrayImage builtin_image(const std::string& name, int size) {
    if (size < 16) throw std::invalid_argument("builtin image size too small");
    GrayImage img;
    img.width = img.height = size;
    img.pix.resize(static_cast<std::size_t>(size) * size);
    for (int row = 0; row < size; ++row) {
        const double v = (row + 0.5) / size;
        for (int col = 0; col < size; ++col) {
            const double u = (col + 0.5) / size;
            std::uint8_t value = 255;
            if (name == "letter_a") {
                value = draw_letter_a(u, v);
            } else if (name == "letter_omega") {
                value = draw_letter_omega(u, v);
            } else if (name == "disk") {
                value = draw_disk(u, v);
            } else if (name == "scan_a") {
                value = draw_scan(u, v, false);
            } else if (name == "scan_b") {
                value = draw_scan(u, v, true);
            } else {
                throw std::invalid_argument("unknown builtin image '" + name + "'");
            }
            img.pix[static_cast<std::size_t>(row) * size + col] = value;
        }
    }
    return img;
}

Phantom make_phantom(const GrayImage& img, PhantomMode mode, double sigma_a,
                     const GeometryConfig& geo, const MaskedGrid& disk,
                     const MaskedGrid& omega, double blur_sigma_cells) {
    if (!(sigma_a >= 1.0)) throw std::invalid_argument("sigma_a must be >= 1");
    if (img.width <= 0 || img.height <= 0) throw std::invalid_argument("empty phantom image");
    const Grid2D& dg = disk.grid;
    const Grid2D& og = omega.grid;

    // Value range for Linear mode; a flat image maps to background only.
    std::uint8_t vmin = 255, vmax = 0;
    for (std::uint8_t p : img.pix) {
        vmin = std::min(vmin, p);
        vmax = std::max(vmax, p);
    }
    bool image_marks_inclusion;
    if (mode == PhantomMode::Binary) {
        image_marks_inclusion = vmin < 128;
    } else {
        image_marks_inclusion = vmax > vmin;
    }

    const double x_lo = geo.a - geo.c1, x_hi = geo.a + geo.c1;
    const double y_lo = geo.b - geo.c2, y_hi = geo.b + geo.c2;

    // Raw (unsmoothed) excess sigma - 1 on the disk grid.
    std::vector<double> raw(dg.size(), 0.0);
    int raw_count = 0;
    for (int j = 0; j < dg.ny; ++j) {
        const double y = dg.y(j);
        if (y < y_lo || y > y_hi) continue;
        // row 0 is the top of the image, y = y_hi
        int row = static_cast<int>((y_hi - y) / (y_hi - y_lo) * img.height);
        row = std::clamp(row, 0, img.height - 1);
        for (int i = 0; i < dg.nx; ++i) {
            const double x = dg.x(i);
            if (x < x_lo || x > x_hi) continue;
            int col = static_cast<int>((x - x_lo) / (x_hi - x_lo) * img.width);
            col = std::clamp(col, 0, img.width - 1);
            const std::uint8_t p = img.at(col, row);
            double excess = 0.0;
            if (mode == PhantomMode::Binary) {
                excess = p < 128 ? sigma_a - 1.0 : 0.0;
            } else if (vmax > vmin) {
                excess = (sigma_a - 1.0) * double(vmax - p) / double(vmax - vmin);
            }
            if (excess > 0.0) {
                raw[dg.index(i, j)] = excess;
                ++raw_count;
            }
        }
    }
    if (image_marks_inclusion && raw_count == 0) {
        throw std::invalid_argument("phantom inclusion does not intersect Omega");
    }

    // The truncated Gaussian support must not push the inclusion through
    // the Omega boundary: sigma has to stay 1 outside Omega.
    const int radius = static_cast<int>(std::ceil(4.0 * blur_sigma_cells));
    const double margin = (radius + 1) * dg.h;
    for (int j = 0; j < dg.ny; ++j) {
        for (int i = 0; i < dg.nx; ++i) {
            if (raw[dg.index(i, j)] <= 0.0) continue;
            const double x = dg.x(i), y = dg.y(j);
            const double clearance =
                std::min(std::min(x - x_lo, x_hi - x), std::min(y - y_lo, y_hi - y));
            if (clearance < margin) {
                throw std::invalid_argument(
                    "phantom inclusion too close to the Omega boundary for the smoothing width");
            }
        }
    }

    // Separable truncated Gaussian blur of the excess.
    std::vector<double> kernel(2 * radius + 1);
    double ksum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        kernel[k + radius] = std::exp(-0.5 * (k / blur_sigma_cells) * (k / blur_sigma_cells));
        ksum += kernel[k + radius];
    }
    for (double& w : kernel) w /= ksum;
    std::vector<double> tmp(dg.size(), 0.0), smooth(dg.size(), 0.0);
    for (int j = 0; j < dg.ny; ++j) {
        for (int i = 0; i < dg.nx; ++i) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                const int ii = i + k;
                if (ii >= 0 && ii < dg.nx) acc += kernel[k + radius] * raw[dg.index(ii, j)];
            }
            tmp[dg.index(i, j)] = acc;
        }
    }
    for (int j = 0; j < dg.ny; ++j) {
        for (int i = 0; i < dg.nx; ++i) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                const int jj = j + k;
                if (jj >= 0 && jj < dg.ny) acc += kernel[k + radius] * tmp[dg.index(i, jj)];
            }
            smooth[dg.index(i, j)] = acc;
        }
    }

    Phantom ph;
    ph.sigma = ScalarField(dg, 1.0);
    for (int m = 0; m < dg.size(); ++m) ph.sigma.v[m] = std::max(1.0, 1.0 + smooth[m]);
    ph.sigma_a = sigma_a;

    const OmegaInDisk map = locate_omega(og, dg);
    ph.sigma_omega = ScalarField(og, 1.0);
    ph.mask_omega.assign(og.size(), 0);
    const double half = 0.5 * (sigma_a - 1.0);
    double cx = 0.0, cy = 0.0;
    for (int j = 0; j < og.ny; ++j) {
        for (int i = 0; i < og.nx; ++i) {
            const int dn = dg.index(map.ix0 + map.k * i, map.iy0 + map.k * j);
            ph.sigma_omega.at(i, j) = ph.sigma.v[dn];
            ph.true_contrast = std::max(ph.true_contrast, ph.sigma.v[dn]);
            if (raw[dn] > half) {
                ph.mask_omega[og.index(i, j)] = 1;
                ++ph.mask_count;
                cx += og.x(i);
                cy += og.y(j);
            }
        }
    }
    if (ph.mask_count > 0) {
        ph.centroid_x = cx / ph.mask_count;
        ph.centroid_y = cy / ph.mask_count;
    }
    return ph;
}

Phantom uniform_phantom(const MaskedGrid& disk, const MaskedGrid& omega) {
    Phantom ph;
    ph.sigma = ScalarField(disk.grid, 1.0);
    ph.sigma_omega = ScalarField(omega.grid, 1.0);
    ph.mask_omega.assign(omega.grid.size(), 0);
    ph.sigma_a = 1.0;
    ph.true_contrast = 1.0;
    return ph;
}

}  // namespace eit

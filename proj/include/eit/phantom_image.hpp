#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eit/field.hpp"
#include "eit/geometry.hpp"

namespace eit {

/// 8-bit grayscale raster, row 0 at the top as stored in PGM files.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pix;  ///< row-major, top row first

    std::uint8_t at(int col, int row) const { return pix[static_cast<std::size_t>(row) * width + col]; }
};

/// Reads a PGM file (binary P5 or ASCII P2, maxval <= 255). Throws
/// std::runtime_error on malformed or unsupported input.
GrayImage read_pgm(const std::string& path);

/// Writes binary P5.
void write_pgm(const GrayImage& img, const std::string& path);

/// Built-in test rasters, drawn procedurally at the given size:
/// "letter_a", "letter_omega" and "disk" are black-on-white binary shapes;
/// "scan_a" and "scan_b" are grayscale abdominal-style compositions of
/// ellipses. Throws std::invalid_argument for unknown names.
GrayImage builtin_image(const std::string& name, int size = 160);

/// Value-to-conductivity mapping for rasterized phantoms.
enum class PhantomMode {
    Binary,  ///< pixel < 128 becomes sigma_a, the rest background 1
    Linear,  ///< image value range maps linearly onto [1, sigma_a], dark = high
};

/// Ground-truth conductivity for synthetic data generation.
struct Phantom {
    ScalarField sigma;                     ///< on the disk grid, 1 outside Omega
    ScalarField sigma_omega;               ///< restriction to the Omega grid
    std::vector<std::uint8_t> mask_omega;  ///< 1 on Omega nodes inside the inclusion
    double sigma_a = 1.0;                  ///< nominal inclusion conductivity
    double true_contrast = 1.0;            ///< max of sigma_omega (after smoothing)
    double centroid_x = 0.0;               ///< centroid of mask_omega (0 if empty)
    double centroid_y = 0.0;
    int mask_count = 0;                    ///< number of masked Omega nodes
};

/// Rasterizes an image onto Omega and smooths it into a conductivity on
/// the disk grid. The image covers the closed Omega rectangle (pixel
/// centers, nearest sampling, row 0 at the top edge y = b + c2). The raw
/// map is blurred with a Gaussian of blur_sigma_cells disk cells,
/// truncated at four standard deviations, then clamped to >= 1. Throws if
/// the image marks an inclusion but no inclusion node lands in Omega, or
/// if the inclusion comes closer to the Omega boundary than the blur
/// support (the phantom must stay 1 near and outside the boundary).
/// A uniform image yields the sigma == 1 phantom.
Phantom make_phantom(const GrayImage& img, PhantomMode mode, double sigma_a,
                     const GeometryConfig& geo, const MaskedGrid& disk,
                     const MaskedGrid& omega, double blur_sigma_cells = 2.0);

/// The sigma == 1 phantom (empty inclusion).
Phantom uniform_phantom(const MaskedGrid& disk, const MaskedGrid& omega);

}  // namespace eit

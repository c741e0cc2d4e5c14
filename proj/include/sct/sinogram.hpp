#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sct {

/// Multi-bin measurement: post-log line integrals, the raw counts they came
/// from, and a per-cell weight scale (1 valid, 0 masked, fractional for
/// repaired cells). All planes are bin-major: `plane[bin * n_rays() + ray]`.
struct SpectralSinogram {
    int n_bins = 0;
    int n_views = 0;
    int n_channels = 0;
    std::vector<double> i0;             // blank-scan counts per bin
    std::vector<double> line_integrals; // y
    std::vector<double> counts;         // c
    std::vector<double> weight_scale;

    SpectralSinogram() = default;
    SpectralSinogram(int bins, int views, int channels);

    std::size_t n_rays() const { return static_cast<std::size_t>(n_views) * n_channels; }
    std::size_t cells() const { return n_rays() * n_bins; }
    std::size_t index(int bin, std::size_t ray) const { return bin * n_rays() + ray; }

    std::span<const double> bin_integrals(int bin) const {
        return std::span(line_integrals).subspan(bin * n_rays(), n_rays());
    }

    /// Throws ShapeError/DomainError on inconsistent planes or negative counts.
    void validate() const;
};

/// Keep a single energy bin.
SpectralSinogram select_bin(const SpectralSinogram& s, int bin);

/// Diagonal data weights d_en, bin-major like the sinogram planes.
struct WeightMatrix {
    int n_bins = 0;
    std::size_t n_rays = 0;
    std::vector<double> d;

    double at(int bin, std::size_t ray) const { return d[bin * n_rays + ray]; }
};

/// d_en = c_en * weight_scale_en: raw counts approximate the inverse
/// variance of post-log Poisson data; masked cells get zero weight.
WeightMatrix make_weights(const SpectralSinogram& s);

} // namespace sct

#include "sct/sinogram.hpp"

#include <cmath>
#include <string>

#include "sct/error.hpp"

namespace sct {

SpectralSinogram::SpectralSinogram(int bins, int views, int channels)
    : n_bins(bins), n_views(views), n_channels(channels) {
    if (bins < 1 || views < 1 || channels < 1) throw ShapeError("sinogram: dimensions must be positive");
    i0.assign(static_cast<std::size_t>(bins), 0.0);
    line_integrals.assign(cells(), 0.0);
    counts.assign(cells(), 0.0);
    weight_scale.assign(cells(), 1.0);
}

void SpectralSinogram::validate() const {
    if (n_bins < 1 || n_views < 1 || n_channels < 1) throw ShapeError("sinogram: dimensions must be positive");
    if (i0.size() != static_cast<std::size_t>(n_bins) || line_integrals.size() != cells() ||
        counts.size() != cells() || weight_scale.size() != cells()) {
        throw ShapeError("sinogram: plane sizes do not match header dimensions");
    }
    for (std::size_t k = 0; k < cells(); ++k) {
        if (!(counts[k] >= 0.0)) throw DomainError("sinogram: negative or NaN count at cell " + std::to_string(k));
        if (!(weight_scale[k] >= 0.0)) throw DomainError("sinogram: invalid weight scale at cell " + std::to_string(k));
        if (weight_scale[k] > 0.0 && !std::isfinite(line_integrals[k])) {
            throw DomainError("sinogram: non-finite line integral at unmasked cell " + std::to_string(k));
        }
    }
}

SpectralSinogram select_bin(const SpectralSinogram& s, int bin) {
    if (bin < 0 || bin >= s.n_bins) throw std::out_of_range("sinogram bin " + std::to_string(bin) + " out of range");
    SpectralSinogram out(1, s.n_views, s.n_channels);
    out.i0[0] = s.i0[static_cast<std::size_t>(bin)];
    const auto n = s.n_rays();
    const auto off = static_cast<std::ptrdiff_t>(bin * n);
    const auto len = static_cast<std::ptrdiff_t>(n);
    std::copy(s.line_integrals.begin() + off, s.line_integrals.begin() + off + len, out.line_integrals.begin());
    std::copy(s.counts.begin() + off, s.counts.begin() + off + len, out.counts.begin());
    std::copy(s.weight_scale.begin() + off, s.weight_scale.begin() + off + len, out.weight_scale.begin());
    return out;
}

WeightMatrix make_weights(const SpectralSinogram& s) {
    WeightMatrix w{s.n_bins, s.n_rays(), std::vector<double>(s.cells())};
    for (std::size_t k = 0; k < s.cells(); ++k) w.d[k] = s.counts[k] * s.weight_scale[k];
    return w;
}

} // namespace sct

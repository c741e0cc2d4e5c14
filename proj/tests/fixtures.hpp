#pragma once

#include <random>
#include <string>
#include <vector>

#include "sct/geometry.hpp"
#include "sct/icd.hpp"
#include "sct/image.hpp"
#include "sct/sinogram.hpp"
#include "sct/spectral_model.hpp"
#include "sct/system_matrix.hpp"

namespace fixture {

inline sct::FanBeamGeometry grid(int n, int views, int channels) {
    sct::FanBeamGeometry g;
    g.image_n = n;
    g.voxel_mm = 1.0;
    g.fov_mm = n;
    g.n_views = views;
    g.n_channels = channels;
    g.det_pitch_mm = 1.25 * n / channels * g.source_det_mm / g.source_iso_mm;
    return g;
}

inline sct::MixingMatrix mixing(const Eigen::MatrixXd& lac) {
    sct::MixingMatrix m;
    m.lac = lac;
    for (Eigen::Index e = 0; e <= lac.rows(); ++e) m.bin_edges_kev.push_back(10.0 + 10.0 * e);
    for (Eigen::Index k = 0; k < lac.cols(); ++k) m.materials.push_back("m" + std::to_string(k));
    return m;
}

// Feasible random fractions inside the FOV disk, zero outside.
inline sct::MaterialImage random_truth(const sct::FanBeamGeometry& g, const sct::MixingMatrix& mix, std::uint64_t seed,
                                       double max_total = 0.9) {
    sct::MaterialImage img(g.image_n, mix.materials, g.voxel_mm);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto nm = static_cast<int>(mix.n_materials());
    for (std::size_t l = 0; l < img.n_voxels(); ++l) {
        const auto c = g.voxel_center(l);
        if (c.x * c.x + c.y * c.y > 0.16 * g.fov_mm * g.fov_mm) continue;
        double total = 0.0;
        std::vector<double> v(static_cast<std::size_t>(nm));
        for (double& x : v) total += x = u(rng);
        const double scale = max_total * u(rng) / total;
        for (int m = 0; m < nm; ++m) img.at(l, m) = v[m] * scale;
    }
    return img;
}

struct Problem {
    sct::FanBeamGeometry geom;
    sct::SystemMatrix a;
    sct::MixingMatrix mix;
    sct::MaterialImage truth;
    sct::SpectralSinogram sino;
    sct::WeightMatrix w;
};

// Noiseless data y_e = A (M x)_e with weights drawn from [lo, hi].
inline Problem noiseless(const sct::FanBeamGeometry& g, const sct::MixingMatrix& mix, const sct::MaterialImage& truth,
                         double lo = 500.0, double hi = 1500.0, std::uint64_t seed = 1) {
    Problem p{g, sct::build_system_matrix(g), mix, truth, {}, {}};
    const auto nb = static_cast<int>(mix.n_bins());
    p.sino = sct::SpectralSinogram(nb, g.n_views, g.n_channels);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    for (int e = 0; e < nb; ++e) {
        std::vector<double> lac(truth.n_voxels(), 0.0);
        for (std::size_t l = 0; l < lac.size(); ++l)
            for (int m = 0; m < truth.n_components; ++m) lac[l] += mix.lac(e, m) * truth.at(l, m);
        const auto proj = sct::forward_project(p.a, lac);
        p.sino.i0[static_cast<std::size_t>(e)] = hi;
        for (std::size_t r = 0; r < proj.size(); ++r) {
            p.sino.line_integrals[p.sino.index(e, r)] = proj[r];
            p.sino.counts[p.sino.index(e, r)] = u(rng);
        }
    }
    p.w = sct::make_weights(p.sino);
    return p;
}

inline sct::RegularizerConfig no_prior() {
    sct::RegularizerConfig r;
    r.sigma = std::numeric_limits<double>::infinity();
    return r;
}

inline sct::RegularizerConfig prior(double sigma) {
    sct::RegularizerConfig r;
    r.sigma = sigma;
    return r;
}

} // namespace fixture

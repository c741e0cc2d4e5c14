#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sct/image.hpp"
#include "sct/sinogram.hpp"
#include "sct/spectral_model.hpp"
#include "sct/system_matrix.hpp"

namespace sct {

/// One solution-filled tube. `density_override` replaces the solute's
/// configured density for this tube only.
struct Tube {
    std::string label;
    double center_x_mm = 0.0;
    double center_y_mm = 0.0;
    double radius_mm = 0.0;
    std::string solute;
    double concentration_mg_per_ml = 0.0;
    std::optional<double> density_override;
};

/// Water cylinder holding non-overlapping tubes on an image grid.
struct PhantomSpec {
    std::vector<Tube> tubes;
    std::string complement = "water"; // fills each solution and the background
    double background_radius_mm = 27.0;
    int image_n = 64;
    double voxel_mm = 0.95;
};

enum class ScanSet { calibration, test };

/// Seven-tube layout (water, iodine high/low, gadolinium high/low, calcium
/// high/low) with the concentrations of the calibration or test scan.
PhantomSpec reference_phantom_spec(ScanSet scan, int image_n = 64, double voxel_mm = 0.95);
/// Densities consistent with the reference ground-truth fractions.
std::vector<MaterialSpec> reference_materials();

/// Volume-fraction image with one component per entry of `material_order`.
/// Tube voxels (by voxel centre) get solute = conc / density and
/// complement = 1 - solute; the rest of the cylinder is pure complement.
MaterialImage build_phantom(const PhantomSpec& spec, std::span<const MaterialSpec> materials,
                            const std::vector<std::string>& material_order);

/// Centred square patch of (2 * half_width + 1)^2 voxels.
struct Roi {
    std::string label;
    int center_row = 0;
    int center_col = 0;
    int half_width = 0;
};

/// One patch per tube, centred on the voxel nearest the tube centre.
/// Without `half_width` the patch spans about half the tube diameter.
/// Throws DomainError if a patch is not strictly inside its tube.
std::vector<Roi> tube_rois(const PhantomSpec& spec, std::optional<int> half_width = std::nullopt);

struct RoiTable {
    std::vector<std::string> rois;
    std::vector<std::string> materials;
    std::vector<std::vector<double>> means; // [roi][material]
};

RoiTable roi_stats(const MaterialImage& img, std::span<const Roi> rois);

/// Percent error 100 |est - truth| / truth; nullopt where truth is zero.
std::vector<std::vector<std::optional<double>>> error_table(const RoiTable& est, const RoiTable& truth);

enum class NoiseMode { poisson, noiseless };

struct CountData {
    int n_bins = 0;
    std::size_t n_rays = 0;
    std::vector<double> i0;
    std::vector<double> expected; // bin-major
    std::vector<double> sampled;
    std::vector<double> weight_scale;
};

/// Beer-Lambert per bin: expected = I0_e exp(-[A (M x^T)^T]_en). Poisson
/// draws use one counter-seeded stream per cell, so results depend only on
/// `seed` and not on `threads`. y = ln(I0 / max(count, 1)) and weights are
/// the sampled counts; in noiseless mode sampled = expected exactly.
std::pair<CountData, SpectralSinogram> simulate_counts(const MaterialImage& phantom, const MixingMatrix& mix,
                                                       const SystemMatrix& a, int n_views, int n_channels,
                                                       std::span<const double> i0, std::uint64_t seed,
                                                       NoiseMode mode = NoiseMode::poisson, int threads = 1);

/// Mean noiseless transmission exp(-line integral) over every bin and ray.
double mean_transmission(const MaterialImage& phantom, const MixingMatrix& mix, const SystemMatrix& a);

/// Zero the listed detector channels in every view and bin and mask them.
SpectralSinogram inject_defects(const SpectralSinogram& sino, std::span<const int> channels);
/// Repair masked cells by per-view linear interpolation across channels
/// (nearest valid value at the detector edge); repaired cells get
/// `repaired_weight` as their weight scale. Throws DomainError if a whole
/// detector row is masked.
SpectralSinogram correct_defects(const SpectralSinogram& sino, double repaired_weight = 0.5);
/// round(rate * n_channels) distinct channels chosen from `seed`.
std::vector<int> choose_defective_channels(int n_channels, double defect_rate, std::uint64_t seed);
SpectralSinogram inject_and_correct_defects(const SpectralSinogram& sino, double defect_rate, std::uint64_t seed,
                                            double repaired_weight = 0.5);

} // namespace sct

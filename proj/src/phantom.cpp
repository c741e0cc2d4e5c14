#include "sct/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <thread>

#include <fmt/format.h>

#include "sct/error.hpp"
#include "sct/rng.hpp"

namespace sct {

PhantomSpec reference_phantom_spec(ScanSet scan, int image_n, double voxel_mm) {
    struct Entry {
        const char* label;
        const char* solute;
        double calibration;
        double test;
        std::optional<double> density;
    };
    // mg/mL. The two calcium rows imply different densities for the
    // (unstated) calcium compound, so the low tube carries its own.
    const Entry entries[] = {
        {"ROI1", "water", 0.0, 0.0, std::nullopt},
        {"ROI2", "iodine", 15.86, 9.52, std::nullopt},
        {"ROI3", "iodine", 7.93, 4.76, std::nullopt},
        {"ROI4", "gadolinium", 19.66, 11.79, std::nullopt},
        {"ROI5", "gadolinium", 9.83, 5.90, std::nullopt},
        {"ROI6", "calcium", 146.29, 87.77, std::nullopt},
        {"ROI7", "calcium", 73.14, 43.89, 1594.0},
    };

    PhantomSpec spec;
    spec.image_n = image_n;
    spec.voxel_mm = voxel_mm;
    spec.background_radius_mm = 27.0;
    const double ring = 17.0;
    for (int k = 0; k < 7; ++k) {
        const double theta = std::numbers::pi / 2 + 2.0 * std::numbers::pi * k / 7.0;
        Tube t;
        t.label = entries[k].label;
        t.solute = entries[k].solute;
        t.center_x_mm = ring * std::cos(theta);
        t.center_y_mm = ring * std::sin(theta);
        t.radius_mm = 6.0;
        t.concentration_mg_per_ml = scan == ScanSet::calibration ? entries[k].calibration : entries[k].test;
        t.density_override = entries[k].density;
        spec.tubes.push_back(t);
    }
    return spec;
}

std::vector<MaterialSpec> reference_materials() {
    return {
        {"water", 1000.0, MaterialRole::solvent},
        {"iodine", 4940.0, MaterialRole::contrast},
        {"gadolinium", 7910.0, MaterialRole::contrast},
        {"calcium", 1638.0, MaterialRole::mineral},
    };
}

namespace {

const MaterialSpec& find_material(std::span<const MaterialSpec> mats, const std::string& name) {
    for (const auto& m : mats) {
        if (m.name == name) return m;
    }
    throw ConfigError("unknown material '" + name + "'");
}

int order_index(const std::vector<std::string>& order, const std::string& name) {
    const auto it = std::find(order.begin(), order.end(), name);
    if (it == order.end()) throw ConfigError("material '" + name + "' is not among the reconstructed materials");
    return static_cast<int>(it - order.begin());
}

double pixel_center(int idx, int n, double voxel) { return (idx - 0.5 * (n - 1)) * voxel; }

} // namespace

MaterialImage build_phantom(const PhantomSpec& spec, std::span<const MaterialSpec> materials,
                            const std::vector<std::string>& material_order) {
    if (spec.image_n < 1 || !(spec.voxel_mm > 0.0)) throw ConfigError("phantom: invalid grid");
    if (!(spec.background_radius_mm > 0.0)) throw ConfigError("phantom: background radius must be > 0");
    const int complement = order_index(material_order, spec.complement);

    struct Placed {
        const Tube* tube;
        int solute_idx;
        double fraction;
    };
    std::vector<Placed> placed;
    for (std::size_t i = 0; i < spec.tubes.size(); ++i) {
        const Tube& t = spec.tubes[i];
        if (!(t.radius_mm > 0.0)) throw ConfigError("phantom: tube " + t.label + " needs a positive radius");
        if (std::hypot(t.center_x_mm, t.center_y_mm) + t.radius_mm > spec.background_radius_mm) {
            throw ConfigError("phantom: tube " + t.label + " extends beyond the background cylinder");
        }
        for (std::size_t j = 0; j < i; ++j) {
            const Tube& o = spec.tubes[j];
            if (std::hypot(t.center_x_mm - o.center_x_mm, t.center_y_mm - o.center_y_mm) < t.radius_mm + o.radius_mm) {
                throw ConfigError("phantom: tubes " + o.label + " and " + t.label + " overlap");
            }
        }
        MaterialSpec mat = find_material(materials, t.solute);
        if (t.density_override) mat.density_mg_per_ml = *t.density_override;
        const double f = t.solute == spec.complement ? 0.0 : concentration_to_volume_fraction(t.concentration_mg_per_ml, mat);
        placed.push_back({&t, order_index(material_order, t.solute), f});
    }

    MaterialImage img(spec.image_n, material_order, spec.voxel_mm);
    const double r2 = spec.background_radius_mm * spec.background_radius_mm;
    for (int row = 0; row < spec.image_n; ++row) {
        const double y = pixel_center(row, spec.image_n, spec.voxel_mm);
        for (int col = 0; col < spec.image_n; ++col) {
            const double x = pixel_center(col, spec.image_n, spec.voxel_mm);
            if (x * x + y * y > r2) continue;
            const auto l = static_cast<std::size_t>(row) * spec.image_n + col;
            img.at(l, complement) = 1.0;
            for (const auto& p : placed) {
                const double dx = x - p.tube->center_x_mm;
                const double dy = y - p.tube->center_y_mm;
                if (dx * dx + dy * dy > p.tube->radius_mm * p.tube->radius_mm) continue;
                if (p.fraction > 0.0) {
                    img.at(l, p.solute_idx) = p.fraction;
                    img.at(l, complement) = 1.0 - p.fraction;
                }
                break;
            }
        }
    }
    return img;
}

std::vector<Roi> tube_rois(const PhantomSpec& spec, std::optional<int> half_width) {
    std::vector<Roi> rois;
    const int n = spec.image_n;
    const double v = spec.voxel_mm;
    for (const auto& t : spec.tubes) {
        Roi roi;
        roi.label = t.label;
        roi.center_col = static_cast<int>(std::lround(t.center_x_mm / v + 0.5 * (n - 1)));
        roi.center_row = static_cast<int>(std::lround(t.center_y_mm / v + 0.5 * (n - 1)));
        roi.half_width = half_width ? *half_width
                                    : std::max(0, static_cast<int>(std::lround((t.radius_mm / v - 1.0) / 2.0)));
        if (roi.half_width < 0) throw DomainError("ROI half-width must be >= 0");
        if (roi.center_row - roi.half_width < 0 || roi.center_row + roi.half_width >= n ||
            roi.center_col - roi.half_width < 0 || roi.center_col + roi.half_width >= n) {
            throw DomainError("ROI " + roi.label + " leaves the image grid");
        }
        const double x_lo = pixel_center(roi.center_col - roi.half_width, n, v) - 0.5 * v;
        const double x_hi = pixel_center(roi.center_col + roi.half_width, n, v) + 0.5 * v;
        const double y_lo = pixel_center(roi.center_row - roi.half_width, n, v) - 0.5 * v;
        const double y_hi = pixel_center(roi.center_row + roi.half_width, n, v) + 0.5 * v;
        for (double x : {x_lo, x_hi}) {
            for (double y : {y_lo, y_hi}) {
                if (std::hypot(x - t.center_x_mm, y - t.center_y_mm) >= t.radius_mm) {
                    throw DomainError("ROI " + roi.label + " is not strictly inside its tube");
                }
            }
        }
        rois.push_back(roi);
    }
    return rois;
}

RoiTable roi_stats(const MaterialImage& img, std::span<const Roi> rois) {
    RoiTable table;
    table.materials = img.names;
    for (const auto& roi : rois) {
        std::vector<double> sums(img.stride(), 0.0);
        std::size_t count = 0;
        for (int r = roi.center_row - roi.half_width; r <= roi.center_row + roi.half_width; ++r) {
            for (int c = roi.center_col - roi.half_width; c <= roi.center_col + roi.half_width; ++c) {
                if (r < 0 || c < 0 || r >= img.image_n || c >= img.image_n) {
                    throw std::out_of_range("ROI " + roi.label + " outside the image");
                }
                const auto l = static_cast<std::size_t>(r) * img.image_n + c;
                for (int m = 0; m < img.n_components; ++m) sums[m] += img.at(l, m);
                ++count;
            }
        }
        for (double& s : sums) s /= static_cast<double>(count);
        table.rois.push_back(roi.label);
        table.means.push_back(std::move(sums));
    }
    return table;
}

std::vector<std::vector<std::optional<double>>> error_table(const RoiTable& est, const RoiTable& truth) {
    if (est.means.size() != truth.means.size()) throw ShapeError("error table: ROI count mismatch");
    std::vector<std::vector<std::optional<double>>> out(truth.means.size());
    for (std::size_t r = 0; r < truth.means.size(); ++r) {
        if (est.means[r].size() != truth.means[r].size()) throw ShapeError("error table: material count mismatch");
        for (std::size_t m = 0; m < truth.means[r].size(); ++m) {
            const double t = truth.means[r][m];
            if (t == 0.0) {
                out[r].push_back(std::nullopt);
            } else {
                out[r].push_back(100.0 * std::abs(est.means[r][m] - t) / std::abs(t));
            }
        }
    }
    return out;
}

namespace {

std::vector<std::vector<double>> line_integrals(const MaterialImage& phantom, const MixingMatrix& mix,
                                                const SystemMatrix& a) {
    mix.validate();
    if (phantom.n_components != mix.n_materials()) {
        throw ShapeError(fmt::format("phantom has {} materials, mixing matrix {}", phantom.n_components,
                                     mix.n_materials()));
    }
    if (phantom.n_voxels() != a.n_voxels()) throw ShapeError("phantom grid does not match the system matrix");
    std::vector<std::vector<double>> out;
    std::vector<double> lac(phantom.n_voxels());
    for (Eigen::Index e = 0; e < mix.n_bins(); ++e) {
        for (std::size_t l = 0; l < lac.size(); ++l) {
            double v = 0.0;
            for (int m = 0; m < phantom.n_components; ++m) v += mix.lac(e, m) * phantom.at(l, m);
            lac[l] = v;
        }
        out.push_back(forward_project(a, lac));
    }
    return out;
}

} // namespace

double mean_transmission(const MaterialImage& phantom, const MixingMatrix& mix, const SystemMatrix& a) {
    const auto p = line_integrals(phantom, mix, a);
    long double total = 0.0L;
    std::size_t count = 0;
    for (const auto& bin : p) {
        for (double v : bin) total += std::exp(-v);
        count += bin.size();
    }
    return static_cast<double>(total / count);
}

std::pair<CountData, SpectralSinogram> simulate_counts(const MaterialImage& phantom, const MixingMatrix& mix,
                                                       const SystemMatrix& a, int n_views, int n_channels,
                                                       std::span<const double> i0, std::uint64_t seed,
                                                       NoiseMode mode, int threads) {
    const auto n_bins = static_cast<int>(mix.n_bins());
    if (i0.size() != static_cast<std::size_t>(n_bins)) {
        throw ShapeError(fmt::format("expected {} blank-scan counts, got {}", n_bins, i0.size()));
    }
    for (double v : i0) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("blank-scan counts I0 must be positive");
    }
    if (static_cast<std::size_t>(n_views) * n_channels != a.n_rays()) {
        throw ShapeError("views x channels does not match the system matrix");
    }

    const auto p = line_integrals(phantom, mix, a);
    SpectralSinogram sino(n_bins, n_views, n_channels);
    CountData counts;
    counts.n_bins = n_bins;
    counts.n_rays = a.n_rays();
    counts.i0.assign(i0.begin(), i0.end());
    counts.expected.resize(sino.cells());
    counts.sampled.resize(sino.cells());
    counts.weight_scale.assign(sino.cells(), 1.0);
    sino.i0 = counts.i0;

    auto fill = [&](std::size_t first, std::size_t last) {
        for (std::size_t k = first; k < last; ++k) {
            const auto e = static_cast<int>(k / a.n_rays());
            const auto n = k % a.n_rays();
            const double expected = i0[e] * std::exp(-p[e][n]);
            counts.expected[k] = expected;
            if (mode == NoiseMode::noiseless) {
                counts.sampled[k] = expected;
                sino.line_integrals[k] = std::log(i0[e] / expected);
            } else {
                std::mt19937_64 rng(stream_seed(seed, k));
                std::poisson_distribution<std::int64_t> draw(expected);
                const auto c = static_cast<double>(draw(rng));
                counts.sampled[k] = c;
                sino.line_integrals[k] = std::log(i0[e] / std::max(c, 1.0));
            }
            sino.counts[k] = counts.sampled[k];
        }
    };

    const std::size_t cells = sino.cells();
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1) {
        fill(0, cells);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(fill, cells * w / workers, cells * (w + 1) / workers);
    }
    return {std::move(counts), std::move(sino)};
}

SpectralSinogram inject_defects(const SpectralSinogram& sino, std::span<const int> channels) {
    SpectralSinogram out = sino;
    for (int c : channels) {
        if (c < 0 || c >= sino.n_channels) throw std::out_of_range("defective channel out of range");
        for (int e = 0; e < sino.n_bins; ++e) {
            for (int v = 0; v < sino.n_views; ++v) {
                const auto k = out.index(e, static_cast<std::size_t>(v) * sino.n_channels + c);
                out.counts[k] = 0.0;
                out.line_integrals[k] = std::log(std::max(sino.i0[e], 1.0));
                out.weight_scale[k] = 0.0;
            }
        }
    }
    return out;
}

SpectralSinogram correct_defects(const SpectralSinogram& sino, double repaired_weight) {
    if (!(repaired_weight > 0.0 && repaired_weight <= 1.0)) {
        throw ConfigError("repaired weight must lie in (0, 1]");
    }
    SpectralSinogram out = sino;
    const int nc = sino.n_channels;
    for (int e = 0; e < sino.n_bins; ++e) {
        for (int v = 0; v < sino.n_views; ++v) {
            const std::size_t row = sino.index(e, static_cast<std::size_t>(v) * nc);
            auto valid = [&](int c) { return sino.weight_scale[row + c] > 0.0; };
            for (int c = 0; c < nc; ++c) {
                if (valid(c)) continue;
                int left = c - 1;
                while (left >= 0 && !valid(left)) --left;
                int right = c + 1;
                while (right < nc && !valid(right)) ++right;
                if (left < 0 && right >= nc) {
                    throw DomainError(fmt::format("entire detector row defective (bin {}, view {}); cannot repair", e, v));
                }
                const std::size_t k = row + c;
                if (left < 0 || right >= nc) {
                    const std::size_t src = row + (left < 0 ? right : left);
                    out.line_integrals[k] = sino.line_integrals[src];
                    out.counts[k] = sino.counts[src];
                } else {
                    const double t = static_cast<double>(c - left) / (right - left);
                    out.line_integrals[k] = (1.0 - t) * sino.line_integrals[row + left] + t * sino.line_integrals[row + right];
                    out.counts[k] = (1.0 - t) * sino.counts[row + left] + t * sino.counts[row + right];
                }
                out.weight_scale[k] = repaired_weight;
            }
        }
    }
    return out;
}

std::vector<int> choose_defective_channels(int n_channels, double defect_rate, std::uint64_t seed) {
    if (!(defect_rate >= 0.0 && defect_rate <= 0.05)) throw ConfigError("defect_rate must lie in [0, 0.05]");
    const auto count = static_cast<int>(std::lround(defect_rate * n_channels));
    std::vector<int> all(static_cast<std::size_t>(n_channels));
    for (int c = 0; c < n_channels; ++c) all[c] = c;
    std::vector<int> picked;
    std::mt19937_64 rng(stream_seed(seed, 0xDEFEC7ULL));
    std::sample(all.begin(), all.end(), std::back_inserter(picked), count, rng);
    return picked;
}

SpectralSinogram inject_and_correct_defects(const SpectralSinogram& sino, double defect_rate, std::uint64_t seed,
                                            double repaired_weight) {
    const auto channels = choose_defective_channels(sino.n_channels, defect_rate, seed);
    if (channels.empty()) return sino;
    return correct_defects(inject_defects(sino, channels), repaired_weight);
}

} // namespace sct

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sct {

/// Square grid of voxels carrying `n_components` values each, stored
/// voxel-major (`data[voxel * n_components + component]`). Holds material
/// volume fractions, or single-component LAC images.
struct MaterialImage {
    int image_n = 0;
    int n_components = 0;
    double voxel_mm = 1.0;
    std::vector<std::string> names;
    std::vector<double> data;

    MaterialImage() = default;
    MaterialImage(int n, std::vector<std::string> component_names, double voxel_size_mm);

    std::size_t n_voxels() const { return static_cast<std::size_t>(image_n) * image_n; }
    std::size_t stride() const { return static_cast<std::size_t>(n_components); }

    double& at(std::size_t voxel, int component) { return data[voxel * stride() + component]; }
    double at(std::size_t voxel, int component) const { return data[voxel * stride() + component]; }
    std::span<double> voxel(std::size_t l) { return std::span(data).subspan(l * stride(), stride()); }
    std::span<const double> voxel(std::size_t l) const { return std::span(data).subspan(l * stride(), stride()); }

    /// One component as a contiguous L-vector.
    std::vector<double> component(int m) const;
    void set_component(int m, std::span<const double> values);
    int component_index(const std::string& name) const; // -1 when absent
};

/// x_lm >= 0 and sum_m x_lm <= 1 + sum_tolerance everywhere.
bool is_feasible(const MaterialImage& img, double sum_tolerance = 1e-9);

} // namespace sct

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sct/geometry.hpp"

namespace sct {

/// Nonzeros of one column A_{*l}: the rays crossing voxel l and the path
/// length (mm) of each inside the voxel.
struct ColumnView {
    std::span<const std::uint32_t> rays;
    std::span<const double> lengths;
    double norm_sq = 0.0;

    bool empty() const { return rays.empty(); }
    std::size_t size() const { return rays.size(); }
};

struct RowView {
    std::span<const std::uint32_t> voxels;
    std::span<const double> lengths;
};

/// Sparse ray/voxel intersection-length matrix stored twice: row-major for
/// projection and column-major for coordinate descent. Immutable once built,
/// so a single instance may be shared by concurrent readers.
class SystemMatrix {
public:
    SystemMatrix() = default;

    /// Takes per-ray nonzeros in CSR form and builds the column index.
    SystemMatrix(std::size_t n_rays, std::size_t n_voxels, std::vector<std::size_t> row_ptr,
                 std::vector<std::uint32_t> voxel_idx, std::vector<double> values);

    std::size_t n_rays() const { return n_rays_; }
    std::size_t n_voxels() const { return n_voxels_; }
    std::size_t nonzeros() const { return row_values_.size(); }

    RowView row(std::size_t ray) const;
    /// Throws std::out_of_range for an invalid voxel.
    ColumnView column(std::size_t voxel) const;

    void forward(std::span<const double> image, std::span<double> sinogram) const;
    void back(std::span<const double> sinogram, std::span<double> image) const;

private:
    std::size_t n_rays_ = 0;
    std::size_t n_voxels_ = 0;
    std::vector<std::size_t> row_ptr_;
    std::vector<std::uint32_t> row_voxels_;
    std::vector<double> row_values_;
    std::vector<std::size_t> col_ptr_;
    std::vector<std::uint32_t> col_rays_;
    std::vector<double> col_values_;
    std::vector<double> col_norm_sq_;
};

/// Exact ray/pixel intersection lengths (Siddon traversal) for every ray of
/// `geom`, each ray clipped to the circular field of view. Views are traced
/// on up to `threads` workers; the result does not depend on the count.
SystemMatrix build_system_matrix(const FanBeamGeometry& geom, int threads = 1);

std::vector<double> forward_project(const SystemMatrix& a, std::span<const double> image);
std::vector<double> back_project(const SystemMatrix& a, std::span<const double> sinogram);
ColumnView get_column(const SystemMatrix& a, std::size_t voxel);

} // namespace sct

#pragma once

#include <cstddef>
#include <numbers>

namespace sct {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// 2D equiangular fan-beam scan of a square image grid centred on the
/// isocentre. Rays are indexed `view * n_channels + channel`; voxels are
/// indexed `row * image_n + col` with row/col increasing along +y/+x.
struct FanBeamGeometry {
    int n_views = 180;
    int n_channels = 100;
    double source_iso_mm = 200.0;
    double source_det_mm = 250.0;
    /// Channel pitch measured on the detector arc.
    double det_pitch_mm = 0.8;
    double angular_range_rad = 2.0 * std::numbers::pi;
    double start_angle_rad = 0.0;
    int image_n = 64;
    double voxel_mm = 0.95;
    /// Diameter of the circular field of view; rays are clipped to it.
    double fov_mm = 60.8;

    /// Throws ConfigError on any violated invariant.
    void validate() const;

    std::size_t n_rays() const { return static_cast<std::size_t>(n_views) * n_channels; }
    std::size_t n_voxels() const { return static_cast<std::size_t>(image_n) * image_n; }

    double angular_pitch() const { return det_pitch_mm / source_det_mm; }
    double channel_angle(int channel) const;
    double view_angle(int view) const;
    /// Largest FOV diameter covered by the outermost channel centres.
    double max_fov_mm() const;

    Point2 source_position(int view) const;
    /// Unit direction of the ray from the source through `channel`.
    Point2 ray_direction(int view, int channel) const;
    Point2 voxel_center(std::size_t voxel) const;
};

} // namespace sct

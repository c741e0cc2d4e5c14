#include "sct/geometry.hpp"

#include <cmath>
#include <string>

#include "sct/error.hpp"

namespace sct {

void FanBeamGeometry::validate() const {
    auto fail = [](const std::string& what) { throw ConfigError("geometry: " + what); };
    if (n_views < 1) fail("n_views must be >= 1");
    if (n_channels < 1) fail("n_channels must be >= 1");
    if (image_n < 1) fail("image_n must be >= 1");
    if (!(source_iso_mm > 0.0)) fail("source_iso_mm must be > 0");
    if (!(source_det_mm > source_iso_mm)) fail("source_det_mm must exceed source_iso_mm");
    if (!(det_pitch_mm > 0.0)) fail("det_pitch_mm must be > 0");
    if (!(voxel_mm > 0.0)) fail("voxel_mm must be > 0");
    if (!(angular_range_rad > 0.0)) fail("angular_range_rad must be > 0");
    if (!(fov_mm > 0.0)) fail("fov_mm must be > 0");
    const double half_fan = channel_angle(n_channels - 1);
    if (!(half_fan < std::numbers::pi / 2)) fail("fan angle must stay below 180 degrees");
    if (fov_mm > max_fov_mm() * (1.0 + 1e-9)) {
        fail("fov_mm " + std::to_string(fov_mm) + " exceeds reconstructible field " +
             std::to_string(max_fov_mm()));
    }
}

double FanBeamGeometry::channel_angle(int channel) const {
    return (channel - 0.5 * (n_channels - 1)) * angular_pitch();
}

double FanBeamGeometry::view_angle(int view) const {
    return start_angle_rad + angular_range_rad * view / n_views;
}

double FanBeamGeometry::max_fov_mm() const {
    if (n_channels == 1) {
        // A lone central ray only reconstructs along its chord; accept the
        // full image diagonal so single-ray test geometries remain valid.
        return image_n * voxel_mm * std::numbers::sqrt2;
    }
    const double half_fan = std::abs(channel_angle(n_channels - 1));
    return 2.0 * source_iso_mm * std::sin(half_fan);
}

Point2 FanBeamGeometry::source_position(int view) const {
    const double beta = view_angle(view);
    return {source_iso_mm * std::cos(beta), source_iso_mm * std::sin(beta)};
}

Point2 FanBeamGeometry::ray_direction(int view, int channel) const {
    const double beta = view_angle(view);
    const double gamma = channel_angle(channel);
    // Central ray points from the source to the isocentre; rotate it by gamma.
    const double cx = -std::cos(beta);
    const double cy = -std::sin(beta);
    const double cg = std::cos(gamma);
    const double sg = std::sin(gamma);
    return {cx * cg - cy * sg, cx * sg + cy * cg};
}

Point2 FanBeamGeometry::voxel_center(std::size_t voxel) const {
    const auto row = static_cast<double>(voxel / image_n);
    const auto col = static_cast<double>(voxel % image_n);
    const double half = 0.5 * (image_n - 1);
    return {(col - half) * voxel_mm, (row - half) * voxel_mm};
}

} // namespace sct

#include "sct/system_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>

#include "sct/error.hpp"

namespace sct {

SystemMatrix::SystemMatrix(std::size_t n_rays, std::size_t n_voxels, std::vector<std::size_t> row_ptr,
                           std::vector<std::uint32_t> voxel_idx, std::vector<double> values)
    : n_rays_(n_rays),
      n_voxels_(n_voxels),
      row_ptr_(std::move(row_ptr)),
      row_voxels_(std::move(voxel_idx)),
      row_values_(std::move(values)) {
    if (row_ptr_.size() != n_rays_ + 1 || row_voxels_.size() != row_values_.size() ||
        row_ptr_.back() != row_values_.size()) {
        throw ShapeError("system matrix: inconsistent CSR arrays");
    }

    col_ptr_.assign(n_voxels_ + 1, 0);
    for (auto v : row_voxels_) {
        if (v >= n_voxels_) throw ShapeError("system matrix: voxel index out of range");
        ++col_ptr_[v + 1];
    }
    for (std::size_t l = 0; l < n_voxels_; ++l) col_ptr_[l + 1] += col_ptr_[l];

    col_rays_.resize(row_voxels_.size());
    col_values_.resize(row_values_.size());
    col_norm_sq_.assign(n_voxels_, 0.0);
    std::vector<std::size_t> cursor(col_ptr_.begin(), col_ptr_.end() - 1);
    // Rays are visited in increasing order, so each column comes out sorted.
    for (std::size_t n = 0; n < n_rays_; ++n) {
        for (std::size_t k = row_ptr_[n]; k < row_ptr_[n + 1]; ++k) {
            const auto l = row_voxels_[k];
            const auto dst = cursor[l]++;
            col_rays_[dst] = static_cast<std::uint32_t>(n);
            col_values_[dst] = row_values_[k];
            col_norm_sq_[l] += row_values_[k] * row_values_[k];
        }
    }
}

RowView SystemMatrix::row(std::size_t ray) const {
    if (ray >= n_rays_) throw std::out_of_range("ray index " + std::to_string(ray) + " out of range");
    const auto b = row_ptr_[ray];
    const auto e = row_ptr_[ray + 1];
    return {std::span(row_voxels_).subspan(b, e - b), std::span(row_values_).subspan(b, e - b)};
}

ColumnView SystemMatrix::column(std::size_t voxel) const {
    if (voxel >= n_voxels_) {
        throw std::out_of_range("voxel index " + std::to_string(voxel) + " out of range");
    }
    const auto b = col_ptr_[voxel];
    const auto e = col_ptr_[voxel + 1];
    return {std::span(col_rays_).subspan(b, e - b), std::span(col_values_).subspan(b, e - b),
            col_norm_sq_[voxel]};
}

void SystemMatrix::forward(std::span<const double> image, std::span<double> sinogram) const {
    if (image.size() != n_voxels_ || sinogram.size() != n_rays_) {
        throw ShapeError("forward projection: expected image of " + std::to_string(n_voxels_) +
                         " voxels and sinogram of " + std::to_string(n_rays_) + " rays");
    }
    for (std::size_t n = 0; n < n_rays_; ++n) {
        double acc = 0.0;
        for (std::size_t k = row_ptr_[n]; k < row_ptr_[n + 1]; ++k) {
            acc += row_values_[k] * image[row_voxels_[k]];
        }
        sinogram[n] = acc;
    }
}

void SystemMatrix::back(std::span<const double> sinogram, std::span<double> image) const {
    if (image.size() != n_voxels_ || sinogram.size() != n_rays_) {
        throw ShapeError("back projection: expected sinogram of " + std::to_string(n_rays_) +
                         " rays and image of " + std::to_string(n_voxels_) + " voxels");
    }
    for (std::size_t l = 0; l < n_voxels_; ++l) {
        double acc = 0.0;
        for (std::size_t k = col_ptr_[l]; k < col_ptr_[l + 1]; ++k) {
            acc += col_values_[k] * sinogram[col_rays_[k]];
        }
        image[l] = acc;
    }
}

namespace {

struct RayEntries {
    std::vector<std::uint32_t> voxels;
    std::vector<double> lengths;
};

void trace_ray(const FanBeamGeometry& g, int view, int channel, std::vector<double>& crossings,
               RayEntries& out) {
    const Point2 s = g.source_position(view);
    const Point2 d = g.ray_direction(view, channel);
    const double half_w = 0.5 * g.image_n * g.voxel_mm;
    const double r = 0.5 * g.fov_mm;

    // Clip to the FOV disk.
    const double b = s.x * d.x + s.y * d.y;
    const double c = s.x * s.x + s.y * s.y - r * r;
    const double disc = b * b - c;
    if (disc <= 0.0) return;
    const double root = std::sqrt(disc);
    double t_lo = -b - root;
    double t_hi = -b + root;

    // Clip to the image square.
    auto clip_slab = [&](double origin, double dir) {
        if (std::abs(dir) < 1e-15) {
            if (origin < -half_w || origin > half_w) t_hi = t_lo;
            return;
        }
        double ta = (-half_w - origin) / dir;
        double tb = (half_w - origin) / dir;
        if (ta > tb) std::swap(ta, tb);
        t_lo = std::max(t_lo, ta);
        t_hi = std::min(t_hi, tb);
    };
    clip_slab(s.x, d.x);
    clip_slab(s.y, d.y);
    if (!(t_hi > t_lo)) return;

    crossings.clear();
    crossings.push_back(t_lo);
    crossings.push_back(t_hi);
    auto add_planes = [&](double origin, double dir) {
        if (std::abs(dir) < 1e-15) return;
        for (int k = 0; k <= g.image_n; ++k) {
            const double t = (-half_w + k * g.voxel_mm - origin) / dir;
            if (t > t_lo && t < t_hi) crossings.push_back(t);
        }
    };
    add_planes(s.x, d.x);
    add_planes(s.y, d.y);
    std::sort(crossings.begin(), crossings.end());

    const double min_len = 1e-9 * g.voxel_mm;
    for (std::size_t i = 0; i + 1 < crossings.size(); ++i) {
        const double len = crossings[i + 1] - crossings[i];
        if (len <= min_len) continue;
        const double tm = 0.5 * (crossings[i] + crossings[i + 1]);
        const double mx = s.x + tm * d.x;
        const double my = s.y + tm * d.y;
        const int col = std::clamp(static_cast<int>(std::floor((mx + half_w) / g.voxel_mm)), 0, g.image_n - 1);
        const int row = std::clamp(static_cast<int>(std::floor((my + half_w) / g.voxel_mm)), 0, g.image_n - 1);
        const auto voxel = static_cast<std::uint32_t>(row * g.image_n + col);
        if (!out.voxels.empty() && out.voxels.back() == voxel) {
            out.lengths.back() += len;
        } else {
            out.voxels.push_back(voxel);
            out.lengths.push_back(len);
        }
    }
}

} // namespace

SystemMatrix build_system_matrix(const FanBeamGeometry& geom, int threads) {
    geom.validate();
    if (geom.n_rays() == 0 || geom.n_voxels() == 0) {
        throw ConfigError("geometry: zero rays or zero voxels");
    }

    std::vector<RayEntries> per_ray(geom.n_rays());
    auto trace_views = [&](int first, int last) {
        std::vector<double> crossings;
        for (int v = first; v < last; ++v) {
            for (int c = 0; c < geom.n_channels; ++c) {
                trace_ray(geom, v, c, crossings, per_ray[static_cast<std::size_t>(v) * geom.n_channels + c]);
            }
        }
    };

    const int workers = std::clamp(threads, 1, geom.n_views);
    if (workers == 1) {
        trace_views(0, geom.n_views);
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back(trace_views, geom.n_views * w / workers, geom.n_views * (w + 1) / workers);
        }
    }

    std::vector<std::size_t> row_ptr(geom.n_rays() + 1, 0);
    for (std::size_t n = 0; n < per_ray.size(); ++n) row_ptr[n + 1] = row_ptr[n] + per_ray[n].voxels.size();
    std::vector<std::uint32_t> voxels;
    std::vector<double> lengths;
    voxels.reserve(row_ptr.back());
    lengths.reserve(row_ptr.back());
    for (auto& r : per_ray) {
        voxels.insert(voxels.end(), r.voxels.begin(), r.voxels.end());
        lengths.insert(lengths.end(), r.lengths.begin(), r.lengths.end());
    }
    return SystemMatrix(geom.n_rays(), geom.n_voxels(), std::move(row_ptr), std::move(voxels), std::move(lengths));
}

std::vector<double> forward_project(const SystemMatrix& a, std::span<const double> image) {
    std::vector<double> out(a.n_rays());
    a.forward(image, out);
    return out;
}

std::vector<double> back_project(const SystemMatrix& a, std::span<const double> sinogram) {
    std::vector<double> out(a.n_voxels());
    a.back(sinogram, out);
    return out;
}

ColumnView get_column(const SystemMatrix& a, std::size_t voxel) { return a.column(voxel); }

} // namespace sct

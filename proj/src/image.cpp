#include "sct/image.hpp"

#include <algorithm>

#include "sct/error.hpp"

namespace sct {

MaterialImage::MaterialImage(int n, std::vector<std::string> component_names, double voxel_size_mm)
    : image_n(n),
      n_components(static_cast<int>(component_names.size())),
      voxel_mm(voxel_size_mm),
      names(std::move(component_names)),
      data(static_cast<std::size_t>(n) * n * names.size(), 0.0) {
    if (n < 1 || n_components < 1) throw ShapeError("image: grid and component count must be positive");
}

std::vector<double> MaterialImage::component(int m) const {
    std::vector<double> out(n_voxels());
    for (std::size_t l = 0; l < out.size(); ++l) out[l] = at(l, m);
    return out;
}

void MaterialImage::set_component(int m, std::span<const double> values) {
    if (values.size() != n_voxels()) throw ShapeError("image: component length mismatch");
    for (std::size_t l = 0; l < values.size(); ++l) at(l, m) = values[l];
}

int MaterialImage::component_index(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

bool is_feasible(const MaterialImage& img, double sum_tolerance) {
    for (std::size_t l = 0; l < img.n_voxels(); ++l) {
        double total = 0.0;
        for (double v : img.voxel(l)) {
            if (!(v >= 0.0)) return false;
            total += v;
        }
        if (total > 1.0 + sum_tolerance) return false;
    }
    return true;
}

} // namespace sct

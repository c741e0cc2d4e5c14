#include "sct/regularizer.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "sct/error.hpp"

namespace sct {

std::array<double, 8> RegularizerConfig::default_alpha() {
    const double diag = 1.0 / std::numbers::sqrt2;
    const double total = 4.0 + 4.0 * diag;
    return {1.0 / total, 1.0 / total, 1.0 / total, 1.0 / total,
            diag / total, diag / total, diag / total, diag / total};
}

double RegularizerConfig::curvature() const {
    if (std::isinf(sigma)) return 0.0;
    return 1.0 / (sigma * sigma);
}

void RegularizerConfig::validate() const {
    if (!(sigma > 0.0)) throw ConfigError("optimizer.sigma must be > 0");

    double total = 0.0;
    for (double a : alpha) {
        if (!(a >= 0.0)) throw ConfigError("regularizer: neighbour weights must be non-negative");
        total += a;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ConfigError("regularizer: neighbour weights must sum to 1");
    // Opposite offsets share a pair potential, so their weights must agree.
    if (alpha[0] != alpha[1] || alpha[2] != alpha[3] || alpha[4] != alpha[7] || alpha[5] != alpha[6]) {
        throw ConfigError("regularizer: neighbour weights must be symmetric");
    }
    if (coupling.size() != 0 && !coupling.isZero(0.0)) {
        throw ConfigError("regularizer: inter-material coupling is not supported; leave it zero");
    }
}

namespace {

template <typename Fn>
void for_each_neighbor(int n, std::size_t l, Fn&& fn) {
    const int row = static_cast<int>(l / n);
    const int col = static_cast<int>(l % n);
    for (std::size_t k = 0; k < kNeighborOffsets.size(); ++k) {
        const int r = row + kNeighborOffsets[k][0];
        const int c = col + kNeighborOffsets[k][1];
        const bool inside = r >= 0 && r < n && c >= 0 && c < n;
        fn(k, inside, inside ? static_cast<std::size_t>(r) * n + c : std::size_t{0});
    }
}

} // namespace

void neighbor_average(const MaterialImage& x, std::size_t l, const RegularizerConfig& reg, double* out) {
    const int m_count = x.n_components;
    std::fill(out, out + m_count, 0.0);
    for_each_neighbor(x.image_n, l, [&](std::size_t k, bool inside, std::size_t nb) {
        if (!inside) return;
        for (int m = 0; m < m_count; ++m) out[m] += reg.alpha[k] * x.at(nb, m);
    });
}

RegularizerTerms regularizer_value_and_gradient(const MaterialImage& x, std::size_t l, const RegularizerConfig& reg) {
    if (l >= x.n_voxels()) throw std::out_of_range("regularizer: voxel index out of range");
    const double c = reg.curvature();
    RegularizerTerms t;
    t.curvature = c;
    t.gradient = Eigen::VectorXd::Zero(x.n_components);
    if (c == 0.0) return t;
    double value = 0.0;
    for_each_neighbor(x.image_n, l, [&](std::size_t k, bool inside, std::size_t nb) {
        for (int m = 0; m < x.n_components; ++m) {
            const double diff = x.at(l, m) - (inside ? x.at(nb, m) : 0.0);
            value += reg.alpha[k] * diff * diff;
            t.gradient(m) += reg.alpha[k] * diff;
        }
    });
    t.value = 0.5 * c * value;
    t.gradient *= c;
    return t;
}

double regularizer_total(const MaterialImage& x, const RegularizerConfig& reg) {
    const double c = reg.curvature();
    if (c == 0.0) return 0.0;
    long double total = 0.0L;
    for (std::size_t l = 0; l < x.n_voxels(); ++l) {
        for_each_neighbor(x.image_n, l, [&](std::size_t k, bool inside, std::size_t nb) {
            // Interior pairs are seen from both ends; keep the one with nb > l.
            if (inside && nb < l) return;
            for (int m = 0; m < x.n_components; ++m) {
                const double diff = x.at(l, m) - (inside ? x.at(nb, m) : 0.0);
                total += reg.alpha[k] * diff * diff;
            }
        });
    }
    return static_cast<double>(0.5L * c * total);
}

} // namespace sct

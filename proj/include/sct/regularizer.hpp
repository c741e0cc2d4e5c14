#pragma once

#include <array>
#include <cstddef>

#include <Eigen/Dense>

#include "sct/image.hpp"

namespace sct {

/// Offsets (drow, dcol) of the 8-neighbourhood, in the order used by
/// RegularizerConfig::alpha.
inline constexpr std::array<std::array<int, 2>, 8> kNeighborOffsets{{
    {-1, 0}, {1, 0}, {0, -1}, {0, 1}, {-1, -1}, {-1, 1}, {1, -1}, {1, 1},
}};

/// Quadratic neighbourhood prior
///   U_l = 1/(2 sigma^2) sum_m sum_k alpha_k (x_lm - x_km)^2.
/// Neighbours outside the grid are fixed at zero, so every voxel sees the
/// full weight sum of one and the prior curvature is 1/sigma^2 everywhere.
/// sigma = +inf disables the prior.
struct RegularizerConfig {
    double sigma = 1.0;
    std::array<double, 8> alpha = default_alpha();
    /// Reserved for inter-material coupling; only the zero matrix (or an
    /// empty one) is accepted.
    Eigen::MatrixXd coupling;

    /// Orthogonal neighbours weighted 1, diagonal ones 1/sqrt(2), normalised.
    static std::array<double, 8> default_alpha();

    /// 1/sigma^2 (0 when the prior is off).
    double curvature() const;
    /// Throws ConfigError.
    void validate() const;
};

struct RegularizerTerms {
    double value = 0.0;
    Eigen::VectorXd gradient;
    double curvature = 0.0;
};

/// Local prior terms of voxel l: value U_l, its gradient with respect to
/// x_l and the (diagonal) Hessian entry.
RegularizerTerms regularizer_value_and_gradient(const MaterialImage& x, std::size_t l, const RegularizerConfig& reg);

/// sum_k alpha_k x_k for every component, written into `out`.
void neighbor_average(const MaterialImage& x, std::size_t l, const RegularizerConfig& reg, double* out);

/// Total prior U(x): each interior neighbour pair counted once, plus the
/// zero-padded boundary terms.
double regularizer_total(const MaterialImage& x, const RegularizerConfig& reg);

} // namespace sct

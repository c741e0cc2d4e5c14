#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace sct {

/// Upper bound on basis materials per voxel; keeps the subproblem on the stack.
inline constexpr int kMaxMaterials = 8;

using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxMaterials, kMaxMaterials>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxMaterials, 1>;

/// minimize 1/2 x^T H x + d^T x  subject to  x >= 0  and, when
/// `sum_constraint` is set, 1^T x <= 1.
struct VoxelQP {
    SmallMatrix hessian;
    SmallVector linear; // gradient of the objective at x = 0
    bool sum_constraint = true;

    int size() const { return static_cast<int>(linear.size()); }
    double objective(const SmallVector& x) const { return 0.5 * x.dot(hessian * x) + linear.dot(x); }
    SmallVector gradient_at(const SmallVector& x) const { return hessian * x + linear; }
};

struct QpSolution {
    SmallVector x;
    SmallVector mu;      // multipliers of x >= 0
    double lambda = 0.0; // multiplier of 1^T x <= 1
    double objective = 0.0;
    /// Active constraints in increasing order: m for x_m = 0, M for the sum.
    std::vector<int> active;
};

struct KktResiduals {
    double stationarity = 0.0;
    double primal = 0.0;
    double dual = 0.0;
    double complementarity = 0.0;

    double max() const;
};

/// Exact active-set enumeration: every subset of variables pinned at zero,
/// with the sum constraint active or inactive, is solved in closed form and
/// the candidate satisfying the KKT conditions is returned. Degenerate ties
/// go to the lowest objective, then the lexicographically smallest active
/// set. Throws NumericError when H is not symmetric positive definite.
QpSolution solve_voxel_qp(const VoxelQP& qp);

/// Absolute KKT residuals of (x, mu, lambda) for `qp`.
KktResiduals kkt_residuals(const VoxelQP& qp, const QpSolution& sol);

} // namespace sct

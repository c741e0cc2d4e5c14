#include "sct/voxel_qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <fmt/format.h>

#include "sct/error.hpp"

namespace sct {

double KktResiduals::max() const { return std::max({stationarity, primal, dual, complementarity}); }

namespace {

struct Candidate {
    SmallVector x;
    double lambda = 0.0;
    double objective = 0.0;
    std::vector<int> active;
};

bool better(const Candidate& a, const Candidate& b) {
    const double tie = 1e-12 * (1.0 + std::max(std::abs(a.objective), std::abs(b.objective)));
    if (a.objective < b.objective - tie) return true;
    if (b.objective < a.objective - tie) return false;
    return a.active < b.active;
}

} // namespace

QpSolution solve_voxel_qp(const VoxelQP& qp) {
    const int m = qp.size();
    if (m < 1 || m > kMaxMaterials) {
        throw ShapeError(fmt::format("voxel QP: size {} outside [1, {}]", m, kMaxMaterials));
    }
    if (qp.hessian.rows() != m || qp.hessian.cols() != m) throw ShapeError("voxel QP: Hessian/gradient size mismatch");
    if (!qp.hessian.allFinite() || !qp.linear.allFinite()) throw NumericError("voxel QP: non-finite coefficients");

    const double scale = std::max({1.0, qp.hessian.cwiseAbs().maxCoeff(), qp.linear.cwiseAbs().maxCoeff()});
    if ((qp.hessian - qp.hessian.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw NumericError("voxel QP: Hessian is not symmetric");
    }
    {
        Eigen::LLT<SmallMatrix> full(qp.hessian);
        if (full.info() != Eigen::Success || (qp.hessian.diagonal().array() <= 0.0).any()) {
            throw NumericError("voxel QP: Hessian is not positive definite");
        }
    }

    const double tol_x = 1e-11;
    const double tol_mult = 1e-11 * scale;
    std::optional<Candidate> best;

    SmallMatrix hff;
    SmallVector rhs;
    SmallVector ones;
    for (unsigned free_mask = 0; free_mask < (1u << m); ++free_mask) {
        int free_idx[kMaxMaterials];
        int nf = 0;
        for (int i = 0; i < m; ++i) {
            if (free_mask & (1u << i)) free_idx[nf++] = i;
        }

        SmallVector u = SmallVector::Zero(m);
        SmallVector w = SmallVector::Zero(m);
        if (nf > 0) {
            hff.resize(nf, nf);
            rhs.resize(nf);
            ones.setOnes(nf);
            for (int a = 0; a < nf; ++a) {
                rhs(a) = -qp.linear(free_idx[a]);
                for (int b = 0; b < nf; ++b) hff(a, b) = qp.hessian(free_idx[a], free_idx[b]);
            }
            const Eigen::LLT<SmallMatrix> llt(hff);
            const SmallVector uf = llt.solve(rhs);
            const SmallVector wf = llt.solve(ones);
            for (int a = 0; a < nf; ++a) {
                u(free_idx[a]) = uf(a);
                w(free_idx[a]) = wf(a);
            }
        }

        auto consider = [&](const SmallVector& x, double lambda, bool sum_active) {
            double total = 0.0;
            for (int a = 0; a < nf; ++a) {
                if (x(free_idx[a]) < -tol_x) return;
                total += x(free_idx[a]);
            }
            if (qp.sum_constraint && !sum_active && total > 1.0 + tol_x) return;
            if (lambda < -tol_mult) return;
            const SmallVector g = qp.gradient_at(x);
            for (int i = 0; i < m; ++i) {
                if (!(free_mask & (1u << i)) && g(i) + lambda < -tol_mult) return;
            }
            Candidate c;
            c.x = x;
            c.lambda = lambda;
            c.objective = qp.objective(x);
            for (int i = 0; i < m; ++i) {
                if (!(free_mask & (1u << i))) c.active.push_back(i);
            }
            if (sum_active) c.active.push_back(m);
            if (!best || better(c, *best)) best = std::move(c);
        };

        consider(u, 0.0, false);
        if (qp.sum_constraint && nf > 0) {
            const double wsum = w.sum();
            if (wsum > 0.0) {
                const double lambda = (u.sum() - 1.0) / wsum;
                consider(u - lambda * w, lambda, true);
            }
        }
    }

    if (!best) throw NumericError("voxel QP: no KKT point found (ill-conditioned Hessian?)");

    QpSolution sol;
    sol.x = best->x.cwiseMax(0.0);
    for (int i : best->active) {
        if (i < m) sol.x(i) = 0.0;
    }
    sol.lambda = std::max(best->lambda, 0.0);
    const SmallVector g = qp.gradient_at(sol.x);
    sol.mu = SmallVector::Zero(m);
    for (int i : best->active) {
        if (i < m) sol.mu(i) = std::max(g(i) + sol.lambda, 0.0);
    }
    sol.objective = qp.objective(sol.x);
    sol.active = std::move(best->active);
    return sol;
}

KktResiduals kkt_residuals(const VoxelQP& qp, const QpSolution& sol) {
    const int m = qp.size();
    KktResiduals r;
    const SmallVector stat = qp.gradient_at(sol.x) - sol.mu + SmallVector::Constant(m, sol.lambda);
    r.stationarity = stat.cwiseAbs().maxCoeff();
    const double total = sol.x.sum();
    r.primal = std::max(0.0, -sol.x.minCoeff());
    if (qp.sum_constraint) r.primal = std::max(r.primal, total - 1.0);
    r.dual = std::max({0.0, -sol.mu.minCoeff(), -sol.lambda});
    r.complementarity = sol.mu.cwiseProduct(sol.x).cwiseAbs().maxCoeff();
    if (qp.sum_constraint) r.complementarity = std::max(r.complementarity, std::abs(sol.lambda * (total - 1.0)));
    else r.complementarity = std::max(r.complementarity, std::abs(sol.lambda));
    return r;
}

} // namespace sct

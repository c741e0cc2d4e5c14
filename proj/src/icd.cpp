#include "sct/icd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "sct/error.hpp"
#include "sct/rng.hpp"

namespace sct {

IcdProblem::IcdProblem(const SystemMatrix& a, const MixingMatrix& mix, const SpectralSinogram& sino,
                       const WeightMatrix& weights, RegularizerConfig reg, bool sum_constraint)
    : a_(&a),
      mix_(mix),
      reg_(std::move(reg)),
      sum_constraint_(sum_constraint),
      n_bins_(static_cast<int>(mix.n_bins())),
      n_materials_(static_cast<int>(mix.n_materials())),
      image_n_(0),
      n_rays_(a.n_rays()) {
    mix_.validate();
    reg_.validate();
    sino.validate();
    if (n_materials_ > kMaxMaterials) {
        throw ShapeError(fmt::format("at most {} materials are supported, got {}", kMaxMaterials, n_materials_));
    }
    if (sino.n_bins != n_bins_) {
        throw ShapeError(fmt::format("sinogram has {} bins but the mixing matrix has {}", sino.n_bins, n_bins_));
    }
    if (sino.n_rays() != n_rays_) {
        throw ShapeError(fmt::format("sinogram has {} rays per bin but the system matrix has {}", sino.n_rays(),
                                     n_rays_));
    }
    if (weights.n_bins != n_bins_ || weights.n_rays != n_rays_ || weights.d.size() != sino.cells()) {
        throw ShapeError("weight matrix does not match the sinogram");
    }
    const auto side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(a.n_voxels()))));
    if (static_cast<std::size_t>(side) * side != a.n_voxels()) throw ShapeError("system matrix is not square-gridded");
    image_n_ = side;

    y_.resize(sino.cells());
    weights_.resize(sino.cells());
    for (int e = 0; e < n_bins_; ++e) {
        for (std::size_t n = 0; n < n_rays_; ++n) {
            const auto src = sino.index(e, n);
            const auto dst = n * n_bins_ + e;
            const double d = weights.d[src];
            if (!(d >= 0.0) || !std::isfinite(d)) {
                throw DomainError(fmt::format("invalid weight at bin {}, ray {}", e, n));
            }
            if (d > 0.0 && !std::isfinite(sino.line_integrals[src])) {
                throw DomainError(fmt::format("non-finite line integral at bin {}, ray {}", e, n));
            }
            y_[dst] = d > 0.0 ? sino.line_integrals[src] : 0.0;
            weights_[dst] = d;
        }
    }
}

std::vector<double> IcdProblem::error_from_scratch(const MaterialImage& x) const {
    if (x.n_components != n_materials_ || x.n_voxels() != a_->n_voxels()) {
        throw ShapeError("image does not match the reconstruction problem");
    }
    std::vector<double> err(y_);
    std::vector<double> lac(x.n_voxels());
    std::vector<double> proj(n_rays_);
    for (int e = 0; e < n_bins_; ++e) {
        for (std::size_t l = 0; l < lac.size(); ++l) {
            double v = 0.0;
            for (int m = 0; m < n_materials_; ++m) v += mix_.lac(e, m) * x.at(l, m);
            lac[l] = v;
        }
        a_->forward(lac, proj);
        for (std::size_t n = 0; n < n_rays_; ++n) err[n * n_bins_ + e] -= proj[n];
    }
    return err;
}

IcdState IcdProblem::make_state(MaterialImage x0) const {
    IcdState s;
    s.error = error_from_scratch(x0);
    s.image = std::move(x0);
    return s;
}

IcdState IcdProblem::zero_state(double voxel_mm) const {
    return make_state(MaterialImage(image_n_, mix_.materials, voxel_mm));
}

void IcdProblem::refresh(IcdState& state) const { state.error = error_from_scratch(state.image); }

double IcdProblem::error_drift(const IcdState& state) const {
    const auto fresh = error_from_scratch(state.image);
    long double diff = 0.0L;
    long double ref = 0.0L;
    for (std::size_t k = 0; k < fresh.size(); ++k) {
        const long double dk = static_cast<long double>(state.error[k]) - fresh[k];
        diff += dk * dk;
        ref += static_cast<long double>(fresh[k]) * fresh[k];
    }
    if (ref == 0.0L) return static_cast<double>(std::sqrt(diff));
    return static_cast<double>(std::sqrt(diff / ref));
}

double IcdProblem::data_cost(const IcdState& state) const {
    long double total = 0.0L;
    for (std::size_t k = 0; k < state.error.size(); ++k) {
        const double term = weights_[k] * state.error[k] * state.error[k];
        if (!std::isfinite(term)) {
            throw NumericError(fmt::format("non-finite data term at bin {}, ray {}", k % n_bins_, k / n_bins_));
        }
        total += term;
    }
    return static_cast<double>(0.5L * total);
}

double IcdProblem::cost(const IcdState& state) const {
    const double value = data_cost(state) + regularizer_total(state.image, reg_);
    if (!std::isfinite(value)) throw NumericError("non-finite regularizer value");
    return value;
}

VoxelQP IcdProblem::subproblem(const IcdState& state, std::size_t l) const {
    const auto col = a_->column(l);
    const int nb = n_bins_;
    const int nm = n_materials_;

    double theta1[64];
    double theta2[64];
    std::vector<double> heap1;
    std::vector<double> heap2;
    double* t1 = theta1;
    double* t2 = theta2;
    if (nb > 64) {
        heap1.resize(static_cast<std::size_t>(nb));
        heap2.resize(static_cast<std::size_t>(nb));
        t1 = heap1.data();
        t2 = heap2.data();
    }
    std::fill(t1, t1 + nb, 0.0);
    std::fill(t2, t2 + nb, 0.0);
    for (std::size_t k = 0; k < col.size(); ++k) {
        const double a = col.lengths[k];
        const std::size_t base = static_cast<std::size_t>(col.rays[k]) * nb;
        for (int e = 0; e < nb; ++e) {
            const double ad = a * weights_[base + e];
            t1[e] += ad * state.error[base + e];
            t2[e] += ad * a;
        }
    }

    VoxelQP qp;
    qp.sum_constraint = sum_constraint_;
    qp.hessian = SmallMatrix::Zero(nm, nm);
    SmallVector grad = SmallVector::Zero(nm);
    for (int e = 0; e < nb; ++e) {
        for (int m = 0; m < nm; ++m) {
            const double me = mix_.lac(e, m);
            grad(m) -= me * t1[e];
            for (int k = 0; k <= m; ++k) qp.hessian(m, k) += t2[e] * me * mix_.lac(e, k);
        }
    }
    for (int m = 0; m < nm; ++m) {
        for (int k = 0; k < m; ++k) qp.hessian(k, m) = qp.hessian(m, k);
    }

    const double c = reg_.curvature();
    SmallVector x = SmallVector::Zero(nm);
    for (int m = 0; m < nm; ++m) x(m) = state.image.at(l, m);
    if (c > 0.0) {
        double avg[kMaxMaterials];
        neighbor_average(state.image, l, reg_, avg);
        for (int m = 0; m < nm; ++m) {
            grad(m) += c * (x(m) - avg[m]);
            qp.hessian(m, m) += c;
        }
    }
    qp.linear = grad - qp.hessian * x;
    return qp;
}

SweepStats IcdProblem::sweep(IcdState& state, std::span<const std::size_t> order) const {
    SweepStats stats;
    const int nb = n_bins_;
    const int nm = n_materials_;
    double delta_lac[64];
    std::vector<double> heap;
    double* dl = delta_lac;
    if (nb > 64) {
        heap.resize(static_cast<std::size_t>(nb));
        dl = heap.data();
    }

    for (const std::size_t l : order) {
        const auto col = a_->column(l);
        if (col.empty() && reg_.curvature() == 0.0) continue; // nothing constrains this voxel

        const VoxelQP qp = subproblem(state, l);
        const QpSolution sol = solve_voxel_qp(qp);
        const double scale =
            std::max({1.0, qp.hessian.cwiseAbs().maxCoeff(), qp.linear.cwiseAbs().maxCoeff()});
        stats.max_kkt = std::max(stats.max_kkt, kkt_residuals(qp, sol).max() / scale);

        double delta[kMaxMaterials];
        bool changed = false;
        for (int m = 0; m < nm; ++m) {
            delta[m] = sol.x(m) - state.image.at(l, m);
            if (delta[m] != 0.0) changed = true;
            stats.max_update = std::max(stats.max_update, std::abs(delta[m]));
        }
        if (!changed) continue;
        ++stats.updated;

        for (int e = 0; e < nb; ++e) {
            double v = 0.0;
            for (int m = 0; m < nm; ++m) v += mix_.lac(e, m) * delta[m];
            dl[e] = v;
        }
        for (std::size_t k = 0; k < col.size(); ++k) {
            const double a = col.lengths[k];
            const std::size_t base = static_cast<std::size_t>(col.rays[k]) * nb;
            for (int e = 0; e < nb; ++e) state.error[base + e] -= a * dl[e];
        }
        for (int m = 0; m < nm; ++m) state.image.at(l, m) = sol.x(m);
    }
    return stats;
}

double spectral_cost(const IcdState& state, const IcdProblem& problem) { return problem.cost(state); }

VoxelQP voxel_subproblem(const IcdState& state, std::size_t l, const IcdProblem& problem) {
    return problem.subproblem(state, l);
}

std::vector<std::size_t> visit_order(std::size_t n_voxels, VisitOrder order, std::uint64_t seed, int iteration) {
    std::vector<std::size_t> idx(n_voxels);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (order == VisitOrder::shuffled) {
        std::mt19937_64 rng(stream_seed(seed, static_cast<std::uint64_t>(iteration)));
        std::shuffle(idx.begin(), idx.end(), rng);
    }
    return idx;
}

SweepStats icd_sweep(IcdState& state, const IcdProblem& problem, VisitOrder order, std::uint64_t seed,
                     double descent_tolerance) {
    const double before = state.cost_history.empty() ? problem.cost(state) : state.cost_history.back();
    const auto idx = visit_order(state.image.n_voxels(), order, seed, state.iteration);
    SweepStats stats = problem.sweep(state, idx);
    stats.cost = problem.cost(state);
    if (stats.cost > before + descent_tolerance) {
        throw ConsistencyError(fmt::format("cost increased during sweep {}: {:.17g} -> {:.17g} (max update {:.3e})",
                                           state.iteration + 1, before, stats.cost, stats.max_update));
    }
    if (state.cost_history.empty()) state.cost_history.push_back(before);
    ++state.iteration;
    stats.iteration = state.iteration;
    state.cost_history.push_back(stats.cost);
    return stats;
}

ReconstructResult run_icd(const IcdProblem& problem, IcdState state, const ReconstructOptions& opts) {
    if (opts.n_iterations < 0) throw ConfigError("optimizer.iterations must be >= 0");
    ReconstructResult result;
    while (state.iteration < opts.n_iterations) {
        SweepStats stats = icd_sweep(state, problem, opts.order, opts.seed, opts.descent_tolerance);
        if (opts.checkpoint_every > 0 && state.iteration % opts.checkpoint_every == 0) {
            problem.refresh(state);
            if (opts.on_checkpoint) opts.on_checkpoint(state);
        }
        if (opts.on_sweep) opts.on_sweep(state, stats);
        result.sweeps.push_back(stats);
        if (opts.tolerance > 0.0 && stats.max_update < opts.tolerance) {
            result.converged = true;
            break;
        }
    }
    result.state = std::move(state);
    return result;
}

ReconstructResult reconstruct(const SpectralSinogram& y, const MixingMatrix& mix, const SystemMatrix& a,
                              const WeightMatrix& d, const RegularizerConfig& reg, const ReconstructOptions& opts,
                              double voxel_mm) {
    const IcdProblem problem(a, mix, y, d, reg, true);
    return run_icd(problem, problem.zero_state(voxel_mm), opts);
}

ReconstructResult reconstruct(const SpectralSinogram& y, const MixingMatrix& mix, const FanBeamGeometry& geom,
                              const WeightMatrix& d, const RegularizerConfig& reg, const ReconstructOptions& opts) {
    const SystemMatrix a = build_system_matrix(geom);
    return reconstruct(y, mix, a, d, reg, opts, geom.voxel_mm);
}

MixingMatrix identity_mixing(const std::string& name) {
    MixingMatrix m;
    m.lac = Eigen::MatrixXd::Identity(1, 1);
    m.bin_edges_kev = {0.0, 1.0};
    m.materials = {name};
    return m;
}

ReconstructResult scalar_reconstruct(const SpectralSinogram& y_bin, const SystemMatrix& a, const WeightMatrix& d,
                                     const RegularizerConfig& reg, const ReconstructOptions& opts,
                                     double voxel_mm) {
    if (y_bin.n_bins != 1) throw ShapeError("scalar reconstruction expects a single-bin sinogram");
    const IcdProblem problem(a, identity_mixing(), y_bin, d, reg, false);
    return run_icd(problem, problem.zero_state(voxel_mm), opts);
}

ReconstructResult scalar_reconstruct(const SpectralSinogram& y_bin, const FanBeamGeometry& geom,
                                     const WeightMatrix& d, const RegularizerConfig& reg,
                                     const ReconstructOptions& opts) {
    const SystemMatrix a = build_system_matrix(geom);
    return scalar_reconstruct(y_bin, a, d, reg, opts, geom.voxel_mm);
}

double light_prior_sigma(const SystemMatrix& a, const MixingMatrix& mix, const WeightMatrix& d, double fraction) {
    if (!(fraction > 0.0)) throw ConfigError("prior fraction must be > 0");
    const auto nb = static_cast<int>(mix.n_bins());
    if (d.n_bins != nb || d.n_rays != a.n_rays()) throw ShapeError("weights do not match the system matrix");
    std::vector<double> curv;
    curv.reserve(a.n_voxels());
    for (std::size_t l = 0; l < a.n_voxels(); ++l) {
        const auto col = a.column(l);
        if (col.empty()) continue;
        double smallest = std::numeric_limits<double>::infinity();
        std::vector<double> theta2(static_cast<std::size_t>(nb), 0.0);
        for (std::size_t k = 0; k < col.size(); ++k) {
            for (int e = 0; e < nb; ++e) theta2[e] += col.lengths[k] * col.lengths[k] * d.at(e, col.rays[k]);
        }
        for (Eigen::Index m = 0; m < mix.n_materials(); ++m) {
            double h = 0.0;
            for (int e = 0; e < nb; ++e) h += theta2[e] * mix.lac(e, m) * mix.lac(e, m);
            smallest = std::min(smallest, h);
        }
        curv.push_back(smallest);
    }
    if (curv.empty()) throw NumericError("no voxel is seen by any ray");
    auto mid = curv.begin() + static_cast<std::ptrdiff_t>(curv.size() / 2);
    std::nth_element(curv.begin(), mid, curv.end());
    const double median = *mid;
    if (!(median > 0.0)) throw NumericError("median data curvature is zero; cannot scale the prior");
    return 1.0 / std::sqrt(fraction * median);
}

} // namespace sct

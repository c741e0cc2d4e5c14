#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sct/geometry.hpp"
#include "sct/image.hpp"
#include "sct/regularizer.hpp"
#include "sct/sinogram.hpp"
#include "sct/spectral_model.hpp"
#include "sct/system_matrix.hpp"
#include "sct/voxel_qp.hpp"

namespace sct {

/// Mutable state of a coordinate-descent run. `error` holds the sinogram
/// residual y - A (M x^T)^T ray-major (`error[ray * n_bins + bin]`).
struct IcdState {
    MaterialImage image;
    std::vector<double> error;
    int iteration = 0;
    std::vector<double> cost_history;
};

struct SweepStats {
    int iteration = 0;
    double cost = 0.0;
    double max_update = 0.0;
    /// Largest KKT residual of any voxel update, relative to the subproblem scale.
    double max_kkt = 0.0;
    std::size_t updated = 0;
};

/// Read-only pieces of the MAP problem
///   1/2 sum_e (y_e - A (M x^T)^T_e)^T D_e (...) + U(x).
/// Keeps a reference to the system matrix, which must outlive it.
class IcdProblem {
public:
    IcdProblem(const SystemMatrix& a, const MixingMatrix& mix, const SpectralSinogram& sino,
               const WeightMatrix& weights, RegularizerConfig reg, bool sum_constraint = true);

    int n_bins() const { return n_bins_; }
    int n_materials() const { return n_materials_; }
    int image_n() const { return image_n_; }
    const SystemMatrix& system() const { return *a_; }
    const MixingMatrix& mixing() const { return mix_; }
    const RegularizerConfig& regularizer() const { return reg_; }
    bool sum_constraint() const { return sum_constraint_; }

    /// State for the given starting image with a freshly computed error.
    IcdState make_state(MaterialImage x0) const;
    IcdState zero_state(double voxel_mm) const;
    std::vector<double> error_from_scratch(const MaterialImage& x) const;
    /// Replace the incrementally updated error by a fresh computation.
    void refresh(IcdState& state) const;
    /// ||e_stored - e_fresh|| / ||e_fresh||.
    double error_drift(const IcdState& state) const;

    double data_cost(const IcdState& state) const;
    double cost(const IcdState& state) const;

    /// Quadratic model of the total cost in x_l, other voxels held fixed.
    VoxelQP subproblem(const IcdState& state, std::size_t l) const;

    /// One pass over `order`, updating each voxel to its constrained
    /// minimiser and the error sinogram incrementally.
    SweepStats sweep(IcdState& state, std::span<const std::size_t> order) const;

private:
    const SystemMatrix* a_;
    MixingMatrix mix_;
    RegularizerConfig reg_;
    bool sum_constraint_;
    int n_bins_;
    int n_materials_;
    int image_n_;
    std::size_t n_rays_;
    std::vector<double> y_;       // ray-major
    std::vector<double> weights_; // ray-major
};

double spectral_cost(const IcdState& state, const IcdProblem& problem);
VoxelQP voxel_subproblem(const IcdState& state, std::size_t l, const IcdProblem& problem);

enum class VisitOrder { raster, shuffled };

/// Raster order, or a permutation drawn from (seed, iteration) so a resumed
/// run replays the same sequence.
std::vector<std::size_t> visit_order(std::size_t n_voxels, VisitOrder order, std::uint64_t seed, int iteration);

/// Runs one sweep and enforces monotone descent: a cost increase beyond
/// `descent_tolerance` throws ConsistencyError.
SweepStats icd_sweep(IcdState& state, const IcdProblem& problem, VisitOrder order = VisitOrder::raster,
                     std::uint64_t seed = 0, double descent_tolerance = 1e-9);

struct ReconstructOptions {
    int n_iterations = 150;
    /// Stop early once the largest voxel change in a sweep falls below this; 0 disables.
    double tolerance = 0.0;
    VisitOrder order = VisitOrder::raster;
    std::uint64_t seed = 0;
    /// Every this many sweeps the error sinogram is recomputed from scratch
    /// and `on_checkpoint` fires; 0 disables both.
    int checkpoint_every = 0;
    double descent_tolerance = 1e-9;
    std::function<void(const IcdState&, const SweepStats&)> on_sweep;
    std::function<void(const IcdState&)> on_checkpoint;
};

struct ReconstructResult {
    IcdState state;
    std::vector<SweepStats> sweeps;
    bool converged = false;
};

/// Continue from `state` until `opts.n_iterations` sweeps in total have run.
ReconstructResult run_icd(const IcdProblem& problem, IcdState state, const ReconstructOptions& opts);

/// Spectral reconstruction of volume fractions from zero initialisation.
ReconstructResult reconstruct(const SpectralSinogram& y, const MixingMatrix& mix, const SystemMatrix& a,
                              const WeightMatrix& d, const RegularizerConfig& reg, const ReconstructOptions& opts,
                              double voxel_mm = 1.0);
ReconstructResult reconstruct(const SpectralSinogram& y, const MixingMatrix& mix, const FanBeamGeometry& geom,
                              const WeightMatrix& d, const RegularizerConfig& reg, const ReconstructOptions& opts);

/// Single-bin LAC reconstruction: one component, identity mixing and a
/// non-negativity constraint only.
ReconstructResult scalar_reconstruct(const SpectralSinogram& y_bin, const SystemMatrix& a, const WeightMatrix& d,
                                     const RegularizerConfig& reg, const ReconstructOptions& opts,
                                     double voxel_mm = 1.0);
ReconstructResult scalar_reconstruct(const SpectralSinogram& y_bin, const FanBeamGeometry& geom,
                                     const WeightMatrix& d, const RegularizerConfig& reg,
                                     const ReconstructOptions& opts);

/// Identity mixing for a single bin, used by the scalar path.
MixingMatrix identity_mixing(const std::string& name = "lac");

/// sigma giving a prior curvature equal to `fraction` of the median, over
/// voxels seen by at least one ray, of the smallest diagonal entry of the
/// data Hessian.
double light_prior_sigma(const SystemMatrix& a, const MixingMatrix& mix, const WeightMatrix& d,
                         double fraction = 0.01);

} // namespace sct

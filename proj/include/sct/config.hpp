#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sct/geometry.hpp"
#include "sct/icd.hpp"
#include "sct/phantom.hpp"
#include "sct/spectral_model.hpp"

namespace sct {

struct TubeConfig {
    Tube tube; // concentration filled in per scan set
    double calibration_mg_per_ml = 0.0;
    double test_mg_per_ml = 0.0;
};

struct PhantomConfig {
    ScanSet scan = ScanSet::test;
    std::string complement = "water";
    double background_radius_mm = 27.0;
    std::vector<TubeConfig> tubes;
    std::optional<int> roi_half_width;

    PhantomSpec spec(const FanBeamGeometry& geom) const;
};

struct AcquisitionConfig {
    std::optional<std::vector<double>> i0; // explicit blank-scan counts per bin
    double mean_counts = 1500.0;           // otherwise scale I0 to this mean count
    NoiseMode noise = NoiseMode::poisson;
    double defect_rate = 0.0;
    double repaired_weight = 0.5;
};

struct OptimizerConfig {
    std::optional<double> sigma; // unset: derived from prior_fraction
    double prior_fraction = 0.01;
    int iterations = 150;
    double tolerance = 0.0;
    VisitOrder order = VisitOrder::raster;
    int checkpoint_every = 10;
    bool resume = true;
};

struct CalibrationConfig {
    std::optional<std::filesystem::path> lac_images; // skip per-bin reconstruction
    double max_condition = 1e12;
    int iterations = 150;
};

struct PathsConfig {
    std::filesystem::path sinogram = "out/sinogram.bin";
    std::filesystem::path truth = "out/truth.img";
    std::filesystem::path lac_images = "out/lac.img";
    std::optional<std::filesystem::path> mixing; // calibrate output, reconstruct input
    std::filesystem::path output_dir = "out/recon";
    std::filesystem::path checkpoint = "out/recon/checkpoint.img";
    std::filesystem::path cost_log = "out/recon/cost.csv";
    std::filesystem::path report_txt = "out/report.txt";
    std::filesystem::path report_csv = "out/report.csv";
};

/// Everything a command needs. Relative paths are resolved against the
/// directory holding the config file.
struct RunConfig {
    std::filesystem::path source;
    FanBeamGeometry geometry;
    std::vector<MaterialSpec> materials;
    MixingMatrix mixing; // forward model used for simulation
    PhantomConfig phantom;
    AcquisitionConfig acquisition;
    OptimizerConfig optimizer;
    CalibrationConfig calibration;
    PathsConfig paths;
    std::uint64_t seed = 1;
    int threads = 1;
    bool verbose = false;

    std::vector<std::string> material_names() const;
};

/// Throws ConfigError naming the offending key on any problem.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);

} // namespace sct

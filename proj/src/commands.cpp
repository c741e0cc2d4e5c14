#include "sct/commands.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>

#include "sct/error.hpp"
#include "sct/icd.hpp"
#include "sct/io.hpp"
#include "sct/system_matrix.hpp"

namespace sct {

namespace {

MaterialImage truth_phantom(const RunConfig& cfg) {
    return build_phantom(cfg.phantom.spec(cfg.geometry), cfg.materials, cfg.material_names());
}

RegularizerConfig regularizer_for(const RunConfig& cfg, const SystemMatrix& a, const MixingMatrix& mix,
                                  const WeightMatrix& w) {
    RegularizerConfig reg;
    reg.sigma = cfg.optimizer.sigma ? *cfg.optimizer.sigma : light_prior_sigma(a, mix, w, cfg.optimizer.prior_fraction);
    return reg;
}

void require_file(const std::filesystem::path& p, const char* what) {
    if (!std::filesystem::exists(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
}

} // namespace

std::filesystem::path material_image_path(const RunConfig& cfg, const std::string& material) {
    return cfg.paths.output_dir / (material + ".img");
}

void cmd_simulate(const RunConfig& cfg, std::ostream& log) {
    const auto& g = cfg.geometry;
    const SystemMatrix a = build_system_matrix(g, cfg.threads);
    const MaterialImage phantom = truth_phantom(cfg);

    std::vector<double> i0;
    if (cfg.acquisition.i0) {
        i0 = *cfg.acquisition.i0;
    } else {
        const double t = mean_transmission(phantom, cfg.mixing, a);
        i0.assign(static_cast<std::size_t>(cfg.mixing.n_bins()), cfg.acquisition.mean_counts / t);
    }

    auto [counts, sino] = simulate_counts(phantom, cfg.mixing, a, g.n_views, g.n_channels, i0, cfg.seed,
                                          cfg.acquisition.noise, cfg.threads);
    if (cfg.acquisition.defect_rate > 0.0) {
        sino = inject_and_correct_defects(sino, cfg.acquisition.defect_rate, cfg.seed, cfg.acquisition.repaired_weight);
    }
    write_sinogram(cfg.paths.sinogram, sino);
    write_image(cfg.paths.truth, phantom);

    double mean = 0.0;
    for (double c : sino.counts) mean += c;
    mean /= static_cast<double>(sino.cells());
    log << fmt::format("simulate: {} bins x {} views x {} channels, I0 = {:.1f}, mean count {:.1f}\n", sino.n_bins,
                       sino.n_views, sino.n_channels, i0.front(), mean);
    log << "simulate: wrote " << cfg.paths.sinogram.string() << " and " << cfg.paths.truth.string() << "\n";
}

void cmd_calibrate(const RunConfig& cfg, std::ostream& log) {
    if (!cfg.paths.mixing) throw ConfigError("calibrate needs 'paths.mixing' for its output");
    const MaterialImage truth = truth_phantom(cfg);
    const auto n_bins = static_cast<int>(cfg.mixing.n_bins());

    MaterialImage lac;
    if (cfg.calibration.lac_images) {
        require_file(*cfg.calibration.lac_images, "LAC image file");
        lac = read_image(*cfg.calibration.lac_images);
        if (lac.image_n != truth.image_n || lac.n_components != n_bins) {
            throw ShapeError(fmt::format("LAC images: expected {} bins on a {}^2 grid, got {} on {}^2", n_bins,
                                         truth.image_n, lac.n_components, lac.image_n));
        }
    } else {
        require_file(cfg.paths.sinogram, "sinogram file");
        const SpectralSinogram sino = read_sinogram(cfg.paths.sinogram);
        if (sino.n_bins != n_bins) {
            throw ShapeError(fmt::format("sinogram has {} bins, configuration {}", sino.n_bins, n_bins));
        }
        const SystemMatrix a = build_system_matrix(cfg.geometry, cfg.threads);
        std::vector<std::string> names;
        for (int e = 0; e < n_bins; ++e) names.push_back(fmt::format("bin{}", e + 1));
        lac = MaterialImage(cfg.geometry.image_n, names, cfg.geometry.voxel_mm);
        ReconstructOptions opts;
        opts.n_iterations = cfg.calibration.iterations;
        opts.tolerance = cfg.optimizer.tolerance;
        opts.order = cfg.optimizer.order;
        opts.seed = cfg.seed;
        for (int e = 0; e < n_bins; ++e) {
            const SpectralSinogram bin = select_bin(sino, e);
            const WeightMatrix w = make_weights(bin);
            const RegularizerConfig reg = regularizer_for(cfg, a, identity_mixing(), w);
            const auto result = scalar_reconstruct(bin, a, w, reg, opts, cfg.geometry.voxel_mm);
            lac.set_component(e, result.state.image.component(0));
            log << fmt::format("calibrate: bin {} reconstructed ({} sweeps, final cost {:.6e})\n", e + 1,
                               result.state.iteration, result.state.cost_history.empty() ? 0.0 : result.state.cost_history.back());
        }
        write_image(cfg.paths.lac_images, lac);
    }

    const auto rois = tube_rois(cfg.phantom.spec(cfg.geometry), cfg.phantom.roi_half_width);
    std::vector<std::size_t> voxels;
    for (const auto& r : rois) {
        for (int row = r.center_row - r.half_width; row <= r.center_row + r.half_width; ++row) {
            for (int col = r.center_col - r.half_width; col <= r.center_col + r.half_width; ++col) {
                voxels.push_back(static_cast<std::size_t>(row) * truth.image_n + col);
            }
        }
    }
    CalibrationSet cal;
    cal.lac_samples.resize(n_bins, static_cast<Eigen::Index>(voxels.size()));
    cal.truth.resize(static_cast<Eigen::Index>(voxels.size()), truth.n_components);
    for (std::size_t q = 0; q < voxels.size(); ++q) {
        for (int e = 0; e < n_bins; ++e) cal.lac_samples(e, static_cast<Eigen::Index>(q)) = lac.at(voxels[q], e);
        for (int m = 0; m < truth.n_components; ++m) cal.truth(static_cast<Eigen::Index>(q), m) = truth.at(voxels[q], m);
    }
    cal.bin_edges_kev = cfg.mixing.bin_edges_kev;
    cal.materials = cfg.material_names();

    const CalibrationResult result = calibrate_mixing_matrix(cal, cfg.calibration.max_condition);
    write_mixing_matrix(*cfg.paths.mixing, result.mixing);
    log << fmt::format("calibrate: {} ROI voxels, residual {:.3e}, cond(x^T x) {:.3e}, cond(M) {:.3e}\n",
                       voxels.size(), result.residual_norm, result.gram_condition, condition_number(result.mixing));
    log << "calibrate: wrote " << cfg.paths.mixing->string() << "\n";
}

void cmd_reconstruct(const RunConfig& cfg, std::ostream& log) {
    require_file(cfg.paths.sinogram, "sinogram file");
    const SpectralSinogram sino = read_sinogram(cfg.paths.sinogram);
    MixingMatrix mix = cfg.mixing;
    if (cfg.paths.mixing) {
        require_file(*cfg.paths.mixing, "mixing matrix file");
        mix = read_mixing_matrix(*cfg.paths.mixing);
    }
    const SystemMatrix a = build_system_matrix(cfg.geometry, cfg.threads);
    const WeightMatrix w = make_weights(sino);
    const RegularizerConfig reg = regularizer_for(cfg, a, mix, w);
    const IcdProblem problem(a, mix, sino, w, reg, true);

    const double cond = condition_number(mix);
    if (cond > 1e3) log << fmt::format("reconstruct: warning: mixing matrix condition number {:.3e}\n", cond);

    IcdState state;
    std::string log_text = "iter,cost,max_update\n";
    if (cfg.optimizer.resume && std::filesystem::exists(cfg.paths.checkpoint)) {
        std::uint64_t iteration = 0;
        MaterialImage img = read_image(cfg.paths.checkpoint, &iteration);
        if (img.image_n != cfg.geometry.image_n || img.names != mix.materials) {
            throw ShapeError("checkpoint " + cfg.paths.checkpoint.string() + " does not match this reconstruction");
        }
        state = problem.make_state(std::move(img));
        state.iteration = static_cast<int>(iteration);
        if (std::filesystem::exists(cfg.paths.cost_log)) {
            std::istringstream in(read_file(cfg.paths.cost_log));
            std::string line;
            std::getline(in, line);
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                if (std::stoll(line.substr(0, line.find(','))) > static_cast<long long>(iteration)) break;
                log_text += line + "\n";
            }
        }
        log << fmt::format("reconstruct: resuming from {} at sweep {}\n", cfg.paths.checkpoint.string(), iteration);
    } else {
        state = problem.zero_state(cfg.geometry.voxel_mm);
        log_text += fmt::format("0,{:.17g},0\n", problem.cost(state));
    }
    write_file_atomic(cfg.paths.cost_log, log_text);

    std::ofstream cost_log(cfg.paths.cost_log, std::ios::app);
    if (!cost_log) throw IoError("cannot append to " + cfg.paths.cost_log.string());

    ReconstructOptions opts;
    opts.n_iterations = cfg.optimizer.iterations;
    opts.tolerance = cfg.optimizer.tolerance;
    opts.order = cfg.optimizer.order;
    opts.seed = cfg.seed;
    opts.checkpoint_every = cfg.optimizer.checkpoint_every;
    opts.on_sweep = [&](const IcdState&, const SweepStats& s) {
        cost_log << fmt::format("{},{:.17g},{:.17g}\n", s.iteration, s.cost, s.max_update) << std::flush;
    };
    opts.on_checkpoint = [&](const IcdState& s) {
        write_image(cfg.paths.checkpoint, s.image, static_cast<std::uint64_t>(s.iteration));
    };

    const auto result = run_icd(problem, std::move(state), opts);
    const auto& img = result.state.image;
    write_image(cfg.paths.checkpoint, img, static_cast<std::uint64_t>(result.state.iteration));
    for (int m = 0; m < img.n_components; ++m) {
        MaterialImage one(img.image_n, {img.names[m]}, img.voxel_mm);
        one.set_component(0, img.component(m));
        write_image(material_image_path(cfg, img.names[m]), one);
    }
    log << fmt::format("reconstruct: {} sweeps, sigma {:.4g}, final cost {:.10e}\n", result.state.iteration,
                       reg.sigma, result.state.cost_history.empty() ? problem.cost(result.state) : result.state.cost_history.back());
}

std::string format_report(const RoiTable& truth, const RoiTable& estimate) {
    const auto errors = error_table(estimate, truth);
    std::string out;
    auto header = [&](const std::string& title) {
        out += title + "\n";
        out += fmt::format("{:<8}", "ROI");
        for (const auto& m : truth.materials) out += fmt::format(" {:>12}", m);
        out += "\n";
    };
    auto values = [&](const RoiTable& t) {
        for (std::size_t r = 0; r < t.rois.size(); ++r) {
            out += fmt::format("{:<8}", t.rois[r]);
            for (double v : t.means[r]) out += fmt::format(" {:>12.6f}", v);
            out += "\n";
        }
        out += "\n";
    };
    header("Ground truth (volume fraction)");
    values(truth);
    header("Estimated values (volume fraction)");
    values(estimate);
    header("Error (%)");
    for (std::size_t r = 0; r < truth.rois.size(); ++r) {
        out += fmt::format("{:<8}", truth.rois[r]);
        for (const auto& e : errors[r]) out += e ? fmt::format(" {:>11.2f}%", *e) : fmt::format(" {:>12}", "---");
        out += "\n";
    }
    return out;
}

std::string format_report_csv(const RoiTable& truth, const RoiTable& estimate) {
    const auto errors = error_table(estimate, truth);
    std::string out = "roi,material,truth,estimate,percent_error\n";
    for (std::size_t r = 0; r < truth.rois.size(); ++r) {
        for (std::size_t m = 0; m < truth.materials.size(); ++m) {
            out += fmt::format("{},{},{:.12g},{:.12g},{}\n", truth.rois[r], truth.materials[m], truth.means[r][m],
                               estimate.means[r][m], errors[r][m] ? fmt::format("{:.12g}", *errors[r][m]) : "n/a");
        }
    }
    return out;
}

void cmd_report(const RunConfig& cfg, std::ostream& out) {
    const auto names = cfg.material_names();
    MaterialImage est(cfg.geometry.image_n, names, cfg.geometry.voxel_mm);
    for (int m = 0; m < static_cast<int>(names.size()); ++m) {
        const auto path = material_image_path(cfg, names[m]);
        require_file(path, "material image");
        const MaterialImage one = read_image(path);
        if (one.image_n != est.image_n || one.n_components != 1) throw ShapeError(path.string() + ": unexpected dimensions");
        est.set_component(m, one.data);
    }
    MaterialImage truth = std::filesystem::exists(cfg.paths.truth) ? read_image(cfg.paths.truth) : truth_phantom(cfg);
    if (truth.image_n != est.image_n || truth.names != est.names) throw ShapeError("ground truth does not match the estimates");

    const auto rois = tube_rois(cfg.phantom.spec(cfg.geometry), cfg.phantom.roi_half_width);
    const RoiTable t = roi_stats(truth, rois);
    const RoiTable e = roi_stats(est, rois);
    const std::string text = format_report(t, e);
    write_file_atomic(cfg.paths.report_txt, text);
    write_file_atomic(cfg.paths.report_csv, format_report_csv(t, e));
    out << text;
}

} // namespace sct

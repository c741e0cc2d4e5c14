#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "sct/config.hpp"
#include "sct/phantom.hpp"

namespace sct {

/// Writes the sinogram and the ground-truth volume-fraction image.
void cmd_simulate(const RunConfig& cfg, std::ostream& log);
/// Reconstructs one LAC image per bin (unless precomputed LAC images are
/// configured), fits the mixing matrix over the tube ROIs and writes it.
void cmd_calibrate(const RunConfig& cfg, std::ostream& log);
/// Writes one image per material, a checkpoint and the cost log; resumes
/// from the checkpoint when one exists and resuming is enabled.
void cmd_reconstruct(const RunConfig& cfg, std::ostream& log);
/// Writes the ROI truth / estimate / percent-error tables as text and CSV.
void cmd_report(const RunConfig& cfg, std::ostream& out);

std::filesystem::path material_image_path(const RunConfig& cfg, const std::string& material);

/// Aligned text rendering of the three ROI tables.
std::string format_report(const RoiTable& truth, const RoiTable& estimate);
/// roi,material,truth,estimate,percent_error with 12 significant digits;
/// "n/a" where the truth is zero.
std::string format_report_csv(const RoiTable& truth, const RoiTable& estimate);

/// Entry point shared by the `sct` executable and the CLI tests. Returns
/// 0 on success, 1 for usage/config errors, 2 for runtime errors.
int cli_main(int argc, const char* const* argv);
int cli_main(const std::vector<std::string>& args);

} // namespace sct

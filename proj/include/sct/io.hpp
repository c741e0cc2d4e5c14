#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "sct/image.hpp"
#include "sct/sinogram.hpp"
#include "sct/spectral_model.hpp"

namespace sct {

/// Binary containers are little-endian with 64-bit float payloads.
///
/// Image:    "SCTIMAGE" u32 version u32 dtype u32 image_n u32 n_components
///           f64 voxel_mm u64 iteration, then per component u32 length +
///           UTF-8 name, then image_n^2 * n_components f64 voxel-major.
/// Sinogram: "SCTSINOG" u32 version u32 dtype u32 n_bins u32 n_views
///           u32 n_channels u32 reserved, f64 i0[n_bins], then the line
///           integral, count and weight-scale planes, each bin-major.
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::uint32_t kDtypeF64LE = 1;

/// `iteration` tags checkpoints; 0 for plain images.
void write_image(const std::filesystem::path& path, const MaterialImage& img, std::uint64_t iteration = 0);
MaterialImage read_image(const std::filesystem::path& path, std::uint64_t* iteration = nullptr);

void write_sinogram(const std::filesystem::path& path, const SpectralSinogram& sino);
SpectralSinogram read_sinogram(const std::filesystem::path& path);

/// Text: "E M", E rows of M values, one line of E+1 bin edges (keV), one
/// line of M material names. Values are printed with 17 significant digits
/// so a read-back is bit-exact.
void write_mixing_matrix(const std::filesystem::path& path, const MixingMatrix& mix);
MixingMatrix read_mixing_matrix(const std::filesystem::path& path);

/// Writes `contents` to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

} // namespace sct

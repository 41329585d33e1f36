#pragma once

#include <filesystem>

#include "sasnet/volume.hpp"

namespace sasnet {

/// `.vvol` layout, all little-endian: "VVOL0001", u64 depth/height/width,
/// f64 spacing z/y/x, then depth*height*width f32 values row-major.
inline constexpr char kVvolMagic[8] = {'V', 'V', 'O', 'L', '0', '0', '0', '1'};
inline constexpr std::size_t kVvolHeaderBytes = 8 + 3 * 8 + 3 * 8;

void save_vvol(const Volume3& v, const std::filesystem::path& path);
Volume3 load_vvol(const std::filesystem::path& path);

void save_mask(const BinaryMask& m, const std::filesystem::path& path);
BinaryMask load_mask(const std::filesystem::path& path);

}  // namespace sasnet

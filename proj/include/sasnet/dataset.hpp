#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "sasnet/volume.hpp"

namespace sasnet {

/// Axis-aligned ellipsoid in voxel coordinates, (z, y, x) order.
struct Ellipsoid {
  std::array<double, 3> center{};
  std::array<double, 3> radii{};

  bool contains(double z, double y, double x) const {
    const double dz = (z - center[0]) / radii[0];
    const double dy = (y - center[1]) / radii[1];
    const double dx = (x - center[2]) / radii[2];
    return dz * dz + dy * dy + dx * dx <= 1.0;
  }
};

struct Sample {
  int id = 0;
  Volume3 image;
  BinaryMask label;
  /// Generator draws, kept so labels can be re-derived independently.
  std::vector<Ellipsoid> shapes;
};

struct Dataset {
  std::vector<Sample> samples;
  std::vector<int> labeled_ids;  // sorted ascending
  std::uint64_t seed = 0;

  bool is_labeled(int id) const;
  const Sample& sample(int id) const { return samples.at(static_cast<std::size_t>(id)); }
};

inline constexpr double kForegroundMean = 1.0;
inline constexpr double kBackgroundMean = 0.0;
inline constexpr double kIntensityNoise = 0.1;

/// Union of ellipsoid indicators sampled at voxel centres.
BinaryMask rasterize(Dims dims, const std::vector<Ellipsoid>& shapes);

/// Phantom volumes holding 1-3 ellipsoids; deterministic for a given seed.
Dataset synth_dataset(int n, Dims dims, double labeled_ratio, std::uint64_t seed);

/// Writes `manifest.json` plus one image and one label `.vvol` per sample.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace sasnet

#pragma once

#include <vector>

#include "sasnet/volume.hpp"

namespace sasnet {

struct Overlap {
  double dice = 0.0;
  double jaccard = 0.0;
};

/// Dice and Jaccard of two masks; both empty counts as perfect agreement.
Overlap dice_jaccard(const BinaryMask& pred, const BinaryMask& gt);

struct SurfaceDistance {
  double hd95 = 0.0;
  double asd = 0.0;
};

/// Pooled symmetric boundary-to-boundary distances (voxel units) between
/// 6-connected boundaries. hd95 is the linearly interpolated 95th percentile,
/// asd the mean. Throws undefined_metric when either mask is empty.
SurfaceDistance surface_distances(const BinaryMask& pred, const BinaryMask& gt);

/// Distance from every boundary voxel of `from` to the nearest boundary voxel
/// of `to`, in boundary-voxel storage order.
std::vector<double> directed_boundary_distances(const BinaryMask& from, const BinaryMask& to);

/// Percentile with linear interpolation between order statistics, q in [0, 1].
double percentile(std::vector<double> values, double q);

}  // namespace sasnet

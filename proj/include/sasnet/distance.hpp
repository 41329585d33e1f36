#pragma once

#include <cstdint>

#include "sasnet/volume.hpp"

namespace sasnet {

/// How voxels beyond the array faces are treated when looking for a
/// background neighbour.
enum class BoundaryEdge {
  outside_is_background,  // objects touching a face have a surface there
  outside_ignored,        // only in-array neighbours count
};

/// Foreground voxels with at least one 6-connected background neighbour.
BinaryMask find_boundaries(const BinaryMask& m,
                           BoundaryEdge edge = BoundaryEdge::outside_is_background);

using SquaredDistances = Eigen::Array<std::int64_t, Eigen::Dynamic, 1>;

/// Exact squared Euclidean distance (voxel units) from every voxel to the
/// nearest zero voxel; zero voxels map to 0. Separable lower-envelope scheme
/// evaluated in integer arithmetic. Throws degenerate_input if `m` has no
/// zero voxel.
SquaredDistances squared_edt(const BinaryMask& m);

/// sqrt of squared_edt.
Volume<double> edt(const BinaryMask& m);

/// Normalised signed distance map: Negdis/max(Negdis) - Posdis/max(Posdis),
/// negative inside the object, zero on the object's in-array border, in
/// [-1, 1]. Throws degenerate_input for all-foreground or all-background.
Volume<double> signed_distance_map(const BinaryMask& m);

}  // namespace sasnet

#pragma once

#include <cmath>

#include "sasnet/volume.hpp"

namespace sasnet {

/// Zero mean, unit population standard deviation. A constant volume maps to
/// all zeros. Moments are accumulated in double regardless of Scalar.
template <typename Scalar>
Volume<Scalar> zscore_normalize(const Volume<Scalar>& v) {
  if (v.size() < 2) fail(ErrorKind::contract, "zscore_normalize needs at least 2 voxels");
  const Eigen::ArrayXd x = v.data().template cast<double>();
  const double mean = x.mean();
  const double sd = std::sqrt((x - mean).square().mean());
  if (!(sd > 0) || sd < 1e-12 * std::max(1.0, std::abs(mean))) {
    return Volume<Scalar>(v.dims(), Volume<Scalar>::Array::Zero(v.size()), v.spacing());
  }
  return Volume<Scalar>(v.dims(), ((x - mean) / sd).template cast<Scalar>(), v.spacing());
}

}  // namespace sasnet

#include "sasnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sasnet/distance.hpp"

namespace sasnet {

Overlap dice_jaccard(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_dims(pred.dims(), gt.dims(), "dice_jaccard");
  const auto p = pred.data().cast<Index>();
  const auto g = gt.data().cast<Index>();
  const Index inter = (p * g).sum();
  const Index sum = p.sum() + g.sum();
  if (sum == 0) return {1.0, 1.0};
  const Index uni = sum - inter;
  return {2.0 * double(inter) / double(sum), double(inter) / double(uni)};
}

std::vector<double> directed_boundary_distances(const BinaryMask& from, const BinaryMask& to) {
  const BinaryMask from_border = find_boundaries(from);
  const BinaryMask to_border = find_boundaries(to);
  // zeros of the complement are exactly the target boundary voxels
  const SquaredDistances d2 = squared_edt(to_border.complement());
  std::vector<double> out;
  for (Index i = 0; i < from_border.size(); ++i)
    if (from_border[i]) out.push_back(std::sqrt(double(d2[i])));
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) fail(ErrorKind::undefined_metric, "percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * double(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - double(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

SurfaceDistance surface_distances(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_dims(pred.dims(), gt.dims(), "surface_distances");
  if (pred.empty() || gt.empty()) {
    fail(ErrorKind::undefined_metric,
         std::string("surface distance undefined: ") + (pred.empty() ? "prediction" : "ground truth") +
             " is empty");
  }
  std::vector<double> pooled = directed_boundary_distances(pred, gt);
  const std::vector<double> back = directed_boundary_distances(gt, pred);
  pooled.insert(pooled.end(), back.begin(), back.end());
  const double asd = std::accumulate(pooled.begin(), pooled.end(), 0.0) / double(pooled.size());
  return {percentile(std::move(pooled), 0.95), asd};
}

}  // namespace sasnet

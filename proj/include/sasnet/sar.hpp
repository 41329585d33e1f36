#pragma once

#include <cmath>
#include <deque>
#include <filesystem>
#include <map>
#include <utility>
#include <vector>

#include "sasnet/fourier.hpp"
#include "sasnet/volume.hpp"

namespace sasnet {

enum class Branch { low, high };

constexpr const char* to_string(Branch b) { return b == Branch::low ? "low" : "high"; }

/// Per-voxel probability a branch gave to the true class, in [0, 1].
template <typename Scalar>
class ConfidenceMap {
 public:
  using Array = typename Volume<Scalar>::Array;

  ConfidenceMap() = default;
  explicit ConfidenceMap(Volume<Scalar> values) : values_(std::move(values)) {
    if ((values_.data() < 0).any() || (values_.data() > 1).any()) {
      fail(ErrorKind::validation, "confidence values must lie in [0, 1]");
    }
  }

  static ConfidenceMap zeros(Dims dims) { return ConfidenceMap(Volume<Scalar>(dims)); }

  const Dims& dims() const { return values_.dims(); }
  const Array& data() const { return values_.data(); }
  const Volume<Scalar>& volume() const { return values_; }

 private:
  Volume<Scalar> values_;
};

/// Reweighted two-channel scores; nonnegative, not normalised.
template <typename Scalar>
struct WeightedLogits {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  Dims dims;
  Array ch0;
  Array ch1;
};

struct SarConfig {
  double alpha = 0.5;                // residual coefficient
  double sharpen_temperature = 0.1;  // pseudo-label sharpening
  /// Weight the high branch with the low branch's confidence history, the
  /// literal reading of the high-branch reweighting formula. Off by default.
  bool literal_high_weighting = false;

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorKind::configuration, "alpha must lie in [0, 1]");
    if (!(sharpen_temperature > 0.0 && sharpen_temperature <= 1.0)) {
      fail(ErrorKind::configuration, "sharpening temperature must lie in (0, 1]");
    }
  }
};

/// C = p.ch0 where gt = 0, p.ch1 where gt = 1.
template <typename Scalar>
ConfidenceMap<Scalar> confidence_map(const ProbVolume<Scalar>& p, const BinaryMask& gt) {
  require_same_dims(p.dims(), gt.dims(), "confidence_map");
  const auto is_fg = gt.data().template cast<bool>();
  typename Volume<Scalar>::Array c = is_fg.select(p.foreground(), p.background());
  return ConfidenceMap<Scalar>(Volume<Scalar>(p.dims(), std::move(c)));
}

/// Per-voxel factor 1 + alpha * (c_prev1 + c_prev2) / 2, in [1, 1 + alpha].
template <typename Scalar>
typename Volume<Scalar>::Array reweight_factor(const ConfidenceMap<Scalar>& c_prev1,
                                               const ConfidenceMap<Scalar>& c_prev2, Scalar alpha) {
  require_same_dims(c_prev1.dims(), c_prev2.dims(), "reweight_factor");
  return Scalar(1) + alpha * (c_prev1.data() + c_prev2.data()) / Scalar(2);
}

/// Scales both channels of `p` by the confidence-history factor.
template <typename Scalar>
WeightedLogits<Scalar> reweight(const ProbVolume<Scalar>& p, const ConfidenceMap<Scalar>& c_prev1,
                                const ConfidenceMap<Scalar>& c_prev2, Scalar alpha) {
  require_same_dims(p.dims(), c_prev1.dims(), "reweight");
  if (!(alpha >= 0 && alpha <= 1)) fail(ErrorKind::configuration, "alpha must lie in [0, 1]");
  const auto f = reweight_factor(c_prev1, c_prev2, alpha);
  return {p.dims(), f * p.background(), f * p.foreground()};
}

/// Two-channel softmax of the summed weighted scores.
template <typename Scalar>
ProbVolume<Scalar> ensemble(const WeightedLogits<Scalar>& w_low, const WeightedLogits<Scalar>& w_high) {
  require_same_dims(w_low.dims, w_high.dims, "ensemble");
  const auto a0 = (w_low.ch0 + w_high.ch0).eval();
  const auto a1 = (w_low.ch1 + w_high.ch1).eval();
  const auto m = a0.max(a1).eval();
  const auto e0 = (a0 - m).exp().eval();
  const auto e1 = (a1 - m).exp().eval();
  const auto z = (e0 + e1).eval();
  return ProbVolume<Scalar>(w_low.dims, e0 / z, e1 / z);
}

/// Averaged branch probabilities, sharpened as avg^(1/T) / sum_c avg_c^(1/T).
template <typename Scalar>
ProbVolume<Scalar> pseudo_ensemble(const ProbVolume<Scalar>& p_low, const ProbVolume<Scalar>& p_high,
                                   Scalar temperature) {
  require_same_dims(p_low.dims(), p_high.dims(), "pseudo_ensemble");
  if (!(temperature > 0)) fail(ErrorKind::configuration, "temperature must be positive");
  const auto avg0 = ((p_low.background() + p_high.background()) / Scalar(2)).eval();
  const auto avg1 = ((p_low.foreground() + p_high.foreground()) / Scalar(2)).eval();
  if (temperature == Scalar(1)) return ProbVolume<Scalar>(p_low.dims(), avg0, avg1);

  const Scalar inv_t = Scalar(1) / temperature;
  typename ProbVolume<Scalar>::Array s0(avg0.size()), s1(avg0.size());
  for (Index i = 0; i < avg0.size(); ++i) {
    const Scalar q0 = std::pow(avg0[i], inv_t);
    const Scalar q1 = std::pow(avg1[i], inv_t);
    const Scalar den = q0 + q1;
    if (den > 0 && std::isfinite(den)) {
      s0[i] = q0 / den;
      s1[i] = q1 / den;
    } else {
      s0[i] = s1[i] = Scalar(0.5);
    }
  }
  return ProbVolume<Scalar>(p_low.dims(), std::move(s0), std::move(s1));
}

/// Last two confidence maps per (sample, branch), stored in the canonical
/// (unrotated) frame. Single writer.
class ConfidenceCache {
 public:
  static constexpr std::size_t kDepth = 2;

  struct Entry {
    int epoch;
    ConfidenceMap<double> map;
  };

  /// Appends a map; epochs must strictly increase per key. Evicts the oldest
  /// entry beyond two.
  void push(int sample_id, Branch branch, int epoch, ConfidenceMap<double> map);

  /// Entries for the key, most recent first (0, 1 or 2 of them).
  std::vector<const Entry*> recent(int sample_id, Branch branch) const;

  /// The i-th most recent map, or all zeros when the history is shorter.
  ConfidenceMap<double> history(int sample_id, Branch branch, std::size_t i, Dims dims) const;

  std::size_t size(int sample_id, Branch branch) const;
  std::vector<int> sample_ids() const;
  bool empty() const { return entries_.empty(); }

  /// Writes every entry as `{dir}/{sample_id}_{branch}_{epoch}.vvol`.
  void spill(const std::filesystem::path& dir) const;
  static ConfidenceCache load(const std::filesystem::path& dir);

 private:
  std::map<std::pair<int, Branch>, std::deque<Entry>> entries_;
};

/// One labeled-sample step of the adaptive reweighting: ensemble the current
/// branch outputs using the cached history, then record this epoch's maps.
/// `view` is the rotation that produced the inputs; cached maps are rotated
/// into that frame on read and back to canonical on write.
ProbVolume<double> sar_step_labeled(const ProbVolume<double>& p_low, const ProbVolume<double>& p_high,
                                    const BinaryMask& gt, ConfidenceCache& cache, int sample_id, int epoch,
                                    const SarConfig& cfg, const ViewSpec& view = {});

}  // namespace sasnet

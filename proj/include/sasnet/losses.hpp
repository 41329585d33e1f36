#pragma once

#include <algorithm>
#include <cmath>

#include "sasnet/volume.hpp"

namespace sasnet {

inline constexpr double kDiceSmooth = 1e-5;
inline constexpr double kProbClamp = 1e-7;

/// Volume-level soft Dice loss on the foreground channel:
/// 1 - (2 sum(p y) + eps) / (sum p + sum y + eps).
template <typename Scalar>
double dice_loss(const ProbVolume<Scalar>& p, const BinaryMask& y) {
  require_same_dims(p.dims(), y.dims(), "dice_loss");
  const Eigen::ArrayXd fg = p.foreground().template cast<double>();
  const Eigen::ArrayXd t = y.data().template cast<double>();
  return 1.0 - (2.0 * (fg * t).sum() + kDiceSmooth) / (fg.sum() + t.sum() + kDiceSmooth);
}

/// Mean of -log p(true class), probabilities clamped to [1e-7, 1 - 1e-7].
template <typename Scalar>
double ce_loss(const ProbVolume<Scalar>& p, const BinaryMask& y) {
  require_same_dims(p.dims(), y.dims(), "ce_loss");
  const Eigen::ArrayXd p0 = p.background().template cast<double>();
  const Eigen::ArrayXd p1 = p.foreground().template cast<double>();
  const auto fg = y.data().template cast<bool>();
  const Eigen::ArrayXd truth = fg.select(p1, p0).max(kProbClamp).min(1.0 - kProbClamp);
  return -truth.log().mean();
}

/// Mean squared disagreement over voxels and both channels.
template <typename Scalar>
double plc_loss(const ProbVolume<Scalar>& p_low, const ProbVolume<Scalar>& p_high) {
  require_same_dims(p_low.dims(), p_high.dims(), "plc_loss");
  const double s0 = (p_low.background() - p_high.background()).template cast<double>().square().sum();
  const double s1 = (p_low.foreground() - p_high.foreground()).template cast<double>().square().sum();
  return (s0 + s1) / (2.0 * double(p_low.size()));
}

/// Mean over voxels of (t - r_low)^2 + (t - r_high)^2.
template <typename Scalar>
double src_loss(const Volume<Scalar>& sdm_target, const Volume<Scalar>& r_low, const Volume<Scalar>& r_high) {
  require_same_dims(sdm_target.dims(), r_low.dims(), "src_loss");
  require_same_dims(sdm_target.dims(), r_high.dims(), "src_loss");
  const Eigen::ArrayXd t = sdm_target.data().template cast<double>();
  const Eigen::ArrayXd a = r_low.data().template cast<double>();
  const Eigen::ArrayXd b = r_high.data().template cast<double>();
  return ((t - a).square() + (t - b).square()).mean();
}

struct RampConfig {
  double gamma_max = 1.0;
  int ramp_epochs = 40;

  void validate() const {
    if (!(gamma_max > 0.0)) fail(ErrorKind::configuration, "gamma_max must be positive");
    if (ramp_epochs < 1) fail(ErrorKind::configuration, "ramp_epochs must be >= 1");
  }
};

/// Sigmoid-shaped ramp gamma_max * exp(-5 (1 - t)^2), t = min(epoch / ramp_epochs, 1).
inline double ramp_gamma(int epoch, const RampConfig& cfg = {}) {
  if (epoch < 0) fail(ErrorKind::contract, "ramp_gamma needs epoch >= 0");
  if (epoch >= cfg.ramp_epochs) return cfg.gamma_max;
  const double t = double(epoch) / double(cfg.ramp_epochs);
  return cfg.gamma_max * std::exp(-5.0 * (1.0 - t) * (1.0 - t));
}

/// Component losses of one sample before weighting.
struct LossParts {
  double l_dice = 0.0;
  double l_ce = 0.0;
  double l_plc = 0.0;
  double l_src = 0.0;
  bool labeled = false;
};

struct LossBreakdown {
  double l_seg = 0.0;
  double l_dice = 0.0;
  double l_ce = 0.0;
  double l_plc = 0.0;
  double l_src = 0.0;
  double gamma = 0.0;
  double total = 0.0;
};

/// total = beta * l_seg + gamma * (l_plc + l_src); l_seg only counts for labeled items.
inline LossBreakdown total_loss(const LossParts& parts, double beta, double gamma) {
  LossBreakdown out;
  out.l_dice = parts.labeled ? parts.l_dice : 0.0;
  out.l_ce = parts.labeled ? parts.l_ce : 0.0;
  out.l_seg = out.l_dice + out.l_ce;
  out.l_plc = parts.l_plc;
  out.l_src = parts.l_src;
  out.gamma = gamma;
  out.total = beta * out.l_seg + gamma * (out.l_plc + out.l_src);
  return out;
}

}  // namespace sasnet

#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>
#include <utility>

#include "sasnet/error.hpp"

namespace sasnet {

using Index = Eigen::Index;

/// Voxel counts in (depth, height, width) order; storage is depth-major.
struct Dims {
  Index depth = 0;
  Index height = 0;
  Index width = 0;

  constexpr Index count() const { return depth * height * width; }
  constexpr Index index(Index z, Index y, Index x) const { return (z * height + y) * width + x; }
  constexpr Index operator[](int axis) const { return axis == 0 ? depth : (axis == 1 ? height : width); }

  friend constexpr bool operator==(const Dims&, const Dims&) = default;

  std::string str() const {
    return std::to_string(depth) + "x" + std::to_string(height) + "x" + std::to_string(width);
  }
};

/// Millimetres per voxel in (z, y, x) order.
struct Spacing {
  double z = 1.0;
  double y = 1.0;
  double x = 1.0;

  friend constexpr bool operator==(const Spacing&, const Spacing&) = default;
};

inline void require_same_dims(const Dims& a, const Dims& b, const char* what) {
  if (!(a == b)) {
    fail(ErrorKind::geometry, std::string(what) + ": dims " + a.str() + " vs " + b.str());
  }
}

/// Dense scalar grid. Values are validated finite at construction and never
/// change afterwards.
template <typename Scalar>
class Volume {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Volume() = default;

  explicit Volume(Dims dims, Spacing spacing = {})
      : dims_(dims), spacing_(spacing), data_(Array::Zero(dims.count())) {
    check_geometry();
  }

  Volume(Dims dims, Array data, Spacing spacing = {})
      : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    check_geometry();
    if (data_.size() != dims_.count()) {
      fail(ErrorKind::length_mismatch, "volume data has " + std::to_string(data_.size()) +
                                           " values, dims " + dims_.str() + " need " +
                                           std::to_string(dims_.count()));
    }
    if (!data_.allFinite()) fail(ErrorKind::validation, "volume contains non-finite values");
  }

  static Volume constant(Dims dims, Scalar value, Spacing spacing = {}) {
    return Volume(dims, Array::Constant(dims.count(), value), spacing);
  }

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  const Array& data() const { return data_; }
  Index size() const { return data_.size(); }

  Scalar operator[](Index i) const { return data_[i]; }
  Scalar operator()(Index z, Index y, Index x) const { return data_[dims_.index(z, y, x)]; }

  template <typename Other>
  Volume<Other> cast() const {
    return Volume<Other>(dims_, data_.template cast<Other>(), spacing_);
  }

 private:
  void check_geometry() const {
    if (dims_.depth < 1 || dims_.height < 1 || dims_.width < 1) {
      fail(ErrorKind::geometry, "volume dims must be positive, got " + dims_.str());
    }
    if (!(spacing_.z > 0 && spacing_.y > 0 && spacing_.x > 0)) {
      fail(ErrorKind::validation, "volume spacing must be strictly positive");
    }
  }

  Dims dims_{};
  Spacing spacing_{};
  Array data_;
};

using Volume3 = Volume<float>;

/// Per-voxel {0, 1} labels.
class BinaryMask {
 public:
  using Array = Eigen::Array<std::uint8_t, Eigen::Dynamic, 1>;

  BinaryMask() = default;

  explicit BinaryMask(Dims dims) : dims_(dims), data_(Array::Zero(dims.count())) {}

  BinaryMask(Dims dims, Array data) : dims_(dims), data_(std::move(data)) {
    if (data_.size() != dims_.count()) {
      fail(ErrorKind::length_mismatch, "mask data length does not match dims " + dims_.str());
    }
    if ((data_ > 1).any()) fail(ErrorKind::validation, "mask values must be 0 or 1");
  }

  /// Voxels strictly above `threshold` become foreground.
  template <typename Scalar>
  static BinaryMask threshold(const Volume<Scalar>& v, Scalar threshold) {
    return BinaryMask(v.dims(), (v.data() > threshold).template cast<std::uint8_t>());
  }

  /// Interprets a volume that must hold only exact 0/1 values.
  template <typename Scalar>
  static BinaryMask from_volume(const Volume<Scalar>& v) {
    if (((v.data() != Scalar(0)) && (v.data() != Scalar(1))).any()) {
      fail(ErrorKind::validation, "mask volume holds values other than 0 and 1");
    }
    return BinaryMask(v.dims(), v.data().template cast<std::uint8_t>());
  }

  template <typename Scalar = float>
  Volume<Scalar> to_volume(Spacing spacing = {}) const {
    return Volume<Scalar>(dims_, data_.template cast<Scalar>(), spacing);
  }

  BinaryMask complement() const { return BinaryMask(dims_, (1 - data_).eval()); }

  const Dims& dims() const { return dims_; }
  const Array& data() const { return data_; }
  Index size() const { return data_.size(); }
  Index count() const { return data_.template cast<Index>().sum(); }
  bool empty() const { return count() == 0; }

  std::uint8_t operator[](Index i) const { return data_[i]; }
  std::uint8_t operator()(Index z, Index y, Index x) const { return data_[dims_.index(z, y, x)]; }

  friend bool operator==(const BinaryMask& a, const BinaryMask& b) {
    return a.dims_ == b.dims_ && (a.data_ == b.data_).all();
  }

 private:
  Dims dims_{};
  Array data_;
};

/// Two-channel (background, foreground) class probabilities per voxel.
template <typename Scalar>
class ProbVolume {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  static constexpr double kSumTolerance = 1e-6;

  ProbVolume() = default;

  ProbVolume(Dims dims, Array background, Array foreground)
      : dims_(dims), ch0_(std::move(background)), ch1_(std::move(foreground)) {
    if (ch0_.size() != dims_.count() || ch1_.size() != dims_.count()) {
      fail(ErrorKind::length_mismatch, "probability channels do not match dims " + dims_.str());
    }
    if (!ch0_.allFinite() || !ch1_.allFinite()) {
      fail(ErrorKind::validation, "probabilities must be finite");
    }
    if ((ch0_ < 0).any() || (ch0_ > 1).any() || (ch1_ < 0).any() || (ch1_ > 1).any()) {
      fail(ErrorKind::validation, "probabilities must lie in [0, 1]");
    }
    if (((ch0_ + ch1_) - Scalar(1)).abs().maxCoeff() > Scalar(kSumTolerance)) {
      fail(ErrorKind::validation, "probability channels must sum to 1");
    }
  }

  static ProbVolume from_foreground(Dims dims, const Array& foreground) {
    return ProbVolume(dims, (Scalar(1) - foreground).eval(), foreground);
  }

  static ProbVolume one_hot(const BinaryMask& mask) {
    Array fg = mask.data().template cast<Scalar>();
    return from_foreground(mask.dims(), fg);
  }

  const Dims& dims() const { return dims_; }
  const Array& background() const { return ch0_; }
  const Array& foreground() const { return ch1_; }
  const Array& channel(int c) const { return c == 0 ? ch0_ : ch1_; }
  Index size() const { return ch0_.size(); }

  /// Foreground where its probability strictly exceeds background; ties go
  /// to background.
  BinaryMask argmax() const {
    return BinaryMask(dims_, (ch1_ > ch0_).template cast<std::uint8_t>());
  }

  template <typename Other>
  ProbVolume<Other> cast() const {
    return ProbVolume<Other>(dims_, ch0_.template cast<Other>(), ch1_.template cast<Other>());
  }

 private:
  Dims dims_{};
  Array ch0_;
  Array ch1_;
};

}  // namespace sasnet

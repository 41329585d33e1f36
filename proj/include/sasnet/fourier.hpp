#pragma once

#include <complex>
#include <string>
#include <string_view>
#include <vector>

#include "sasnet/volume.hpp"

namespace sasnet {

/// Spectrum of a Volume3, stored in the same depth-major order.
class ComplexVolume {
 public:
  using Array = Eigen::ArrayXcd;

  ComplexVolume() = default;
  ComplexVolume(Dims dims, Array data);

  static ComplexVolume zeros(Dims dims) { return ComplexVolume(dims, Array::Zero(dims.count())); }

  const Dims& dims() const { return dims_; }
  const Array& data() const { return data_; }
  auto re() const { return data_.real(); }
  auto im() const { return data_.imag(); }
  Index size() const { return data_.size(); }

  std::complex<double> operator()(Index z, Index y, Index x) const { return data_[dims_.index(z, y, x)]; }

 private:
  Dims dims_{};
  Array data_;
};

enum class Axis { x, y, z };

/// Storage axis for a named spatial axis: z is depth (0), y height (1), x width (2).
constexpr int storage_axis(Axis a) { return a == Axis::z ? 0 : (a == Axis::y ? 1 : 2); }

/// A viewpoint: rotation by `angle_deg` in [0, 360) about `axis`.
struct ViewSpec {
  Axis axis = Axis::z;
  double angle_deg = 0.0;

  friend bool operator==(const ViewSpec&, const ViewSpec&) = default;

  /// Quarter turns when the angle is a multiple of 90, else -1.
  int quarter_turns() const;
  ViewSpec inverse() const;
  std::string str() const;
};

/// Parses `axis:angle[,axis:angle...]`, e.g. "z:0,z:90,y:90".
std::vector<ViewSpec> parse_view_specs(std::string_view text);

/// Identity, 90 degrees about z, 90 degrees about y.
std::vector<ViewSpec> default_view_specs();

bool is_power_of_two(Index n);

/// Forward DFT, exp(-2*pi*i*k.x/N) kernel, unscaled. Every dim must be a power of two.
ComplexVolume fft3(const Volume3& v);

/// Inverse DFT with 1/N scaling; the imaginary residue is dropped.
Volume3 ifft3(const ComplexVolume& c, Spacing spacing = {});

/// Complex-valued inverse, keeping the imaginary part.
ComplexVolume ifft3_complex(const ComplexVolume& c);

/// Rotates the spectrum about DC. Quarter turns are an exact index
/// permutation k -> R k (mod N); other angles resample with trilinear
/// interpolation on signed frequency coordinates, zero outside the band.
ComplexVolume rotate_freq(const ComplexVolume& c, const ViewSpec& view);

/// fft3 -> rotate_freq -> ifft3 for each spec, in order.
std::vector<Volume3> view_variance_views(const Volume3& v, const std::vector<ViewSpec>& specs);

/// Where the spatial rotation is anchored. `origin` is the circular rotation
/// about voxel 0 that a DC-anchored spectrum permutation produces; `center`
/// is the rigid symmetry of the grid about its centre.
enum class RotationAnchor { origin, center };

/// For each output voxel, the input voxel it is read from under a quarter-turn
/// rotation. Throws geometry if the rotation plane is not square for odd turns.
std::vector<Index> rotation_source_index(Dims dims, Axis axis, int quarter_turns,
                                         RotationAnchor anchor = RotationAnchor::origin);

template <typename ArrayT>
ArrayT permute(const ArrayT& src, const std::vector<Index>& source_index) {
  ArrayT out(src.size());
  for (Index i = 0; i < out.size(); ++i) out[i] = src[source_index[static_cast<std::size_t>(i)]];
  return out;
}

/// Spatial-domain rotation by index permutation; `view` must be a quarter turn.
template <typename Scalar>
Volume<Scalar> rotate_spatial(const Volume<Scalar>& v, const ViewSpec& view,
                              RotationAnchor anchor = RotationAnchor::origin);
BinaryMask rotate_spatial(const BinaryMask& m, const ViewSpec& view,
                          RotationAnchor anchor = RotationAnchor::origin);

}  // namespace sasnet

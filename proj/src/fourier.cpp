#include "sasnet/fourier.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <numbers>

namespace sasnet {

ComplexVolume::ComplexVolume(Dims dims, Array data) : dims_(dims), data_(std::move(data)) {
  if (data_.size() != dims_.count()) {
    fail(ErrorKind::length_mismatch, "spectrum length does not match dims " + dims_.str());
  }
  if (!data_.real().allFinite() || !data_.imag().allFinite()) {
    fail(ErrorKind::validation, "spectrum contains non-finite values");
  }
}

int ViewSpec::quarter_turns() const {
  const double q = angle_deg / 90.0;
  if (q != std::floor(q)) return -1;
  return static_cast<int>(q) % 4;
}

ViewSpec ViewSpec::inverse() const {
  return {axis, angle_deg == 0.0 ? 0.0 : 360.0 - angle_deg};
}

std::string ViewSpec::str() const {
  const char a = axis == Axis::x ? 'x' : (axis == Axis::y ? 'y' : 'z');
  std::string angle = std::to_string(angle_deg);
  angle.erase(angle.find_last_not_of('0') + 1);
  if (angle.back() == '.') angle.pop_back();
  return std::string(1, a) + ":" + angle;
}

std::vector<ViewSpec> parse_view_specs(std::string_view text) {
  std::vector<ViewSpec> specs;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const std::string_view item = text.substr(0, comma);
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    if (comma != std::string_view::npos && text.empty()) fail(ErrorKind::configuration, "trailing ',' in view specs");

    const auto colon = item.find(':');
    if (colon != 1) fail(ErrorKind::configuration, "view spec '" + std::string(item) + "' is not axis:angle");
    ViewSpec spec;
    switch (item[0]) {
      case 'x': spec.axis = Axis::x; break;
      case 'y': spec.axis = Axis::y; break;
      case 'z': spec.axis = Axis::z; break;
      default: fail(ErrorKind::configuration, "unknown view axis '" + std::string(1, item[0]) + "'");
    }
    const std::string_view angle = item.substr(2);
    auto [ptr, ec] = std::from_chars(angle.data(), angle.data() + angle.size(), spec.angle_deg);
    if (ec != std::errc{} || ptr != angle.data() + angle.size()) {
      fail(ErrorKind::configuration, "bad view angle '" + std::string(angle) + "'");
    }
    if (!(spec.angle_deg >= 0.0 && spec.angle_deg < 360.0)) {
      fail(ErrorKind::configuration, "view angle must lie in [0, 360)");
    }
    specs.push_back(spec);
  }
  if (specs.empty()) fail(ErrorKind::configuration, "no view specs given");
  return specs;
}

std::vector<ViewSpec> default_view_specs() {
  return {{Axis::z, 0.0}, {Axis::z, 90.0}, {Axis::y, 90.0}};
}

bool is_power_of_two(Index n) { return n > 0 && (n & (n - 1)) == 0; }

namespace {

using cd = std::complex<double>;

void require_pow2(const Dims& dims) {
  for (int a = 0; a < 3; ++a) {
    if (!is_power_of_two(dims[a])) {
      fail(ErrorKind::unsupported_size, "FFT needs power-of-two dims, got " + dims.str());
    }
  }
}

/// In-place iterative radix-2 transform of one contiguous line.
void fft_line(std::vector<cd>& a, const std::vector<cd>& twiddle, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t step = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const cd w = inverse ? std::conj(twiddle[k * step]) : twiddle[k * step];
        const cd u = a[i + k];
        const cd v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

/// Applies the 1D transform along every line of each axis. No scaling.
void transform_axes(ComplexVolume::Array& data, const Dims& dims, bool inverse) {
  const std::array<Index, 3> stride{dims.height * dims.width, dims.width, 1};
  for (int axis = 0; axis < 3; ++axis) {
    const Index n = dims[axis];
    if (n == 1) continue;
    std::vector<cd> twiddle(static_cast<std::size_t>(n / 2));
    for (Index k = 0; k < n / 2; ++k) {
      const double phase = -2.0 * std::numbers::pi * double(k) / double(n);
      twiddle[static_cast<std::size_t>(k)] = {std::cos(phase), std::sin(phase)};
    }
    std::vector<cd> line(static_cast<std::size_t>(n));
    const int a1 = axis == 0 ? 1 : 0;
    const int a2 = axis == 2 ? 1 : 2;
    for (Index i = 0; i < dims[a1]; ++i) {
      for (Index j = 0; j < dims[a2]; ++j) {
        const Index base = i * stride[a1] + j * stride[a2];
        for (Index k = 0; k < n; ++k) line[std::size_t(k)] = data[base + k * stride[axis]];
        fft_line(line, twiddle, inverse);
        for (Index k = 0; k < n; ++k) data[base + k * stride[axis]] = line[std::size_t(k)];
      }
    }
  }
}

/// Plane axes (p, q) for rotation about `axis`, cyclic so that a positive
/// quarter turn maps p onto q.
std::array<int, 2> plane_axes(Axis axis) {
  switch (axis) {
    case Axis::x: return {1, 0};  // (y, z)
    case Axis::y: return {0, 2};  // (z, x)
    case Axis::z: return {2, 1};  // (x, y)
  }
  return {0, 0};
}

}  // namespace

ComplexVolume fft3(const Volume3& v) {
  require_pow2(v.dims());
  ComplexVolume::Array data = v.data().cast<double>().cast<cd>();
  transform_axes(data, v.dims(), false);
  return ComplexVolume(v.dims(), std::move(data));
}

ComplexVolume ifft3_complex(const ComplexVolume& c) {
  require_pow2(c.dims());
  ComplexVolume::Array data = c.data();
  transform_axes(data, c.dims(), true);
  data /= double(c.dims().count());
  return ComplexVolume(c.dims(), std::move(data));
}

Volume3 ifft3(const ComplexVolume& c, Spacing spacing) {
  const ComplexVolume spatial = ifft3_complex(c);
  return Volume3(c.dims(), spatial.data().real().cast<float>(), spacing);
}

std::vector<Index> rotation_source_index(Dims dims, Axis axis, int quarter_turns, RotationAnchor anchor) {
  const int turns = ((quarter_turns % 4) + 4) % 4;
  const auto [p, q] = plane_axes(axis);
  if (turns % 2 == 1 && dims[p] != dims[q]) {
    fail(ErrorKind::geometry, "quarter-turn rotation needs a square plane, dims " + dims.str());
  }
  // negation of a coordinate along an axis of extent n
  auto negate = [anchor](Index c, Index n) {
    return anchor == RotationAnchor::origin ? (n - c) % n : n - 1 - c;
  };
  std::vector<Index> src(static_cast<std::size_t>(dims.count()));
  std::array<Index, 3> out{};
  for (out[0] = 0; out[0] < dims.depth; ++out[0])
    for (out[1] = 0; out[1] < dims.height; ++out[1])
      for (out[2] = 0; out[2] < dims.width; ++out[2]) {
        std::array<Index, 3> in = out;
        // source of output (p', q') under R^turns, R: (p, q) -> (-q, p)
        switch (turns) {
          case 1: in[p] = out[q]; in[q] = negate(out[p], dims[p]); break;
          case 2: in[p] = negate(out[p], dims[p]); in[q] = negate(out[q], dims[q]); break;
          case 3: in[p] = negate(out[q], dims[q]); in[q] = out[p]; break;
          default: break;
        }
        src[std::size_t(dims.index(out[0], out[1], out[2]))] = dims.index(in[0], in[1], in[2]);
      }
  return src;
}

ComplexVolume rotate_freq(const ComplexVolume& c, const ViewSpec& view) {
  if (!(view.angle_deg >= 0.0 && view.angle_deg < 360.0)) {
    fail(ErrorKind::configuration, "view angle must lie in [0, 360)");
  }
  const int turns = view.quarter_turns();
  if (turns == 0) return c;
  const Dims dims = c.dims();
  if (turns > 0) {
    return ComplexVolume(dims, permute(c.data(), rotation_source_index(dims, view.axis, turns)));
  }

  const auto [p, q] = plane_axes(view.axis);
  const double theta = view.angle_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);
  auto to_signed = [](Index k, Index n) { return k <= (n - 1) / 2 ? double(k) : double(k - n); };
  // signed frequency coordinate -> storage index, or -1 outside the band
  auto to_index = [](Index s, Index n) -> Index {
    if (s < -(n / 2) || s > (n - 1) / 2) return -1;
    return s < 0 ? s + n : s;
  };

  ComplexVolume::Array out = ComplexVolume::Array::Zero(dims.count());
  std::array<Index, 3> o{};
  for (o[0] = 0; o[0] < dims.depth; ++o[0])
    for (o[1] = 0; o[1] < dims.height; ++o[1])
      for (o[2] = 0; o[2] < dims.width; ++o[2]) {
        std::array<double, 3> s{to_signed(o[0], dims.depth), to_signed(o[1], dims.height),
                                to_signed(o[2], dims.width)};
        const double sp = s[p];
        const double sq = s[q];
        s[p] = cs * sp + sn * sq;
        s[q] = -sn * sp + cs * sq;

        std::array<Index, 3> base{};
        std::array<double, 3> frac{};
        for (int a = 0; a < 3; ++a) {
          const double fl = std::floor(s[a]);
          base[a] = static_cast<Index>(fl);
          frac[a] = s[a] - fl;
        }
        cd acc = 0.0;
        for (int corner = 0; corner < 8; ++corner) {
          double w = 1.0;
          std::array<Index, 3> idx{};
          bool inside = true;
          for (int a = 0; a < 3; ++a) {
            const int bit = (corner >> (2 - a)) & 1;
            w *= bit ? frac[a] : 1.0 - frac[a];
            idx[a] = to_index(base[a] + bit, dims[a]);
            inside = inside && idx[a] >= 0;
          }
          if (w != 0.0 && inside) acc += w * c.data()[dims.index(idx[0], idx[1], idx[2])];
        }
        out[dims.index(o[0], o[1], o[2])] = acc;
      }
  return ComplexVolume(dims, std::move(out));
}

std::vector<Volume3> view_variance_views(const Volume3& v, const std::vector<ViewSpec>& specs) {
  if (specs.empty()) fail(ErrorKind::configuration, "view_variance_views needs at least one spec");
  const ComplexVolume spectrum = fft3(v);
  std::vector<Volume3> views;
  views.reserve(specs.size());
  for (const auto& spec : specs) views.push_back(ifft3(rotate_freq(spectrum, spec), v.spacing()));
  return views;
}

template <typename Scalar>
Volume<Scalar> rotate_spatial(const Volume<Scalar>& v, const ViewSpec& view, RotationAnchor anchor) {
  const int turns = view.quarter_turns();
  if (turns < 0) fail(ErrorKind::configuration, "spatial rotation supports quarter turns only");
  if (turns == 0) return v;
  return Volume<Scalar>(v.dims(), permute(v.data(), rotation_source_index(v.dims(), view.axis, turns, anchor)),
                        v.spacing());
}

template Volume<float> rotate_spatial(const Volume<float>&, const ViewSpec&, RotationAnchor);
template Volume<double> rotate_spatial(const Volume<double>&, const ViewSpec&, RotationAnchor);

BinaryMask rotate_spatial(const BinaryMask& m, const ViewSpec& view, RotationAnchor anchor) {
  const int turns = view.quarter_turns();
  if (turns < 0) fail(ErrorKind::configuration, "spatial rotation supports quarter turns only");
  if (turns == 0) return m;
  return BinaryMask(m.dims(), permute(m.data(), rotation_source_index(m.dims(), view.axis, turns, anchor)));
}

}  // namespace sasnet

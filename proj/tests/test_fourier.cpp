#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sasnet/fourier.hpp"
#include "support.hpp"

using namespace sasnet;

namespace {

double max_abs(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) { return (a - b).abs().maxCoeff(); }

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::contract;
}

// signed coordinate of index i on a periodic axis of length n
double wrapped(Index i, Index n) { return double(i < (n + 1) / 2 ? i : i - n); }

}  // namespace

TEST_CASE("fft3 simple spectra") {
  Volume3::Array impulse = Volume3::Array::Zero(64);
  impulse[0] = 1;
  const ComplexVolume a = fft3(Volume3({4, 4, 4}, impulse));
  CHECK((a.data() - std::complex<double>(1, 0)).abs().maxCoeff() < 1e-12);

  const ComplexVolume c = fft3(Volume3::constant({4, 4, 4}, 1.0f));
  CHECK(std::abs(c.data()[0] - 64.0) < 1e-9);
  CHECK(c.data().tail(63).abs().maxCoeff() < 1e-9);

  const Volume3 zero = ifft3(ComplexVolume::zeros({4, 4, 4}));
  CHECK((zero.data() == 0.0f).all());
}

TEST_CASE("fft3 matches the direct DFT") {
  std::mt19937_64 rng(1);
  for (Dims d : {Dims{8, 8, 8}, Dims{4, 8, 2}, Dims{1, 4, 16}}) {
    const Volume3 v = testing::random_volume(d, rng);
    const ComplexVolume f = fft3(v);
    const auto ref = testing::naive_dft(v);
    double worst = 0;
    for (Index i = 0; i < d.count(); ++i) worst = std::max(worst, std::abs(f.data()[i] - ref[std::size_t(i)]));
    CHECK(worst < 1e-6);
    CHECK(std::abs(f.data()[0] - v.data().cast<double>().sum()) < 1e-9);
  }
}

TEST_CASE("fft3 algebraic properties") {
  std::mt19937_64 rng(2);
  const Dims d{8, 8, 8};
  const Volume3 u = testing::random_volume(d, rng), w = testing::random_volume(d, rng);
  const double a = 0.75, b = -2.5;
  const Volume3 mix(d, (a * u.data().cast<double>() + b * w.data().cast<double>()).cast<float>());
  const ComplexVolume fm = fft3(mix);
  const ComplexVolume fu = fft3(u), fw = fft3(w);
  // float storage of the mix bounds the agreement
  CHECK((fm.data() - (a * fu.data() + b * fw.data())).abs().maxCoeff() < 1e-5);

  // conjugate symmetry
  double sym = 0;
  for (Index z = 0; z < d.depth; ++z)
    for (Index y = 0; y < d.height; ++y)
      for (Index x = 0; x < d.width; ++x) {
        const auto k = fu(z, y, x);
        const auto mk = fu((d.depth - z) % d.depth, (d.height - y) % d.height, (d.width - x) % d.width);
        sym = std::max(sym, std::abs(k - std::conj(mk)));
      }
  CHECK(sym < 1e-9);

  // Parseval
  const double space = u.data().cast<double>().square().sum();
  const double freq = fu.data().abs2().sum() / double(d.count());
  CHECK(std::abs(space - freq) / space < 1e-6);
}

TEST_CASE("round trips for 4 to 32 cubed") {
  std::mt19937_64 rng(3);
  for (Index n : {4, 8, 16, 32}) {
    const Volume3 v = testing::random_volume({n, n, n}, rng);
    const ComplexVolume f = fft3(v);
    CHECK(max_abs(ifft3(f).data().cast<double>(), v.data().cast<double>()) < 1e-6);
    CHECK(ifft3_complex(f).data().imag().abs().maxCoeff() < 1e-6);
    // spectrum -> space -> spectrum
    const ComplexVolume back = fft3(ifft3(f));
    CHECK((back.data() - f.data()).abs().maxCoeff() / double(n * n * n) < 1e-6);
  }
}

TEST_CASE("unsupported and mismatched sizes") {
  CHECK(kind_of([] { fft3(Volume3({6, 8, 8})); }) == ErrorKind::unsupported_size);
  CHECK(kind_of([] { ifft3(ComplexVolume::zeros({8, 8, 12})); }) == ErrorKind::unsupported_size);
  const ComplexVolume f = fft3(Volume3({4, 8, 16}));
  CHECK(kind_of([&] { rotate_freq(f, {Axis::z, 90}); }) == ErrorKind::geometry);
  CHECK(kind_of([&] { rotate_freq(f, {Axis::x, 270}); }) == ErrorKind::geometry);
  // half turns need no square plane
  CHECK_NOTHROW(rotate_freq(f, {Axis::z, 180}));
}

TEST_CASE("view spec grammar") {
  const auto specs = parse_view_specs("z:0,z:90,y:90");
  REQUIRE(specs.size() == 3);
  CHECK(specs == default_view_specs());
  CHECK(specs[1].quarter_turns() == 1);
  CHECK(parse_view_specs("x:270")[0].quarter_turns() == 3);
  CHECK(parse_view_specs("x:45")[0].quarter_turns() == -1);
  CHECK(ViewSpec{Axis::y, 90}.inverse() == ViewSpec{Axis::y, 270});
  for (std::string bad : {"", "q:90", "z:", "z:360", "z:-5", "z90", "z:90,"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(parse_view_specs(bad), Error);
  }
}

TEST_CASE("quarter-turn frequency rotation equals the spatial permutation") {
  std::mt19937_64 rng(4);
  const Dims d{8, 8, 8};
  for (Axis axis : {Axis::x, Axis::y, Axis::z})
    for (double angle : {0.0, 90.0, 180.0, 270.0}) {
      const Volume3 v = testing::random_volume(d, rng);
      const ViewSpec view{axis, angle};
      const ComplexVolume f = fft3(v);
      const ComplexVolume r = rotate_freq(f, view);
      const Volume3 via_freq = ifft3(r);
      const Volume3 spatial = rotate_spatial(v, view);
      CHECK(max_abs(via_freq.data().cast<double>(), spatial.data().cast<double>()) < 1e-6);
      // a permutation keeps every coefficient magnitude
      CHECK(std::abs(r.data().abs2().sum() - f.data().abs2().sum()) <= 1e-9 * f.data().abs2().sum());
      if (angle == 0.0) CHECK((r.data() == f.data()).all());
    }
}

TEST_CASE("four quarter turns restore the spectrum") {
  std::mt19937_64 rng(5);
  const ComplexVolume f = fft3(testing::random_volume({8, 8, 8}, rng));
  ComplexVolume r = f;
  for (int i = 0; i < 4; ++i) r = rotate_freq(r, {Axis::z, 90});
  CHECK((r.data() - f.data()).abs().maxCoeff() <= 1e-9);
}

TEST_CASE("quarter turns move voxel coordinates as a rotation") {
  // a single voxel at (z, y, x) = (0, 0, 1) turned 90 degrees about z lands on (0, 1, 0)
  const Dims d{4, 4, 4};
  Volume3::Array a = Volume3::Array::Zero(64);
  a[d.index(0, 0, 1)] = 1;
  const Volume3 r = rotate_spatial(Volume3(d, a), {Axis::z, 90});
  CHECK(r(0, 1, 0) == 1.0f);
  // centre anchoring maps the grid onto itself without wrap
  const Volume3 c = rotate_spatial(Volume3(d, a), {Axis::z, 90}, RotationAnchor::center);
  CHECK(c(0, 1, 3) == 1.0f);
}

TEST_CASE("view variance outputs") {
  std::mt19937_64 rng(6);
  const Dims d{16, 16, 16};
  const Volume3 v = testing::random_volume(d, rng);
  const auto specs = default_view_specs();
  const auto views = view_variance_views(v, specs);
  REQUIRE(views.size() == 3);
  CHECK(max_abs(views[0].data().cast<double>(), v.data().cast<double>()) < 1e-6);
  for (std::size_t k = 1; k < 3; ++k)
    CHECK(max_abs(views[k].data().cast<double>(), rotate_spatial(v, specs[k]).data().cast<double>()) < 1e-6);
  CHECK_THROWS_AS(view_variance_views(v, {}), Error);

  const BinaryMask m = testing::random_blob_mask(d, rng);
  for (const auto& s : specs) CHECK(rotate_spatial(m, s).count() == m.count());
}

TEST_CASE("arbitrary angles track a spatial trilinear rotation") {
  // anisotropic Gaussian at voxel 0 on the periodic grid; smooth in both domains
  const Index n = 16;
  const Dims d{n, n, n};
  const double sz = 1.5, sy = 2.0, sx = 1.5;
  Volume3::Array a(d.count());
  for (Index z = 0; z < n; ++z)
    for (Index y = 0; y < n; ++y)
      for (Index x = 0; x < n; ++x) {
        const double u = wrapped(z, n) / sz, v = wrapped(y, n) / sy, w = wrapped(x, n) / sx;
        a[d.index(z, y, x)] = float(std::exp(-0.5 * (u * u + v * v + w * w)));
      }
  const Volume3 v(d, a);

  // periodic trilinear sample of v inside one z slice
  auto sample = [&](Index z, double y, double x) {
    const double fy = std::floor(y), fx = std::floor(x);
    const double ty = y - fy, tx = x - fx;
    auto at = [&](double yy, double xx) {
      const Index iy = ((Index(yy) % n) + n) % n, ix = ((Index(xx) % n) + n) % n;
      return double(v(z, iy, ix));
    };
    return (1 - ty) * ((1 - tx) * at(fy, fx) + tx * at(fy, fx + 1)) +
           ty * ((1 - tx) * at(fy + 1, fx) + tx * at(fy + 1, fx + 1));
  };

  const double pi = std::acos(-1.0);
  for (double angle : {30.0, 45.0, 120.0}) {
    CAPTURE(angle);
    const Volume3 r = ifft3(rotate_freq(fft3(v), {Axis::z, angle}));
    const double c = std::cos(angle * pi / 180), s = std::sin(angle * pi / 180);
    double worst = 0, exact = 0;
    for (Index z = 0; z < n; ++z)
      for (Index y = 0; y < n; ++y)
        for (Index x = 0; x < n; ++x) {
          const double px = wrapped(x, n), qy = wrapped(y, n);
          // output at r reads the input at R^-1 r
          const double src_x = c * px + s * qy, src_y = -s * px + c * qy;
          worst = std::max(worst, std::abs(double(r(z, y, x)) - sample(z, src_y, src_x)));
          const double u = wrapped(z, n) / sz, vv = src_y / sy, w = src_x / sx;
          exact = std::max(exact, std::abs(double(r(z, y, x)) - std::exp(-0.5 * (u * u + vv * vv + w * w))));
        }
    CHECK(worst < 5e-2);
    CHECK(exact < 5e-2);
  }
}

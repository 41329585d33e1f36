#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "sasnet/autodiff.hpp"
#include "sasnet/volume.hpp"

namespace testing {

using sasnet::BinaryMask;
using sasnet::Dims;
using sasnet::Index;

inline sasnet::Volume3 random_volume(Dims d, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  sasnet::Volume3::Array a(d.count());
  for (Index i = 0; i < a.size(); ++i) a[i] = float(u(rng));
  return sasnet::Volume3(d, a);
}

inline BinaryMask random_mask(Dims d, std::mt19937_64& rng, double p_fg = 0.5) {
  std::bernoulli_distribution b(p_fg);
  BinaryMask::Array a(d.count());
  for (Index i = 0; i < a.size(); ++i) a[i] = b(rng) ? 1 : 0;
  return BinaryMask(d, a);
}

/// Random blob: union of a few random boxes, so masks have real surfaces.
inline BinaryMask random_blob_mask(Dims d, std::mt19937_64& rng) {
  BinaryMask::Array a = BinaryMask::Array::Zero(d.count());
  std::uniform_int_distribution<int> nbox(1, 3);
  const int boxes = nbox(rng);
  for (int b = 0; b < boxes; ++b) {
    Index lo[3], hi[3];
    for (int ax = 0; ax < 3; ++ax) {
      std::uniform_int_distribution<Index> pick(0, d[ax] - 1);
      Index p = pick(rng), q = pick(rng);
      lo[ax] = std::min(p, q);
      hi[ax] = std::max(p, q);
    }
    for (Index z = lo[0]; z <= hi[0]; ++z)
      for (Index y = lo[1]; y <= hi[1]; ++y)
        for (Index x = lo[2]; x <= hi[2]; ++x) a[d.index(z, y, x)] = 1;
  }
  return BinaryMask(d, a);
}

/// O(N^2) 3-D DFT straight from the definition.
inline std::vector<std::complex<double>> naive_dft(const sasnet::Volume3& v) {
  const Dims d = v.dims();
  const Index n = d.count();
  std::vector<std::complex<double>> out(static_cast<std::size_t>(n));
  const double two_pi = 2.0 * std::acos(-1.0);
  for (Index kz = 0; kz < d.depth; ++kz)
    for (Index ky = 0; ky < d.height; ++ky)
      for (Index kx = 0; kx < d.width; ++kx) {
        std::complex<double> acc = 0.0;
        for (Index z = 0; z < d.depth; ++z)
          for (Index y = 0; y < d.height; ++y)
            for (Index x = 0; x < d.width; ++x) {
              const double phase = -two_pi * (double(kz * z) / double(d.depth) + double(ky * y) / double(d.height) +
                                              double(kx * x) / double(d.width));
              acc += double(v(z, y, x)) * std::polar(1.0, phase);
            }
        out[std::size_t(d.index(kz, ky, kx))] = acc;
      }
  return out;
}

/// Squared distance to the nearest zero voxel by exhaustive search.
inline std::vector<std::int64_t> brute_squared_edt(const BinaryMask& m) {
  const Dims d = m.dims();
  std::vector<std::array<Index, 3>> zeros;
  for (Index z = 0; z < d.depth; ++z)
    for (Index y = 0; y < d.height; ++y)
      for (Index x = 0; x < d.width; ++x)
        if (!m(z, y, x)) zeros.push_back({z, y, x});
  std::vector<std::int64_t> out(static_cast<std::size_t>(d.count()));
  for (Index z = 0; z < d.depth; ++z)
    for (Index y = 0; y < d.height; ++y)
      for (Index x = 0; x < d.width; ++x) {
        std::int64_t best = std::numeric_limits<std::int64_t>::max();
        for (const auto& p : zeros) {
          const std::int64_t dz = z - p[0], dy = y - p[1], dx = x - p[2];
          best = std::min(best, dz * dz + dy * dy + dx * dx);
        }
        out[std::size_t(d.index(z, y, x))] = best;
      }
  return out;
}

/// Surface voxels by direct neighbour inspection; out-of-array counts as background.
inline std::vector<std::array<Index, 3>> brute_surface(const BinaryMask& m) {
  const Dims d = m.dims();
  std::vector<std::array<Index, 3>> out;
  const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (Index z = 0; z < d.depth; ++z)
    for (Index y = 0; y < d.height; ++y)
      for (Index x = 0; x < d.width; ++x) {
        if (!m(z, y, x)) continue;
        bool edge = false;
        for (const auto& o : off) {
          const Index zz = z + o[0], yy = y + o[1], xx = x + o[2];
          if (zz < 0 || yy < 0 || xx < 0 || zz >= d.depth || yy >= d.height || xx >= d.width || !m(zz, yy, xx)) {
            edge = true;
            break;
          }
        }
        if (edge) out.push_back({z, y, x});
      }
  return out;
}

/// All pairwise nearest-surface distances in both directions, pooled.
inline std::vector<double> brute_surface_distances(const BinaryMask& a, const BinaryMask& b) {
  const auto sa = brute_surface(a);
  const auto sb = brute_surface(b);
  std::vector<double> out;
  auto directed = [&](const auto& from, const auto& to) {
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) {
        const double dz = double(p[0] - q[0]), dy = double(p[1] - q[1]), dx = double(p[2] - q[2]);
        best = std::min(best, std::sqrt(dz * dz + dy * dy + dx * dx));
      }
      out.push_back(best);
    }
  };
  directed(sa, sb);
  directed(sb, sa);
  return out;
}

/// Textbook percentile: rank q*(n-1), linear between neighbours.
inline double brute_percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double rank = q * double(v.size() - 1);
  const auto lo = std::size_t(std::floor(rank));
  const auto hi = std::min(v.size() - 1, lo + 1);
  return v[lo] + (rank - double(lo)) * (v[hi] - v[lo]);
}

/// Relative error used for gradient checks, guarded against tiny magnitudes.
inline double rel_err(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

using Builder = std::function<sasnet::Var<double>(sasnet::Graph<double>&, const std::vector<sasnet::Var<double>>&)>;

inline double eval_loss(const std::vector<sasnet::Tensor<double>>& inputs, const Builder& f) {
  sasnet::Graph<double> g;
  std::vector<sasnet::Var<double>> leaves;
  for (const auto& t : inputs) leaves.push_back(g.leaf(t));
  return f(g, leaves).item();
}

/// Worst relative error between the reverse sweep and central differences
/// at `coords` random coordinates of every input.
inline double max_grad_error(const std::vector<sasnet::Tensor<double>>& inputs, const Builder& f, int coords,
                             std::mt19937_64& rng, double h = 1e-4) {
  sasnet::Graph<double> g;
  std::vector<sasnet::Var<double>> leaves;
  for (const auto& t : inputs) leaves.push_back(g.leaf(t));
  g.backward(f(g, leaves));
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Eigen::ArrayXd analytic = g.grad(leaves[k].id);
    std::uniform_int_distribution<Index> pick(0, inputs[k].data.size() - 1);
    for (int c = 0; c < coords; ++c) {
      const Index i = pick(rng);
      auto plus = inputs, minus = inputs;
      plus[k].data[i] += h;
      minus[k].data[i] -= h;
      const double numeric = (eval_loss(plus, f) - eval_loss(minus, f)) / (2 * h);
      worst = std::max(worst, rel_err(analytic[i], numeric));
    }
  }
  return worst;
}

inline sasnet::Tensor<double> random_tensor(sasnet::Shape s, std::mt19937_64& rng, double lo = -1.0,
                                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::ArrayXd a(s.count());
  for (Index i = 0; i < a.size(); ++i) a[i] = u(rng);
  return {s, a};
}

}  // namespace testing

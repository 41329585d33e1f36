#include "sasnet/distance.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace sasnet {

BinaryMask find_boundaries(const BinaryMask& m, BoundaryEdge edge) {
  const Dims d = m.dims();
  const bool outside_bg = edge == BoundaryEdge::outside_is_background;
  BinaryMask::Array out = BinaryMask::Array::Zero(d.count());
  for (Index z = 0; z < d.depth; ++z)
    for (Index y = 0; y < d.height; ++y)
      for (Index x = 0; x < d.width; ++x) {
        if (!m(z, y, x)) continue;
        const std::array<std::array<Index, 3>, 6> nbrs{{{z - 1, y, x},
                                                        {z + 1, y, x},
                                                        {z, y - 1, x},
                                                        {z, y + 1, x},
                                                        {z, y, x - 1},
                                                        {z, y, x + 1}}};
        bool border = false;
        for (const auto& n : nbrs) {
          const bool inside = n[0] >= 0 && n[0] < d.depth && n[1] >= 0 && n[1] < d.height &&
                              n[2] >= 0 && n[2] < d.width;
          if (inside ? !m(n[0], n[1], n[2]) : outside_bg) {
            border = true;
            break;
          }
        }
        out[d.index(z, y, x)] = border ? 1 : 0;
      }
  return BinaryMask(d, std::move(out));
}

namespace {

constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max();

/// Breakpoint between envelope parabolas as an exact fraction num/den, den > 0.
struct Breakpoint {
  std::int64_t num;
  std::int64_t den;
};

/// 1D squared distance transform of f (kInf = no source) along a strided line.
void sdt_line(std::int64_t* base, Index n, Index stride, std::vector<std::int64_t>& f,
              std::vector<Index>& v, std::vector<Breakpoint>& z) {
  f.resize(std::size_t(n));
  for (Index i = 0; i < n; ++i) f[std::size_t(i)] = base[i * stride];

  v.clear();
  z.clear();
  for (Index q = 0; q < n; ++q) {
    const std::int64_t fq = f[std::size_t(q)];
    if (fq == kInf) continue;
    const std::int64_t hq = fq + q * q;
    while (!v.empty()) {
      const Index p = v.back();
      const Breakpoint s{hq - (f[std::size_t(p)] + p * p), 2 * (q - p)};
      // drop the last parabola if it is hidden: s <= its left breakpoint
      if (v.size() > 1 && s.num * z.back().den <= z.back().num * s.den) {
        v.pop_back();
        z.pop_back();
        continue;
      }
      z.push_back(s);
      break;
    }
    v.push_back(q);
  }
  if (v.empty()) return;  // line stays at kInf

  std::size_t k = 0;
  for (Index q = 0; q < n; ++q) {
    // advance while the next breakpoint lies strictly left of q
    while (k < z.size() && z[k].num < q * z[k].den) ++k;
    const Index p = v[k];
    base[q * stride] = (q - p) * (q - p) + f[std::size_t(p)];
  }
}

}  // namespace

SquaredDistances squared_edt(const BinaryMask& m) {
  const Dims d = m.dims();
  if (m.count() == d.count()) {
    fail(ErrorKind::degenerate_input, "distance transform needs at least one zero voxel");
  }
  SquaredDistances g(d.count());
  for (Index i = 0; i < d.count(); ++i) g[i] = m[i] ? kInf : 0;

  const std::array<Index, 3> stride{d.height * d.width, d.width, 1};
  std::vector<std::int64_t> f;
  std::vector<Index> v;
  std::vector<Breakpoint> z;
  for (int axis = 2; axis >= 0; --axis) {
    const int a1 = axis == 0 ? 1 : 0;
    const int a2 = axis == 2 ? 1 : 2;
    for (Index i = 0; i < d[a1]; ++i)
      for (Index j = 0; j < d[a2]; ++j)
        sdt_line(g.data() + i * stride[a1] + j * stride[a2], d[axis], stride[axis], f, v, z);
  }
  return g;
}

Volume<double> edt(const BinaryMask& m) {
  return Volume<double>(m.dims(), squared_edt(m).cast<double>().sqrt().eval());
}

Volume<double> signed_distance_map(const BinaryMask& m) {
  const Index fg = m.count();
  if (fg == 0 || fg == m.size()) {
    fail(ErrorKind::degenerate_input, "signed distance map needs both foreground and background");
  }
  const Eigen::ArrayXd pos = edt(m).data();
  const Eigen::ArrayXd neg = edt(m.complement()).data();
  Eigen::ArrayXd sdm = neg / neg.maxCoeff() - pos / pos.maxCoeff();

  const BinaryMask border = find_boundaries(m, BoundaryEdge::outside_ignored);
  for (Index i = 0; i < sdm.size(); ++i)
    if (border[i]) sdm[i] = 0.0;
  return Volume<double>(m.dims(), std::move(sdm));
}

}  // namespace sasnet

#include "sasnet/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace sasnet {

template <typename Scalar>
const Shape& Var<Scalar>::shape() const {
  return graph->shape(id);
}

template <typename Scalar>
const typename Tensor<Scalar>::Array& Var<Scalar>::value() const {
  return graph->value(id);
}

template <typename Scalar>
Scalar Var<Scalar>::item() const {
  return value()[0];
}

template <typename Scalar>
void Graph<Scalar>::check_recording(const char* what) const {
  if (state_ == State::released) fail(ErrorKind::lifecycle, std::string(what) + " on a released graph");
  if (state_ != State::recording) fail(ErrorKind::lifecycle, std::string(what) + " after backward already ran");
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::constant(Tensor<Scalar> t) {
  check_recording("constant");
  nodes_.push_back({t.shape, std::move(t.data), {}, {}, false});
  return {this, int(nodes_.size()) - 1};
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::leaf(Tensor<Scalar> t) {
  check_recording("leaf");
  nodes_.push_back({t.shape, std::move(t.data), {}, {}, true});
  return {this, int(nodes_.size()) - 1};
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::record(Shape shape, Array value, std::vector<int> parents, Backward backward) {
  check_recording("op");
  if (value.size() != shape.count()) {
    fail(ErrorKind::contract, "op value size " + std::to_string(value.size()) + " does not match " + shape.str());
  }
  bool needs = false;
  for (int p : parents) needs = needs || nodes_.at(std::size_t(p)).requires_grad;
  nodes_.push_back({shape, std::move(value), {}, needs ? std::move(backward) : Backward{}, needs});
  return {this, int(nodes_.size()) - 1};
}

template <typename Scalar>
typename Graph<Scalar>::Array& Graph<Scalar>::grad_buffer(int id) {
  auto& n = nodes_.at(std::size_t(id));
  if (n.grad.size() == 0) n.grad = Array::Zero(n.value.size());
  return n.grad;
}

template <typename Scalar>
const typename Graph<Scalar>::Array& Graph<Scalar>::grad(int id) const {
  if (state_ == State::released) fail(ErrorKind::lifecycle, "grad read from a released graph");
  auto& n = const_cast<Node&>(nodes_.at(std::size_t(id)));
  if (n.grad.size() == 0) n.grad = Array::Zero(n.value.size());
  return n.grad;
}

template <typename Scalar>
void Graph<Scalar>::backward(Var<Scalar> loss) {
  if (state_ == State::released) fail(ErrorKind::lifecycle, "backward on a released graph");
  if (state_ == State::backpropagated) fail(ErrorKind::lifecycle, "backward already ran on this graph");
  if (loss.graph != this) fail(ErrorKind::contract, "loss belongs to a different graph");
  if (!(shape(loss.id) == Shape::scalar())) {
    fail(ErrorKind::contract, "backward needs a scalar loss, got shape " + shape(loss.id).str());
  }
  state_ = State::backpropagated;
  if (!nodes_[std::size_t(loss.id)].requires_grad) return;
  grad_buffer(loss.id).setOnes();
  for (int id = loss.id; id >= 0; --id) {
    auto& n = nodes_[std::size_t(id)];
    if (n.requires_grad && n.backward && n.grad.size() > 0) n.backward(*this, n.grad);
  }
}

template <typename Scalar>
void Graph<Scalar>::release() {
  nodes_.clear();
  nodes_.shrink_to_fit();
  state_ = State::released;
}

namespace {

template <typename Scalar>
using MatR = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
void require_shape(const Var<Scalar>& v, const Shape& expected, const char* op, const char* what) {
  if (!(v.shape() == expected)) {
    fail(ErrorKind::geometry, std::string(op) + ": " + what + " shape " + v.shape().str() + " vs expected " +
                                  expected.str());
  }
}

template <typename Scalar>
void require_same_graph(const Var<Scalar>& a, const Var<Scalar>& b, const char* op) {
  if (a.graph != b.graph || a.graph == nullptr) fail(ErrorKind::contract, std::string(op) + ": vars from different graphs");
}

/// Unfolds input patches into a (c * k^3) x n_out row-major matrix.
template <typename Scalar>
void im2col(const Scalar* x, Index channels, Dims in, const ConvGeometry& g, Dims out, Scalar* col) {
  const Index n_out = out.count();
  const int k = g.kernel;
  Index row = 0;
  for (Index c = 0; c < channels; ++c)
    for (int kz = 0; kz < k; ++kz)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx, ++row) {
          Scalar* dst = col + row * n_out;
          for (Index oz = 0; oz < out.depth; ++oz) {
            const Index iz = oz * g.stride + kz - g.pad;
            for (Index oy = 0; oy < out.height; ++oy) {
              Scalar* d = dst + (oz * out.height + oy) * out.width;
              const Index iy = oy * g.stride + ky - g.pad;
              if (iz < 0 || iz >= in.depth || iy < 0 || iy >= in.height) {
                std::fill(d, d + out.width, Scalar(0));
                continue;
              }
              const Scalar* src = x + ((c * in.depth + iz) * in.height + iy) * in.width;
              for (Index ox = 0; ox < out.width; ++ox) {
                const Index ix = ox * g.stride + kx - g.pad;
                d[ox] = (ix >= 0 && ix < in.width) ? src[ix] : Scalar(0);
              }
            }
          }
        }
}

/// Adjoint of im2col: scatters-adds columns back onto the input grid.
template <typename Scalar>
void col2im(const Scalar* col, Index channels, Dims in, const ConvGeometry& g, Dims out, Scalar* x) {
  const Index n_out = out.count();
  const int k = g.kernel;
  Index row = 0;
  for (Index c = 0; c < channels; ++c)
    for (int kz = 0; kz < k; ++kz)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx, ++row) {
          const Scalar* s = col + row * n_out;
          for (Index oz = 0; oz < out.depth; ++oz) {
            const Index iz = oz * g.stride + kz - g.pad;
            if (iz < 0 || iz >= in.depth) continue;
            for (Index oy = 0; oy < out.height; ++oy) {
              const Index iy = oy * g.stride + ky - g.pad;
              if (iy < 0 || iy >= in.height) continue;
              const Scalar* srow = s + (oz * out.height + oy) * out.width;
              Scalar* dst = x + ((c * in.depth + iz) * in.height + iy) * in.width;
              for (Index ox = 0; ox < out.width; ++ox) {
                const Index ix = ox * g.stride + kx - g.pad;
                if (ix >= 0 && ix < in.width) dst[ix] += srow[ox];
              }
            }
          }
        }
}

}  // namespace

template <typename Scalar>
Var<Scalar> conv3d(Var<Scalar> x, Var<Scalar> weight, Var<Scalar> bias, ConvGeometry geom) {
  require_same_graph(x, weight, "conv3d");
  require_same_graph(x, bias, "conv3d");
  const Shape xs = x.shape();
  const Index c_out = weight.shape().channels;
  const Index taps = xs.channels * geom.taps();
  require_shape(weight, Shape{c_out, taps, 1, 1}, "conv3d", "weight");
  require_shape(bias, Shape{c_out, 1, 1, 1}, "conv3d", "bias");
  const Dims in = xs.dims();
  const Dims out{geom.out_extent(in.depth), geom.out_extent(in.height), geom.out_extent(in.width)};
  if (out.depth < 1 || out.height < 1 || out.width < 1) {
    fail(ErrorKind::geometry, "conv3d: input " + xs.str() + " too small for kernel");
  }
  const Index n_out = out.count();

  auto col = std::make_shared<MatR<Scalar>>(taps, n_out);
  im2col(x.value().data(), xs.channels, in, geom, out, col->data());

  const Shape ys = Shape::of(c_out, out);
  typename Tensor<Scalar>::Array y(ys.count());
  {
    Eigen::Map<const MatR<Scalar>> w(weight.value().data(), c_out, taps);
    Eigen::Map<MatR<Scalar>> ym(y.data(), c_out, n_out);
    ym.noalias() = w * (*col);
    ym.colwise() += bias.value().matrix();
  }

  const int xi = x.id, wi = weight.id, bi = bias.id;
  Graph<Scalar>& g = *x.graph;
  return g.record(ys, std::move(y), {xi, wi, bi},
                  [=](Graph<Scalar>& gr, const typename Graph<Scalar>::Array& gy) {
                    Eigen::Map<const MatR<Scalar>> gym(gy.data(), c_out, n_out);
                    if (gr.requires_grad(wi)) {
                      Eigen::Map<MatR<Scalar>> gw(gr.grad_buffer(wi).data(), c_out, taps);
                      gw.noalias() += gym * col->transpose();
                    }
                    if (gr.requires_grad(bi)) gr.grad_buffer(bi) += gym.rowwise().sum().array();
                    if (gr.requires_grad(xi)) {
                      Eigen::Map<const MatR<Scalar>> w(gr.value(wi).data(), c_out, taps);
                      MatR<Scalar> gcol = w.transpose() * gym;
                      col2im(gcol.data(), xs.channels, in, geom, out, gr.grad_buffer(xi).data());
                    }
                  });
}

template <typename Scalar>
Var<Scalar> upconv3d(Var<Scalar> x, Var<Scalar> weight, Var<Scalar> bias) {
  require_same_graph(x, weight, "upconv3d");
  require_same_graph(x, bias, "upconv3d");
  const Shape xs = x.shape();
  const Index c_in = xs.channels;
  if (weight.shape().channels % 8 != 0) fail(ErrorKind::geometry, "upconv3d: weight rows must be c_out * 8");
  const Index c_out = weight.shape().channels / 8;
  require_shape(weight, Shape{c_out * 8, c_in, 1, 1}, "upconv3d", "weight");
  require_shape(bias, Shape{c_out, 1, 1, 1}, "upconv3d", "bias");
  const Dims in = xs.dims();
  const Dims out{in.depth * 2, in.height * 2, in.width * 2};
  const Index n_in = in.count();

  // z(co * 8 + tap, n) is the contribution of input voxel n to output tap
  Eigen::Map<const MatR<Scalar>> xm(x.value().data(), c_in, n_in);
  Eigen::Map<const MatR<Scalar>> w(weight.value().data(), c_out * 8, c_in);
  MatR<Scalar> z = w * xm;

  const Shape ys = Shape::of(c_out, out);
  typename Tensor<Scalar>::Array y(ys.count());
  auto out_index = [in, out](Index co, Index tap, Index n) {
    const Index zz = n / (in.height * in.width);
    const Index yy = (n / in.width) % in.height;
    const Index xx = n % in.width;
    const Index a = tap >> 2, b = (tap >> 1) & 1, c = tap & 1;
    return ((co * out.depth + 2 * zz + a) * out.height + 2 * yy + b) * out.width + 2 * xx + c;
  };
  for (Index co = 0; co < c_out; ++co)
    for (Index tap = 0; tap < 8; ++tap) {
      const Scalar* zr = z.data() + (co * 8 + tap) * n_in;
      const Scalar b = bias.value()[co];
      for (Index n = 0; n < n_in; ++n) y[out_index(co, tap, n)] = zr[n] + b;
    }

  const int xi = x.id, wi = weight.id, bi = bias.id;
  const Index n_out = out.count();
  return x.graph->record(ys, std::move(y), {xi, wi, bi},
                         [=](Graph<Scalar>& gr, const typename Graph<Scalar>::Array& gy) {
                           MatR<Scalar> gz(c_out * 8, n_in);
                           for (Index co = 0; co < c_out; ++co)
                             for (Index tap = 0; tap < 8; ++tap) {
                               Scalar* zr = gz.data() + (co * 8 + tap) * n_in;
                               for (Index n = 0; n < n_in; ++n) zr[n] = gy[out_index(co, tap, n)];
                             }
                           if (gr.requires_grad(wi)) {
                             Eigen::Map<const MatR<Scalar>> xv(gr.value(xi).data(), c_in, n_in);
                             Eigen::Map<MatR<Scalar>> gw(gr.grad_buffer(wi).data(), c_out * 8, c_in);
                             gw.noalias() += gz * xv.transpose();
                           }
                           if (gr.requires_grad(bi)) {
                             auto& gb = gr.grad_buffer(bi);
                             for (Index co = 0; co < c_out; ++co) gb[co] += gy.segment(co * n_out, n_out).sum();
                           }
                           if (gr.requires_grad(xi)) {
                             Eigen::Map<const MatR<Scalar>> wv(gr.value(wi).data(), c_out * 8, c_in);
                             Eigen::Map<MatR<Scalar>> gx(gr.grad_buffer(xi).data(), c_in, n_in);
                             gx.noalias() += wv.transpose() * gz;
                           }
                         });
}

template <typename Scalar>
Var<Scalar> leaky_relu(Var<Scalar> x, Scalar slope) {
  const auto& v = x.value();
  typename Tensor<Scalar>::Array y = (v > 0).select(v, slope * v);
  const int xi = x.id;
  return x.graph->record(x.shape(), std::move(y), {xi}, [=](Graph<Scalar>& gr, const auto& gy) {
    const auto& xv = gr.value(xi);
    gr.accumulate(xi, (xv > 0).select(gy, slope * gy));
  });
}

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  require_same_graph(a, b, "add");
  require_shape(b, a.shape(), "add", "rhs");
  const int ai = a.id, bi = b.id;
  return a.graph->record(a.shape(), a.value() + b.value(), {ai, bi}, [=](Graph<Scalar>& gr, const auto& gy) {
    gr.accumulate(ai, gy);
    gr.accumulate(bi, gy);
  });
}

template <typename Scalar>
Var<Scalar> tanh(Var<Scalar> x) {
  typename Tensor<Scalar>::Array y = x.value().tanh();
  const int xi = x.id;
  Graph<Scalar>& g = *x.graph;
  const int yi = int(g.size());
  return g.record(x.shape(), std::move(y), {xi}, [=](Graph<Scalar>& gr, const auto& gy) {
    const auto& yv = gr.value(yi);
    gr.accumulate(xi, gy * (Scalar(1) - yv.square()));
  });
}

template <typename Scalar>
Var<Scalar> softmax_channels(Var<Scalar> x) {
  const Shape s = x.shape();
  const Index n = s.spatial();
  const Index c = s.channels;
  Eigen::Map<const MatR<Scalar>> xm(x.value().data(), c, n);
  typename Tensor<Scalar>::Array y(s.count());
  Eigen::Map<MatR<Scalar>> ym(y.data(), c, n);
  const auto mx = xm.colwise().maxCoeff().eval();
  ym = (xm.rowwise() - mx).array().exp().matrix();
  const auto z = ym.colwise().sum().eval();
  ym.array().rowwise() /= z.array();

  const int xi = x.id;
  Graph<Scalar>& g = *x.graph;
  const int yi = int(g.size());
  return g.record(s, std::move(y), {xi}, [=](Graph<Scalar>& gr, const typename Graph<Scalar>::Array& gy) {
    Eigen::Map<const MatR<Scalar>> yv(gr.value(yi).data(), c, n);
    Eigen::Map<const MatR<Scalar>> gym(gy.data(), c, n);
    // dx = y * (gy - sum_c y gy)
    const auto dot = (yv.array() * gym.array()).colwise().sum().eval();
    MatR<Scalar> gx = (yv.array() * (gym.array().rowwise() - dot)).matrix();
    gr.accumulate(xi, Eigen::Map<const typename Graph<Scalar>::Array>(gx.data(), gx.size()));
  });
}

template <typename Scalar>
Var<Scalar> soft_dice_loss(Var<Scalar> p, const BinaryMask& y, double smooth) {
  const Shape s = p.shape();
  if (s.channels != 2) fail(ErrorKind::geometry, "soft_dice_loss needs 2 channels, got " + s.str());
  require_same_dims(s.dims(), y.dims(), "soft_dice_loss");
  const Index n = s.spatial();
  const Eigen::ArrayXd fg = p.value().segment(n, n).template cast<double>();
  const Eigen::ArrayXd t = y.data().template cast<double>();
  const double inter = (fg * t).sum();
  const double den = fg.sum() + t.sum() + smooth;
  const double num = 2.0 * inter + smooth;
  typename Tensor<Scalar>::Array out(1);
  out[0] = Scalar(1.0 - num / den);

  const int pi = p.id;
  return p.graph->record(Shape::scalar(), std::move(out), {pi}, [=](Graph<Scalar>& gr, const auto& gy) {
    // d/dp_i = -(2 t_i den - num) / den^2
    typename Tensor<Scalar>::Array g = Tensor<Scalar>::Array::Zero(2 * n);
    g.segment(n, n) = (-(2.0 * t * den - num) / (den * den) * double(gy[0])).template cast<Scalar>();
    gr.accumulate(pi, g);
  });
}

template <typename Scalar>
Var<Scalar> cross_entropy(Var<Scalar> p, const BinaryMask& y, double clamp) {
  const Shape s = p.shape();
  if (s.channels != 2) fail(ErrorKind::geometry, "cross_entropy needs 2 channels, got " + s.str());
  require_same_dims(s.dims(), y.dims(), "cross_entropy");
  const Index n = s.spatial();
  const auto& v = p.value();
  double acc = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double pt = double(v[y[i] ? n + i : i]);
    acc -= std::log(std::clamp(pt, clamp, 1.0 - clamp));
  }
  typename Tensor<Scalar>::Array out(1);
  out[0] = Scalar(acc / double(n));

  const int pi = p.id;
  const BinaryMask labels = y;
  return p.graph->record(Shape::scalar(), std::move(out), {pi}, [=](Graph<Scalar>& gr, const auto& gy) {
    const auto& pv = gr.value(pi);
    auto& g = gr.grad_buffer(pi);
    const double scale = double(gy[0]) / double(n);
    for (Index i = 0; i < n; ++i) {
      const Index k = labels[i] ? n + i : i;
      const double pt = double(pv[k]);
      if (pt > clamp && pt < 1.0 - clamp) g[k] += Scalar(-scale / pt);
    }
  });
}

template <typename Scalar>
Var<Scalar> mse(Var<Scalar> a, Var<Scalar> b) {
  require_same_graph(a, b, "mse");
  require_shape(b, a.shape(), "mse", "rhs");
  const auto diff = (a.value() - b.value()).eval();
  typename Tensor<Scalar>::Array out(1);
  const double m = double(diff.size());
  out[0] = Scalar(diff.template cast<double>().square().sum() / m);
  const int ai = a.id, bi = b.id;
  return a.graph->record(Shape::scalar(), std::move(out), {ai, bi}, [=](Graph<Scalar>& gr, const auto& gy) {
    const auto d = (gr.value(ai) - gr.value(bi)).eval();
    const Scalar k = Scalar(2.0 * double(gy[0]) / m);
    gr.accumulate(ai, k * d);
    gr.accumulate(bi, -k * d);
  });
}

template <typename Scalar>
Var<Scalar> mse_to(Var<Scalar> a, const typename Tensor<Scalar>::Array& target) {
  if (target.size() != a.shape().count()) {
    fail(ErrorKind::geometry, "mse_to: target length does not match " + a.shape().str());
  }
  const auto diff = (a.value() - target).eval();
  const double m = double(diff.size());
  typename Tensor<Scalar>::Array out(1);
  out[0] = Scalar(diff.template cast<double>().square().sum() / m);
  const int ai = a.id;
  return a.graph->record(Shape::scalar(), std::move(out), {ai}, [=](Graph<Scalar>& gr, const auto& gy) {
    gr.accumulate(ai, Scalar(2.0 * double(gy[0]) / m) * (gr.value(ai) - target));
  });
}

template <typename Scalar>
Var<Scalar> weighted_sum(const std::vector<Var<Scalar>>& terms, const std::vector<Scalar>& weights) {
  if (terms.empty() || terms.size() != weights.size()) {
    fail(ErrorKind::contract, "weighted_sum needs one weight per term");
  }
  Graph<Scalar>& g = *terms.front().graph;
  typename Tensor<Scalar>::Array out = Tensor<Scalar>::Array::Zero(1);
  std::vector<int> ids;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].graph != &g) fail(ErrorKind::contract, "weighted_sum: vars from different graphs");
    require_shape(terms[i], Shape::scalar(), "weighted_sum", "term");
    out[0] += weights[i] * terms[i].item();
    ids.push_back(terms[i].id);
  }
  return g.record(Shape::scalar(), std::move(out), ids, [=](Graph<Scalar>& gr, const auto& gy) {
    for (std::size_t i = 0; i < ids.size(); ++i) gr.accumulate(ids[i], weights[i] * gy);
  });
}

#define SASNET_INSTANTIATE_AUTODIFF(S)                                                     \
  template struct Var<S>;                                                                  \
  template class Graph<S>;                                                                 \
  template Var<S> conv3d(Var<S>, Var<S>, Var<S>, ConvGeometry);                            \
  template Var<S> upconv3d(Var<S>, Var<S>, Var<S>);                                        \
  template Var<S> leaky_relu(Var<S>, S);                                                   \
  template Var<S> add(Var<S>, Var<S>);                                                     \
  template Var<S> tanh(Var<S>);                                                            \
  template Var<S> softmax_channels(Var<S>);                                                \
  template Var<S> soft_dice_loss(Var<S>, const BinaryMask&, double);                       \
  template Var<S> cross_entropy(Var<S>, const BinaryMask&, double);                        \
  template Var<S> mse(Var<S>, Var<S>);                                                     \
  template Var<S> mse_to(Var<S>, const typename Tensor<S>::Array&);                        \
  template Var<S> weighted_sum(const std::vector<Var<S>>&, const std::vector<S>&);

SASNET_INSTANTIATE_AUTODIFF(float)
SASNET_INSTANTIATE_AUTODIFF(double)

}  // namespace sasnet

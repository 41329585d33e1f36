#include "sasnet/network.hpp"

#include <cmath>
#include <random>

namespace sasnet {

void NetConfig::validate() const {
  if (levels < 3) fail(ErrorKind::configuration, "network needs levels >= 3");
  if (levels > 12) fail(ErrorKind::configuration, "network levels beyond 12 are not supported");
  if (base_channels < 2) fail(ErrorKind::configuration, "network needs base_channels >= 2");
  if (in_channels < 1) fail(ErrorKind::configuration, "network needs in_channels >= 1");
}

void NetConfig::check_input(Dims dims) const {
  const Index s = stride_product();
  if (dims.depth % s != 0 || dims.height % s != 0 || dims.width % s != 0) {
    fail(ErrorKind::configuration, "input dims " + dims.str() + " not divisible by " + std::to_string(s) +
                                       " for a " + std::to_string(levels) + "-level network");
  }
}

template <typename Scalar>
typename DualBranchNet<Scalar>::ConvIds DualBranchNet<Scalar>::add_conv(const std::string& name, Index c_in,
                                                                        Index c_out, ConvGeometry geom) {
  const Index taps = c_in * geom.taps();
  const int w = int(params_.size());
  params_.push_back({name + ".weight", Shape{c_out, taps, 1, 1}, {}, taps});
  params_.push_back({name + ".bias", Shape{c_out, 1, 1, 1}, {}, taps});
  return {w, w + 1};
}

template <typename Scalar>
typename DualBranchNet<Scalar>::ConvIds DualBranchNet<Scalar>::add_upconv(const std::string& name, Index c_in,
                                                                          Index c_out) {
  // every output voxel receives exactly one tap per input channel
  const int w = int(params_.size());
  params_.push_back({name + ".weight", Shape{c_out * 8, c_in, 1, 1}, {}, c_in});
  params_.push_back({name + ".bias", Shape{c_out, 1, 1, 1}, {}, c_in});
  return {w, w + 1};
}

template <typename Scalar>
typename DualBranchNet<Scalar>::Decoder DualBranchNet<Scalar>::add_decoder(const std::string& name,
                                                                           int start_level) {
  Decoder d;
  d.start_level = start_level;
  d.convs.resize(std::size_t(cfg_.levels + 1));
  d.ups.resize(std::size_t(cfg_.levels + 1));
  for (int level = start_level; level >= 2; --level) {
    const std::string tag = name + ".level" + std::to_string(level);
    d.convs[std::size_t(level)] = add_conv(tag + ".conv", cfg_.channels(level), cfg_.channels(level),
                                           ConvGeometry::same3());
    d.ups[std::size_t(level)] = add_upconv(tag + ".up", cfg_.channels(level), cfg_.channels(level - 1));
  }
  const Index c1 = cfg_.channels(1);
  d.final_conv = add_conv(name + ".final", c1, c1, ConvGeometry::same3());
  d.seg_head = add_conv(name + ".seg_head", c1, 2, ConvGeometry::pointwise());
  d.reg_head = add_conv(name + ".reg_head", c1, 1, ConvGeometry::pointwise());
  return d;
}

template <typename Scalar>
DualBranchNet<Scalar>::DualBranchNet(const NetConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int levels = cfg_.levels;
  enc_convs_.resize(std::size_t(levels + 1));
  downs_.resize(std::size_t(levels + 1));
  for (int level = 1; level <= levels; ++level) {
    const std::string tag = "encoder.level" + std::to_string(level);
    const Index c_in = level == 1 ? Index(cfg_.in_channels) : cfg_.channels(level);
    enc_convs_[std::size_t(level)] = add_conv(tag + ".conv", c_in, cfg_.channels(level), ConvGeometry::same3());
    if (level < levels) {
      downs_[std::size_t(level)] = add_conv(tag + ".down", cfg_.channels(level), cfg_.channels(level + 1),
                                            ConvGeometry::down2());
    }
  }
  high_ = add_decoder("high", levels);
  low_ = add_decoder("low", levels - 1);

  std::mt19937_64 rng(cfg_.seed);
  for (auto& p : params_) {
    const double bound = std::sqrt(1.0 / double(p.fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    p.value.resize(p.shape.count());
    for (Index i = 0; i < p.value.size(); ++i) p.value[i] = Scalar(u(rng));
  }
}

template <typename Scalar>
Index DualBranchNet<Scalar>::parameter_count() const {
  Index n = 0;
  for (const auto& p : params_) n += p.shape.count();
  return n;
}

template <typename Scalar>
void DualBranchNet<Scalar>::zero_heads() {
  for (const Decoder* d : {&low_, &high_})
    for (const ConvIds& h : {d->seg_head, d->reg_head}) {
      params_[std::size_t(h.weight)].value.setZero();
      params_[std::size_t(h.bias)].value.setZero();
    }
}

template <typename Scalar>
Tape<Scalar> DualBranchNet<Scalar>::begin(bool differentiable) const {
  Tape<Scalar> tape;
  tape.params.reserve(params_.size());
  for (const auto& p : params_) {
    Tensor<Scalar> t(p.shape, p.value);
    tape.params.push_back(differentiable ? tape.graph->leaf(std::move(t)) : tape.graph->constant(std::move(t)));
  }
  return tape;
}

template <typename Scalar>
Var<Scalar> DualBranchNet<Scalar>::apply(const Tape<Scalar>& t, const ConvIds& ids, Var<Scalar> x,
                                         ConvGeometry geom) const {
  return conv3d(x, t.params[std::size_t(ids.weight)], t.params[std::size_t(ids.bias)], geom);
}

template <typename Scalar>
Var<Scalar> DualBranchNet<Scalar>::act(Var<Scalar> x) const {
  return leaky_relu(x, Scalar(cfg_.leaky_slope));
}

template <typename Scalar>
Var<Scalar> DualBranchNet<Scalar>::block(const Tape<Scalar>& t, const ConvIds& ids, Var<Scalar> x,
                                         Index c_out) const {
  const Var<Scalar> y = act(apply(t, ids, x, ConvGeometry::same3()));
  const Index c_in = x.shape().channels;
  if (c_in == c_out) return add(x, y);
  // width change at the input: every output channel gets the channel sum
  Graph<Scalar>& g = *t.graph;
  const Var<Scalar> ones = g.constant(Tensor<Scalar>(Shape{c_out, c_in, 1, 1}, Tensor<Scalar>::Array::Ones(c_out * c_in)));
  const Var<Scalar> zero = g.constant(Tensor<Scalar>::zeros(Shape{c_out, 1, 1, 1}));
  return add(conv3d(x, ones, zero, ConvGeometry::pointwise()), y);
}

template <typename Scalar>
std::pair<Var<Scalar>, Var<Scalar>> DualBranchNet<Scalar>::decode(const Tape<Scalar>& t,
                                                                  const std::vector<Var<Scalar>>& skips,
                                                                  const Decoder& dec) const {
  Var<Scalar> y = skips[std::size_t(dec.start_level)];
  for (int level = dec.start_level; level >= 2; --level) {
    Var<Scalar> u = block(t, dec.convs[std::size_t(level)], y, cfg_.channels(level));
    const ConvIds& up = dec.ups[std::size_t(level)];
    u = act(upconv3d(u, t.params[std::size_t(up.weight)], t.params[std::size_t(up.bias)]));
    y = add(u, skips[std::size_t(level - 1)]);
  }
  y = block(t, dec.final_conv, y, cfg_.channels(1));
  Var<Scalar> seg = softmax_channels(apply(t, dec.seg_head, y, ConvGeometry::pointwise()));
  Var<Scalar> reg = tanh(apply(t, dec.reg_head, y, ConvGeometry::pointwise()));
  return {seg, reg};
}

template <typename Scalar>
HeadVars<Scalar> DualBranchNet<Scalar>::forward(Tape<Scalar>& tape, Var<Scalar> input) const {
  if (input.graph != tape.graph.get()) fail(ErrorKind::contract, "input belongs to a different tape");
  if (input.shape().channels != cfg_.in_channels) {
    fail(ErrorKind::geometry, "network expects " + std::to_string(cfg_.in_channels) + " input channels, got " +
                                  input.shape().str());
  }
  cfg_.check_input(input.shape().dims());

  std::vector<Var<Scalar>> skips(std::size_t(cfg_.levels + 1));
  Var<Scalar> x = input;
  for (int level = 1; level <= cfg_.levels; ++level) {
    if (level > 1) x = act(apply(tape, downs_[std::size_t(level - 1)], x, ConvGeometry::down2()));
    x = block(tape, enc_convs_[std::size_t(level)], x, cfg_.channels(level));
    skips[std::size_t(level)] = x;
  }
  const auto [p_high, r_high] = decode(tape, skips, high_);
  const auto [p_low, r_low] = decode(tape, skips, low_);
  return {p_low, p_high, r_low, r_high};
}

template <typename Scalar>
HeadVars<Scalar> DualBranchNet<Scalar>::forward(Tape<Scalar>& tape, const Volume3& input) const {
  return forward(tape, tape.graph->constant(Tensor<Scalar>::from_volume(input)));
}

template <typename Scalar>
BranchOutputs<Scalar> DualBranchNet<Scalar>::predict(const Volume3& input) const {
  Tape<Scalar> tape = begin(false);
  const HeadVars<Scalar> h = forward(tape, input);
  return head_values(h, input.dims());
}

template <typename Scalar>
BranchOutputs<Scalar> head_values(const HeadVars<Scalar>& h, Dims dims) {
  const Index n = dims.count();
  auto prob = [&](const Var<Scalar>& v) {
    return ProbVolume<Scalar>(dims, v.value().head(n), v.value().tail(n));
  };
  return {prob(h.p_low), prob(h.p_high), Volume<Scalar>(dims, h.r_low.value()),
          Volume<Scalar>(dims, h.r_high.value())};
}

template <typename Scalar>
void sgd_update(std::vector<Parameter<Scalar>>& params, const Tape<Scalar>& tape, Scalar lr) {
  if (!tape.graph->backpropagated() || tape.graph->released()) {
    fail(ErrorKind::lifecycle, "sgd_update needs a tape that has run backward and is not released");
  }
  if (tape.params.size() != params.size()) fail(ErrorKind::contract, "tape does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i].value -= lr * tape.graph->grad(tape.params[i].id);
  }
}

template <typename Scalar>
void backward_and_step(DualBranchNet<Scalar>& net, Tape<Scalar>& tape, Var<Scalar> loss, Scalar lr) {
  tape.graph->backward(loss);
  sgd_update(net.parameters(), tape, lr);
  tape.graph->release();
}

#define SASNET_INSTANTIATE_NETWORK(S)                                                              \
  template class DualBranchNet<S>;                                                                 \
  template BranchOutputs<S> head_values(const HeadVars<S>&, Dims);                                 \
  template void sgd_update(std::vector<Parameter<S>>&, const Tape<S>&, S);                         \
  template void backward_and_step(DualBranchNet<S>&, Tape<S>&, Var<S>, S);

SASNET_INSTANTIATE_NETWORK(float)
SASNET_INSTANTIATE_NETWORK(double)

}  // namespace sasnet

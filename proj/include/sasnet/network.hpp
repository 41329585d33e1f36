#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sasnet/autodiff.hpp"
#include "sasnet/volume.hpp"

namespace sasnet {

struct NetConfig {
  int levels = 5;         // encoder depth
  int base_channels = 4;  // channels at level 1, doubling per level
  int in_channels = 1;
  double leaky_slope = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
  /// Channels at 1-based level i.
  Index channels(int level) const { return Index(base_channels) << (level - 1); }
  /// Spatial divisor between level 1 and the bottleneck.
  Index stride_product() const { return Index(1) << (levels - 1); }
  void check_input(Dims dims) const;
};

template <typename Scalar>
struct Parameter {
  std::string name;
  Shape shape;
  typename Tensor<Scalar>::Array value;
  Index fan_in = 1;
};

/// Head outputs as plain volumes.
template <typename Scalar>
struct BranchOutputs {
  ProbVolume<Scalar> p_lseg;
  ProbVolume<Scalar> p_hseg;
  Volume<Scalar> r_lreg;
  Volume<Scalar> r_hreg;
};

/// Head outputs as graph nodes.
template <typename Scalar>
struct HeadVars {
  Var<Scalar> p_low, p_high;  // (2, D, H, W) softmax
  Var<Scalar> r_low, r_high;  // (1, D, H, W) tanh
};

/// One computation graph with the network's parameters bound as leaves.
template <typename Scalar>
struct Tape {
  std::unique_ptr<Graph<Scalar>> graph = std::make_unique<Graph<Scalar>>();
  std::vector<Var<Scalar>> params;
};

/// Residual conv blocks throughout. Shared encoder with a shallow decoder starting one level above the
/// bottleneck and a deep decoder starting at the bottleneck. Skips add the
/// encoder's pre-downsampling features. Each decoder ends in a 2-channel
/// softmax segmentation head and a 1-channel tanh regression head.
template <typename Scalar>
class DualBranchNet {
 public:
  explicit DualBranchNet(const NetConfig& cfg);

  const NetConfig& config() const { return cfg_; }
  std::vector<Parameter<Scalar>>& parameters() { return params_; }
  const std::vector<Parameter<Scalar>>& parameters() const { return params_; }
  Index parameter_count() const;

  /// Zeroes the weights and biases of all four heads.
  void zero_heads();

  /// Opens a tape; with `differentiable` false the parameters are bound as
  /// constants and no backward state is kept.
  Tape<Scalar> begin(bool differentiable = true) const;

  /// Builds the forward graph for one input on an open tape.
  HeadVars<Scalar> forward(Tape<Scalar>& tape, Var<Scalar> input) const;
  HeadVars<Scalar> forward(Tape<Scalar>& tape, const Volume3& input) const;

  /// Inference without keeping a graph.
  BranchOutputs<Scalar> predict(const Volume3& input) const;

 private:
  struct ConvIds {
    int weight = -1;
    int bias = -1;
  };
  struct Decoder {
    int start_level = 0;
    std::vector<ConvIds> convs;  // indexed by level
    std::vector<ConvIds> ups;    // indexed by level, level -> level-1
    ConvIds final_conv;
    ConvIds seg_head;
    ConvIds reg_head;
  };

  ConvIds add_conv(const std::string& name, Index c_in, Index c_out, ConvGeometry geom);
  ConvIds add_upconv(const std::string& name, Index c_in, Index c_out);
  Decoder add_decoder(const std::string& name, int start_level);

  Var<Scalar> apply(const Tape<Scalar>& t, const ConvIds& ids, Var<Scalar> x, ConvGeometry geom) const;
  Var<Scalar> act(Var<Scalar> x) const;
  /// x + act(conv3(x)); an x of another width is summed over channels and repeated.
  Var<Scalar> block(const Tape<Scalar>& t, const ConvIds& ids, Var<Scalar> x, Index c_out) const;
  std::pair<Var<Scalar>, Var<Scalar>> decode(const Tape<Scalar>& t, const std::vector<Var<Scalar>>& skips,
                                             const Decoder& dec) const;

  NetConfig cfg_;
  std::vector<Parameter<Scalar>> params_;
  std::vector<ConvIds> enc_convs_;  // indexed by level
  std::vector<ConvIds> downs_;      // indexed by level, level -> level+1
  Decoder low_;
  Decoder high_;
};

/// Reads head values out of the graph.
template <typename Scalar>
BranchOutputs<Scalar> head_values(const HeadVars<Scalar>& h, Dims dims);

/// w <- w - lr * grad for every parameter bound on a backpropagated tape.
template <typename Scalar>
void sgd_update(std::vector<Parameter<Scalar>>& params, const Tape<Scalar>& tape, Scalar lr);

/// Reverse sweep from `loss`, one plain SGD step w <- w - lr * dL/dw on every
/// parameter, then releases the graph.
template <typename Scalar>
void backward_and_step(DualBranchNet<Scalar>& net, Tape<Scalar>& tape, Var<Scalar> loss, Scalar lr);

}  // namespace sasnet

#pragma once

#include <Eigen/Core>

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sasnet/volume.hpp"

namespace sasnet {

/// (channels, depth, height, width).
struct Shape {
  Index channels = 1;
  Index depth = 1;
  Index height = 1;
  Index width = 1;

  constexpr Index count() const { return channels * spatial(); }
  constexpr Index spatial() const { return depth * height * width; }
  constexpr Dims dims() const { return {depth, height, width}; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;

  static constexpr Shape scalar() { return {1, 1, 1, 1}; }
  static constexpr Shape of(Index channels, Dims d) { return {channels, d.depth, d.height, d.width}; }

  std::string str() const {
    return "(" + std::to_string(channels) + "," + std::to_string(depth) + "," + std::to_string(height) + "," +
           std::to_string(width) + ")";
  }
};

/// Dense channel-major tensor value.
template <typename Scalar>
struct Tensor {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  Shape shape;
  Array data;

  Tensor() = default;
  Tensor(Shape s, Array d) : shape(s), data(std::move(d)) {}
  static Tensor zeros(Shape s) { return Tensor(s, Array::Zero(s.count())); }
  static Tensor from_volume(const Volume3& v) {
    return Tensor(Shape::of(1, v.dims()), v.data().template cast<Scalar>());
  }
};

template <typename Scalar>
class Graph;

/// Handle to a node in a Graph.
template <typename Scalar>
struct Var {
  Graph<Scalar>* graph = nullptr;
  int id = -1;

  const Shape& shape() const;
  const typename Tensor<Scalar>::Array& value() const;
  Scalar item() const;
};

/// Reverse-mode tape. Nodes are appended in creation order, which is a
/// topological order, so the backward sweep simply walks ids downwards.
template <typename Scalar>
class Graph {
 public:
  using Array = typename Tensor<Scalar>::Array;
  /// Receives the node's output gradient and adds into its parents' grads.
  using Backward = std::function<void(Graph&, const Array&)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  /// Constant leaf; never receives a gradient.
  Var<Scalar> constant(Tensor<Scalar> t);
  /// Differentiable leaf.
  Var<Scalar> leaf(Tensor<Scalar> t);

  /// Registers an op output. `parents` decide whether it needs a gradient.
  Var<Scalar> record(Shape shape, Array value, std::vector<int> parents, Backward backward);

  const Shape& shape(int id) const { return nodes_.at(std::size_t(id)).shape; }
  const Array& value(int id) const { return nodes_.at(std::size_t(id)).value; }
  bool requires_grad(int id) const { return nodes_.at(std::size_t(id)).requires_grad; }

  /// Gradient of the last backward pass; zeros for nodes it did not reach.
  const Array& grad(int id) const;

  /// Adds `g` into a node's gradient if the node needs one.
  template <typename Expr>
  void accumulate(int id, const Expr& g) {
    auto& n = nodes_[std::size_t(id)];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) n.grad = Array::Zero(n.value.size());
    n.grad += g;
  }
  /// Direct access for in-place accumulation by kernels; allocates on demand.
  Array& grad_buffer(int id);

  /// Reverse sweep from a scalar node. Can run once per graph.
  void backward(Var<Scalar> loss);

  /// Drops values and closures; the graph accepts nothing afterwards.
  void release();

  bool backpropagated() const { return state_ != State::recording; }
  bool released() const { return state_ == State::released; }
  std::size_t size() const { return nodes_.size(); }

 private:
  enum class State { recording, backpropagated, released };

  struct Node {
    Shape shape;
    Array value;
    Array grad;
    Backward backward;
    bool requires_grad = false;
  };

  void check_recording(const char* what) const;

  std::vector<Node> nodes_;
  State state_ = State::recording;
};

struct ConvGeometry {
  int kernel = 3;
  int stride = 1;
  int pad = 1;

  static constexpr ConvGeometry same3() { return {3, 1, 1}; }
  static constexpr ConvGeometry pointwise() { return {1, 1, 0}; }
  static constexpr ConvGeometry down2() { return {2, 2, 0}; }

  Index out_extent(Index in) const { return (in + 2 * pad - kernel) / stride + 1; }
  Index taps() const { return Index(kernel) * kernel * kernel; }
};

/// Weights are laid out as a (c_out) x (c_in * k^3) matrix stored in a
/// tensor of shape (c_out, c_in * k^3, 1, 1); bias has shape (c_out, 1, 1, 1).
template <typename Scalar>
Var<Scalar> conv3d(Var<Scalar> x, Var<Scalar> weight, Var<Scalar> bias, ConvGeometry geom);

/// Stride-2, kernel-2 transposed convolution doubling every spatial dim.
/// Weight shape (c_out * 8, c_in, 1, 1); bias (c_out, 1, 1, 1).
template <typename Scalar>
Var<Scalar> upconv3d(Var<Scalar> x, Var<Scalar> weight, Var<Scalar> bias);

template <typename Scalar>
Var<Scalar> leaky_relu(Var<Scalar> x, Scalar slope = Scalar(0.01));

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b);

template <typename Scalar>
Var<Scalar> tanh(Var<Scalar> x);

/// Softmax across channels at every voxel.
template <typename Scalar>
Var<Scalar> softmax_channels(Var<Scalar> x);

/// Soft Dice loss on channel 1 of a 2-channel probability tensor.
template <typename Scalar>
Var<Scalar> soft_dice_loss(Var<Scalar> p, const BinaryMask& y, double smooth = 1e-5);

/// Mean -log p(true class) of a 2-channel probability tensor, clamped.
template <typename Scalar>
Var<Scalar> cross_entropy(Var<Scalar> p, const BinaryMask& y, double clamp = 1e-7);

/// Mean of (a - b)^2 over every element.
template <typename Scalar>
Var<Scalar> mse(Var<Scalar> a, Var<Scalar> b);

/// Mean of (a - target)^2 over every element; the target is not differentiated.
template <typename Scalar>
Var<Scalar> mse_to(Var<Scalar> a, const typename Tensor<Scalar>::Array& target);

/// sum_i weight_i * term_i over scalar nodes.
template <typename Scalar>
Var<Scalar> weighted_sum(const std::vector<Var<Scalar>>& terms, const std::vector<Scalar>& weights);

}  // namespace sasnet

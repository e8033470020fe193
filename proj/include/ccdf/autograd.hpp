#pragma once

// Minimal reverse-mode automatic differentiation over dense NCHW tensors of
// doubles. Only the operations needed by the change detection networks and
// their losses are provided.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ccdf {

struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

// Handle to a node of the computation graph. Copies share the node.
class Var {
 public:
  Var() = default;

  static Var constant(Shape shape, std::vector<double> values);
  static Var constant(Shape shape, double fill = 0.0);
  static Var scalar(double v) { return constant(Shape{1, 1, 1, 1}, v); }
  // Leaf that accumulates gradients across backward passes.
  static Var parameter(Shape shape, std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t numel() const { return shape().numel(); }
  std::span<const double> value() const;
  // Direct write access, intended for optimizers and tests.
  std::span<double> mutable_value();
  // Zero-filled when no gradient has been accumulated yet.
  std::vector<double> grad() const;
  bool has_grad() const;
  bool requires_grad() const;
  void zero_grad();
  double item() const;

  // Same values, cut from the graph.
  Var detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Var(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Accumulates d(loss)/d(leaf) into every reachable leaf with requires_grad.
void backward(const Var& loss);

bool grad_enabled();

// Disables graph recording for the lifetime of the guard.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
// x is N×C×H×W, m is N×1×H×W; m is broadcast over channels.
Var mul_channel_broadcast(const Var& x, const Var& m);
// scale * x + shift
Var affine(const Var& x, double scale, double shift);
Var abs(const Var& x);
Var square(const Var& x);
Var leaky_relu(const Var& x, double slope);
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var sum(const Var& x);
Var mean(const Var& x);
// Subtracts the spatial mean of every (sample, channel) plane.
Var center_planes(const Var& x);

// weight: out×in×k×k, bias: 1×out×1×1 (may be undefined).
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad);
Var max_pool2x2(const Var& x);
Var upsample_nearest2x(const Var& x);
Var concat_channels(const Var& a, const Var& b);
Var slice_channels(const Var& x, int begin, int count);

}  // namespace ccdf

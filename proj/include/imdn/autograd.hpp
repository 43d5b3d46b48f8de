#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "imdn/tensor.hpp"

// Tape-free reverse-mode differentiation: every op result keeps references to
// its parents and a closure that pushes its gradient back to them.
namespace imdn::ag {

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // empty until something accumulates into it
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward;
  const char* op = "leaf";

  bool is_leaf() const noexcept { return parents.empty(); }
  void accumulate(const Tensor& g);
  Tensor& grad_buffer();
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  static Var parameter(Tensor value) { return Var(std::move(value), true); }

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool has_grad() const { return node_ && node_->grad.numel() == node_->value.numel(); }
  // Zero tensor of the value's shape if nothing has accumulated yet.
  Tensor grad() const;
  void zero_grad();

  const NodePtr& node() const noexcept { return node_; }
  explicit operator bool() const noexcept { return static_cast<bool>(node_); }

 private:
  NodePtr node_;
};

// Disables graph recording on the current thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled() noexcept;

Var conv2d(const Var& input, const Var& weight, const Var& bias, ConvGeometry g);
Var leaky_relu(const Var& x, double slope);
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var slice_channels(const Var& x, int begin, int end);
std::pair<Var, Var> channel_split(const Var& x, int first);
Var concat_channels(const std::vector<Var>& parts);
Var pixel_shuffle(const Var& x, int s);
Var global_contrast_pool(const Var& x);
Var channel_scale(const Var& x, const Var& gates);
Var add(const Var& x, const Var& y);

// Scalar reductions, shape (1, 1, 1, 1).
Var sum(const Var& x);
Var dot(const Var& x, const Tensor& weights);
Var l1_loss(const Var& pred, const Tensor& target);

double l1_loss(const Tensor& pred, const Tensor& target);

// Accumulates d(loss)/d(leaf) into every leaf that requires grad. Intermediate
// gradients are recomputed from scratch on each call and released afterwards.
void backward(const Var& loss);

namespace debug {

// Perturbs the input gradient of the named op ("conv2d", "leaky_relu", ...)
// so gradient checks can be shown to fail. Empty string restores correctness.
void set_corrupted_backward(std::string op);
const std::string& corrupted_backward();

// Records, on this thread, which side of the kink every leaky_relu / relu
// input element falls on. Gradient checks compare logs to reject probes that
// straddle a kink.
class SignLog {
 public:
  SignLog();
  ~SignLog();
  SignLog(const SignLog&) = delete;
  SignLog& operator=(const SignLog&) = delete;

  const std::vector<bool>& signs() const noexcept { return signs_; }

 private:
  std::vector<bool> signs_;
  std::vector<bool>* previous_;
};

// Adds an extra parent edge; exists only so tests can build a cyclic graph.
void link(const Var& child, const Var& parent);

}  // namespace debug

}  // namespace imdn::ag

#include "imdn/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "imdn/kernels.hpp"

namespace imdn::ag {

namespace {

thread_local bool g_grad_enabled = true;
std::string g_corrupted_op;

constexpr double kCorruption = 1.01;

thread_local std::vector<bool>* g_sign_log = nullptr;

void log_signs(const Tensor& x) {
  if (!g_sign_log) return;
  for (std::size_t i = 0; i < x.numel(); ++i) g_sign_log->push_back(x[i] > 0.0);
}

void maybe_corrupt(const char* op, Tensor& g) {
  if (!g_corrupted_op.empty() && g_corrupted_op == op) {
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] *= kCorruption;
  }
}

// Wraps an op result. Records parents only when some input needs a gradient.
Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> fn,
                const char* op) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  if (g_grad_enabled &&
      std::any_of(inputs.begin(), inputs.end(), [](const Var& v) { return v.requires_grad(); })) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (const Var& v : inputs) node->parents.push_back(v.node());
    node->backward = std::move(fn);
  }
  return Var(std::move(node));
}

Tensor scalar(double v) { return Tensor({1, 1, 1, 1}, v); }

}  // namespace

Tensor& Node::grad_buffer() {
  if (grad.numel() != value.numel() || grad.shape() != value.shape()) grad = Tensor(value.shape());
  return grad;
}

void Node::accumulate(const Tensor& g) {
  if (!requires_grad) return;
  if (g.shape() != value.shape())
    fail(ErrorCode::shape_mismatch, std::string("gradient shape mismatch at op ") + op);
  Tensor& buf = grad_buffer();
  for (std::size_t i = 0; i < g.numel(); ++i) buf[i] += g[i];
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Var::grad() const {
  if (has_grad()) return node_->grad;
  return Tensor(node_->value.shape());
}

void Var::zero_grad() {
  if (node_ && has_grad()) node_->grad.fill(0.0);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() noexcept { return g_grad_enabled; }

Var conv2d(const Var& input, const Var& weight, const Var& bias, ConvGeometry g) {
  Tensor out = imdn::conv2d(input.value(), weight.value(), bias.value(), g);
  return make_result(
      std::move(out), {input, weight, bias},
      [g](Node& self) {
        Node& in = *self.parents[0];
        Node& w = *self.parents[1];
        Node& b = *self.parents[2];
        // Fresh buffers, then one add each, so repeated backward passes sum whole
        // contributions rather than interleaving partial products.
        Tensor gin;
        Tensor gw;
        Tensor gb;
        if (in.requires_grad) gin = Tensor(in.value.shape());
        if (w.requires_grad) gw = Tensor(w.value.shape());
        if (b.requires_grad) gb = Tensor(b.value.shape());
        detail::conv2d_backward(in.value, w.value, g, self.grad, in.requires_grad ? &gin : nullptr,
                                w.requires_grad ? &gw : nullptr, b.requires_grad ? &gb : nullptr);
        if (in.requires_grad) {
          maybe_corrupt("conv2d", gin);
          in.accumulate(gin);
        }
        if (w.requires_grad) w.accumulate(gw);
        if (b.requires_grad) b.accumulate(gb);
      },
      "conv2d");
}

Var leaky_relu(const Var& x, double slope) {
  log_signs(x.value());
  return make_result(
      imdn::leaky_relu(x.value(), slope), {x},
      [slope](Node& self) {
        Node& in = *self.parents[0];
        Tensor g(self.grad.shape());
        for (std::size_t i = 0; i < g.numel(); ++i)
          g[i] = self.grad[i] * (in.value[i] >= 0.0 ? 1.0 : slope);
        maybe_corrupt("leaky_relu", g);
        in.accumulate(g);
      },
      "leaky_relu");
}

Var relu(const Var& x) {
  log_signs(x.value());
  return make_result(
      imdn::relu(x.value()), {x},
      [](Node& self) {
        Node& in = *self.parents[0];
        Tensor g(self.grad.shape());
        for (std::size_t i = 0; i < g.numel(); ++i)
          g[i] = in.value[i] > 0.0 ? self.grad[i] : 0.0;
        maybe_corrupt("relu", g);
        in.accumulate(g);
      },
      "relu");
}

Var sigmoid(const Var& x) {
  return make_result(
      imdn::sigmoid(x.value()), {x},
      [](Node& self) {
        Node& in = *self.parents[0];
        Tensor g(self.grad.shape());
        for (std::size_t i = 0; i < g.numel(); ++i) {
          const double y = self.value[i];
          g[i] = self.grad[i] * y * (1.0 - y);
        }
        maybe_corrupt("sigmoid", g);
        in.accumulate(g);
      },
      "sigmoid");
}

Var slice_channels(const Var& x, int begin, int end) {
  return make_result(
      imdn::slice_channels(x.value(), begin, end), {x},
      [begin](Node& self) {
        Node& in = *self.parents[0];
        if (!in.requires_grad) return;
        Tensor& buf = in.grad_buffer();
        const std::size_t chunk = static_cast<std::size_t>(self.value.c()) * self.value.shape().plane();
        for (int n = 0; n < self.value.n(); ++n) {
          const double* src = self.grad.plane(n, 0);
          double* dst = buf.plane(n, begin);
          for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
        }
      },
      "slice_channels");
}

std::pair<Var, Var> channel_split(const Var& x, int first) {
  if (first <= 0 || first >= x.value().c())
    fail(ErrorCode::invalid_argument, "channel_split: split point " + std::to_string(first) +
                                          " must lie strictly inside (0, " +
                                          std::to_string(x.value().c()) + ")");
  return {slice_channels(x, 0, first), slice_channels(x, first, x.value().c())};
}

Var concat_channels(const std::vector<Var>& parts) {
  std::vector<Tensor> values;
  values.reserve(parts.size());
  for (const Var& p : parts) values.push_back(p.value());
  return make_result(
      imdn::concat_channels(values), parts,
      [](Node& self) {
        int offset = 0;
        for (const NodePtr& p : self.parents) {
          const int c = p->value.c();
          if (p->requires_grad) p->accumulate(imdn::slice_channels(self.grad, offset, offset + c));
          offset += c;
        }
      },
      "concat_channels");
}

Var pixel_shuffle(const Var& x, int s) {
  return make_result(
      imdn::pixel_shuffle(x.value(), s), {x},
      [s](Node& self) {
        Tensor g = imdn::pixel_unshuffle(self.grad, s);
        maybe_corrupt("pixel_shuffle", g);
        self.parents[0]->accumulate(g);
      },
      "pixel_shuffle");
}

Var global_contrast_pool(const Var& x) {
  return make_result(
      imdn::global_contrast_pool(x.value()), {x},
      [](Node& self) {
        Node& in = *self.parents[0];
        const Tensor& v = in.value;
        const std::size_t area = v.shape().plane();
        const double inv_area = 1.0 / static_cast<double>(area);
        Tensor g(v.shape());
        for (int n = 0; n < v.n(); ++n)
          for (int c = 0; c < v.c(); ++c) {
            const double* p = v.plane(n, c);
            double mean = 0.0;
            for (std::size_t i = 0; i < area; ++i) mean += p[i];
            mean *= inv_area;
            const double stdev = self.value.at(n, c, 0, 0) - mean;
            const double go = self.grad.at(n, c, 0, 0);
            double* dst = g.plane(n, c);
            // d(std)/dx is taken as 0 on a constant plane.
            const double std_coeff = stdev > 0.0 ? inv_area / stdev : 0.0;
            for (std::size_t i = 0; i < area; ++i)
              dst[i] = go * (inv_area + (p[i] - mean) * std_coeff);
          }
        maybe_corrupt("global_contrast_pool", g);
        in.accumulate(g);
      },
      "global_contrast_pool");
}

Var channel_scale(const Var& x, const Var& gates) {
  return make_result(
      imdn::channel_scale(x.value(), gates.value()), {x, gates},
      [](Node& self) {
        Node& in = *self.parents[0];
        Node& gt = *self.parents[1];
        const std::size_t area = in.value.shape().plane();
        if (in.requires_grad) {
          Tensor g = imdn::channel_scale(self.grad, gt.value);
          maybe_corrupt("channel_scale", g);
          in.accumulate(g);
        }
        if (gt.requires_grad) {
          Tensor gg(gt.value.shape());
          for (int n = 0; n < in.value.n(); ++n)
            for (int c = 0; c < in.value.c(); ++c) {
              const double* xv = in.value.plane(n, c);
              const double* go = self.grad.plane(n, c);
              double s = 0.0;
              for (std::size_t i = 0; i < area; ++i) s += xv[i] * go[i];
              gg.at(n, c, 0, 0) = s;
            }
          gt.accumulate(gg);
        }
      },
      "channel_scale");
}

Var add(const Var& x, const Var& y) {
  return make_result(
      imdn::add(x.value(), y.value()), {x, y},
      [](Node& self) {
        self.parents[0]->accumulate(self.grad);
        self.parents[1]->accumulate(self.grad);
      },
      "add");
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return make_result(
      scalar(s), {x},
      [](Node& self) {
        Node& in = *self.parents[0];
        in.accumulate(Tensor(in.value.shape(), self.grad[0]));
      },
      "sum");
}

Var dot(const Var& x, const Tensor& weights) {
  if (x.value().shape() != weights.shape())
    fail(ErrorCode::shape_mismatch, "dot: weight shape does not match input");
  double s = 0.0;
  for (std::size_t i = 0; i < weights.numel(); ++i) s += x.value()[i] * weights[i];
  return make_result(
      scalar(s), {x},
      [weights](Node& self) { self.parents[0]->accumulate(imdn::scale(weights, self.grad[0])); },
      "dot");
}

double l1_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape())
    fail(ErrorCode::shape_mismatch, "l1_loss: prediction " + to_string(pred.shape()) +
                                        " vs target " + to_string(target.shape()));
  if (pred.numel() == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) s += std::abs(pred[i] - target[i]);
  return s / static_cast<double>(pred.numel());
}

Var l1_loss(const Var& pred, const Tensor& target) {
  const double value = l1_loss(pred.value(), target);
  return make_result(
      scalar(value), {pred},
      [target](Node& self) {
        Node& in = *self.parents[0];
        const double coeff = self.grad[0] / static_cast<double>(in.value.numel());
        Tensor g(in.value.shape());
        for (std::size_t i = 0; i < g.numel(); ++i) {
          const double d = in.value[i] - target[i];
          // Subgradient 0 at the kink.
          g[i] = d > 0.0 ? coeff : (d < 0.0 ? -coeff : 0.0);
        }
        in.accumulate(g);
      },
      "l1_loss");
}

void backward(const Var& loss) {
  if (!loss) fail(ErrorCode::invalid_argument, "backward: null loss");
  if (loss.value().numel() != 1)
    fail(ErrorCode::invalid_argument, "backward: loss must be scalar, got " +
                                          to_string(loss.value().shape()));
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS; a grey node seen again means a cycle.
  enum class Mark : char { grey, black };
  std::unordered_map<Node*, Mark> marks;
  std::vector<Node*> order;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  marks[loss.node().get()] = Mark::grey;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (!parent->requires_grad) continue;
      auto it = marks.find(parent);
      if (it == marks.end()) {
        marks[parent] = Mark::grey;
        stack.emplace_back(parent, 0);
      } else if (it->second == Mark::grey) {
        fail(ErrorCode::graph_cycle, "backward: computation graph contains a cycle");
      }
    } else {
      marks[node] = Mark::black;
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order)
    if (!n->is_leaf()) n->grad = Tensor(n->value.shape());
  Node* root = loss.node().get();
  root->grad_buffer()[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->is_leaf()) continue;
    if (n->backward) n->backward(*n);
    n->grad = Tensor();
  }
}

namespace debug {

void set_corrupted_backward(std::string op) { g_corrupted_op = std::move(op); }
const std::string& corrupted_backward() { return g_corrupted_op; }

SignLog::SignLog() : previous_(g_sign_log) { g_sign_log = &signs_; }
SignLog::~SignLog() { g_sign_log = previous_; }

void link(const Var& child, const Var& parent) {
  child.node()->parents.push_back(parent.node());
  child.node()->requires_grad = true;
  parent.node()->requires_grad = true;
}

}  // namespace debug

}  // namespace imdn::ag

#include "ccdf/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "ccdf/errors.hpp"

namespace ccdf {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

std::string Shape::str() const {
  std::ostringstream os;
  os << '[' << n << ',' << c << ',' << h << ',' << w << ']';
  return os.str();
}

namespace {

thread_local bool g_grad_enabled = true;

NodePtr make_node(Shape shape, std::vector<double> value) {
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(value);
  return node;
}

// Attaches inputs and the backward closure only when some input needs a
// gradient and recording is enabled.
Var finish(NodePtr out, std::vector<NodePtr> inputs,
           std::function<void(Node&)> backward_fn) {
  if (!g_grad_enabled) return Var(std::move(out));
  const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                 [](const NodePtr& p) { return p->requires_grad; });
  if (needs) {
    out->requires_grad = true;
    out->inputs = std::move(inputs);
    out->backward = std::move(backward_fn);
  }
  return Var(std::move(out));
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() +
                     " vs " + b.shape().str());
  }
}

void require_defined(const Var& v, const char* op) {
  if (!v.defined()) throw ShapeError(std::string(op) + ": undefined tensor");
}

template <typename F>
Var unary(const Var& x, F forward, std::function<double(double, double)> derivative,
          const char* name) {
  require_defined(x, name);
  const auto& xin = x.node();
  std::vector<double> out(xin->value.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward(xin->value[i]);
  auto node = make_node(xin->shape, std::move(out));
  return finish(node, {xin}, [derivative](Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i] * derivative(in.value[i], self.value[i]);
    }
  });
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var Var::constant(Shape shape, std::vector<double> values) {
  if (values.size() != shape.numel()) {
    throw ShapeError("constant: " + std::to_string(values.size()) +
                     " values for shape " + shape.str());
  }
  return Var(make_node(shape, std::move(values)));
}

Var Var::constant(Shape shape, double fill) {
  return Var(make_node(shape, std::vector<double>(shape.numel(), fill)));
}

Var Var::parameter(Shape shape, std::vector<double> values) {
  Var v = constant(shape, std::move(values));
  v.node_->requires_grad = true;
  return v;
}

const Shape& Var::shape() const {
  require_defined(*this, "shape");
  return node_->shape;
}

std::span<const double> Var::value() const {
  require_defined(*this, "value");
  return node_->value;
}

std::span<double> Var::mutable_value() {
  require_defined(*this, "mutable_value");
  return node_->value;
}

std::vector<double> Var::grad() const {
  require_defined(*this, "grad");
  if (node_->grad.empty()) return std::vector<double>(node_->value.size(), 0.0);
  return node_->grad;
}

bool Var::has_grad() const { return defined() && !node_->grad.empty(); }

bool Var::requires_grad() const { return defined() && node_->requires_grad; }

void Var::zero_grad() {
  if (defined()) node_->grad.clear();
}

double Var::item() const {
  require_defined(*this, "item");
  if (node_->value.size() != 1) {
    throw ShapeError("item: tensor has " + std::to_string(node_->value.size()) +
                     " elements");
  }
  return node_->value[0];
}

Var Var::detach() const {
  require_defined(*this, "detach");
  return Var(make_node(node_->shape, node_->value));
}

void backward(const Var& loss) {
  require_defined(loss, "backward");
  if (loss.numel() != 1) throw ShapeError("backward: loss must be a scalar");
  const NodePtr& root = loss.node();
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return finish(make_node(a.shape(), std::move(out)), {a.node(), b.node()}, [](Node& self) {
    for (auto& in : self.inputs) {
      if (!in->requires_grad) continue;
      auto& g = in->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return finish(make_node(a.shape(), std::move(out)), {a.node(), b.node()}, [](Node& self) {
    if (self.inputs[0]->requires_grad) {
      auto& g = self.inputs[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (self.inputs[1]->requires_grad) {
      auto& g = self.inputs[1]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return finish(make_node(a.shape(), std::move(out)), {a.node(), b.node()}, [](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    if (x.requires_grad) {
      auto& g = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y.value[i];
    }
    if (y.requires_grad) {
      auto& g = y.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * x.value[i];
    }
  });
}

Var mul_channel_broadcast(const Var& x, const Var& m) {
  require_defined(x, "mul_channel_broadcast");
  require_defined(m, "mul_channel_broadcast");
  const Shape xs = x.shape();
  const Shape ms = m.shape();
  if (ms.n != xs.n || ms.c != 1 || ms.h != xs.h || ms.w != xs.w) {
    throw ShapeError("mul_channel_broadcast: mask " + ms.str() + " vs image " + xs.str());
  }
  const std::size_t plane = xs.plane();
  std::vector<double> out(xs.numel());
  const auto xv = x.value();
  const auto mv = m.value();
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * xs.c + c) * plane;
      const std::size_t mbase = static_cast<std::size_t>(n) * plane;
      for (std::size_t i = 0; i < plane; ++i) out[base + i] = xv[base + i] * mv[mbase + i];
    }
  }
  return finish(make_node(xs, std::move(out)), {x.node(), m.node()}, [xs, plane](Node& self) {
    Node& img = *self.inputs[0];
    Node& mask = *self.inputs[1];
    for (int n = 0; n < xs.n; ++n) {
      const std::size_t mbase = static_cast<std::size_t>(n) * plane;
      for (int c = 0; c < xs.c; ++c) {
        const std::size_t base = (static_cast<std::size_t>(n) * xs.c + c) * plane;
        if (img.requires_grad) {
          auto& g = img.grad_buffer();
          for (std::size_t i = 0; i < plane; ++i) g[base + i] += self.grad[base + i] * mask.value[mbase + i];
        }
        if (mask.requires_grad) {
          auto& g = mask.grad_buffer();
          for (std::size_t i = 0; i < plane; ++i) g[mbase + i] += self.grad[base + i] * img.value[base + i];
        }
      }
    }
  });
}

Var affine(const Var& x, double scale, double shift) {
  return unary(
      x, [scale, shift](double v) { return scale * v + shift; },
      [scale](double, double) { return scale; }, "affine");
}

Var abs(const Var& x) {
  return unary(
      x, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }, "abs");
}

Var square(const Var& x) {
  return unary(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; }, "square");
}

Var leaky_relu(const Var& x, double slope) {
  return unary(
      x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v, double) { return v > 0.0 ? 1.0 : slope; }, "leaky_relu");
}

Var relu(const Var& x) { return leaky_relu(x, 0.0); }

Var sigmoid(const Var& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); }, "sigmoid");
}

Var sum(const Var& x) {
  require_defined(x, "sum");
  double total = 0.0;
  for (double v : x.value()) total += v;
  return finish(make_node(Shape{1, 1, 1, 1}, {total}), {x.node()}, [](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    const double up = self.grad[0];
    for (auto& gi : g) gi += up;
  });
}

Var mean(const Var& x) {
  require_defined(x, "mean");
  const std::size_t count = x.numel();
  if (count == 0) throw ShapeError("mean: empty tensor");
  double total = 0.0;
  for (double v : x.value()) total += v;
  const double inv = 1.0 / static_cast<double>(count);
  return finish(make_node(Shape{1, 1, 1, 1}, {total * inv}), {x.node()}, [inv](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    const double up = self.grad[0] * inv;
    for (auto& gi : g) gi += up;
  });
}

Var center_planes(const Var& x) {
  require_defined(x, "center_planes");
  const Shape xs = x.shape();
  const std::size_t plane = xs.plane();
  if (plane == 0) throw ShapeError("center_planes: empty planes");
  std::vector<double> out(x.value().begin(), x.value().end());
  const double inv = 1.0 / static_cast<double>(plane);
  for (std::size_t b = 0; b < out.size(); b += plane) {
    double total = 0.0;
    for (std::size_t i = 0; i < plane; ++i) total += out[b + i];
    for (std::size_t i = 0; i < plane; ++i) out[b + i] -= total * inv;
  }
  return finish(make_node(xs, std::move(out)), {x.node()}, [plane, inv](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (std::size_t b = 0; b < g.size(); b += plane) {
      double total = 0.0;
      for (std::size_t i = 0; i < plane; ++i) total += self.grad[b + i];
      for (std::size_t i = 0; i < plane; ++i) g[b + i] += self.grad[b + i] - total * inv;
    }
  });
}

namespace {

struct ConvGeometry {
  Shape in;
  Shape out;
  int k = 0;
  int stride = 1;
  int pad = 0;

  // Output columns [lo, hi) whose input column ox*stride + kx - pad is valid.
  std::pair<int, int> out_range(int kidx, int in_extent, int out_extent) const {
    int lo = 0;
    while (lo < out_extent && lo * stride + kidx - pad < 0) ++lo;
    int hi = out_extent;
    while (hi > lo && (hi - 1) * stride + kidx - pad >= in_extent) --hi;
    return {lo, hi};
  }
};

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
  require_defined(x, "conv2d");
  require_defined(weight, "conv2d");
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (ws.c != xs.c || ws.h != ws.w) {
    throw ShapeError("conv2d: weight " + ws.str() + " incompatible with input " + xs.str());
  }
  if (bias.defined() && bias.numel() != static_cast<std::size_t>(ws.n)) {
    throw ShapeError("conv2d: bias size mismatch");
  }
  if (stride < 1 || pad < 0) throw ShapeError("conv2d: invalid stride/pad");
  ConvGeometry geo;
  geo.in = xs;
  geo.k = ws.h;
  geo.stride = stride;
  geo.pad = pad;
  const int ho = (xs.h + 2 * pad - geo.k) / stride + 1;
  const int wo = (xs.w + 2 * pad - geo.k) / stride + 1;
  if (ho <= 0 || wo <= 0) throw ShapeError("conv2d: input too small " + xs.str());
  geo.out = Shape{xs.n, ws.n, ho, wo};

  std::vector<double> out(geo.out.numel(), 0.0);
  const auto xv = x.value();
  const auto wv = weight.value();
  const std::size_t in_plane = xs.plane();
  const std::size_t out_plane = geo.out.plane();
  for (int n = 0; n < xs.n; ++n) {
    for (int oc = 0; oc < ws.n; ++oc) {
      double* dst = out.data() + (static_cast<std::size_t>(n) * ws.n + oc) * out_plane;
      if (bias.defined()) std::fill(dst, dst + out_plane, bias.value()[oc]);
      for (int ic = 0; ic < xs.c; ++ic) {
        const double* src = xv.data() + (static_cast<std::size_t>(n) * xs.c + ic) * in_plane;
        for (int ky = 0; ky < geo.k; ++ky) {
          const auto [ylo, yhi] = geo.out_range(ky, xs.h, ho);
          for (int kx = 0; kx < geo.k; ++kx) {
            const auto [xlo, xhi] = geo.out_range(kx, xs.w, wo);
            const double wk = wv[((static_cast<std::size_t>(oc) * xs.c + ic) * geo.k + ky) * geo.k + kx];
            for (int oy = ylo; oy < yhi; ++oy) {
              const double* srow = src + static_cast<std::size_t>(oy * stride + ky - pad) * xs.w;
              double* drow = dst + static_cast<std::size_t>(oy) * wo;
              if (stride == 1) {
                const double* s = srow + (kx - pad);
                for (int ox = xlo; ox < xhi; ++ox) drow[ox] += wk * s[ox];
              } else {
                for (int ox = xlo; ox < xhi; ++ox) drow[ox] += wk * srow[ox * stride + kx - pad];
              }
            }
          }
        }
      }
    }
  }

  std::vector<NodePtr> inputs{x.node(), weight.node()};
  if (bias.defined()) inputs.push_back(bias.node());
  return finish(make_node(geo.out, std::move(out)), std::move(inputs), [geo](Node& self) {
    Node& in = *self.inputs[0];
    Node& w = *self.inputs[1];
    Node* b = self.inputs.size() > 2 ? self.inputs[2].get() : nullptr;
    const Shape xs = geo.in;
    const Shape os = geo.out;
    const int k = geo.k;
    const int stride = geo.stride;
    const int pad = geo.pad;
    const std::size_t in_plane = xs.plane();
    const std::size_t out_plane = os.plane();
    double* gin = in.requires_grad ? in.grad_buffer().data() : nullptr;
    double* gw = w.requires_grad ? w.grad_buffer().data() : nullptr;
    if (b && b->requires_grad) {
      auto& gb = b->grad_buffer();
      for (int n = 0; n < os.n; ++n) {
        for (int oc = 0; oc < os.c; ++oc) {
          const double* g = self.grad.data() + (static_cast<std::size_t>(n) * os.c + oc) * out_plane;
          double acc = 0.0;
          for (std::size_t i = 0; i < out_plane; ++i) acc += g[i];
          gb[oc] += acc;
        }
      }
    }
    if (!gin && !gw) return;
    for (int n = 0; n < os.n; ++n) {
      for (int oc = 0; oc < os.c; ++oc) {
        const double* g = self.grad.data() + (static_cast<std::size_t>(n) * os.c + oc) * out_plane;
        for (int ic = 0; ic < xs.c; ++ic) {
          const std::size_t in_off = (static_cast<std::size_t>(n) * xs.c + ic) * in_plane;
          const double* src = in.value.data() + in_off;
          for (int ky = 0; ky < k; ++ky) {
            const auto [ylo, yhi] = geo.out_range(ky, xs.h, os.h);
            for (int kx = 0; kx < k; ++kx) {
              const auto [xlo, xhi] = geo.out_range(kx, xs.w, os.w);
              const std::size_t widx = ((static_cast<std::size_t>(oc) * xs.c + ic) * k + ky) * k + kx;
              const double wk = w.value[widx];
              double wacc = 0.0;
              for (int oy = ylo; oy < yhi; ++oy) {
                const std::size_t irow = static_cast<std::size_t>(oy * stride + ky - pad) * xs.w;
                const double* grow = g + static_cast<std::size_t>(oy) * os.w;
                for (int ox = xlo; ox < xhi; ++ox) {
                  const std::size_t ii = irow + ox * stride + kx - pad;
                  wacc += grow[ox] * src[ii];
                  if (gin) gin[in_off + ii] += grow[ox] * wk;
                }
              }
              if (gw) gw[widx] += wacc;
            }
          }
        }
      }
    }
  });
}

Var max_pool2x2(const Var& x) {
  require_defined(x, "max_pool2x2");
  const Shape xs = x.shape();
  const Shape os{xs.n, xs.c, xs.h / 2, xs.w / 2};
  if (os.h == 0 || os.w == 0) throw ShapeError("max_pool2x2: input too small " + xs.str());
  std::vector<double> out(os.numel());
  std::vector<std::size_t> argmax(os.numel());
  const auto xv = x.value();
  for (int p = 0; p < xs.n * xs.c; ++p) {
    const std::size_t ib = static_cast<std::size_t>(p) * xs.plane();
    const std::size_t ob = static_cast<std::size_t>(p) * os.plane();
    for (int y = 0; y < os.h; ++y) {
      for (int xx = 0; xx < os.w; ++xx) {
        std::size_t best = ib + static_cast<std::size_t>(2 * y) * xs.w + 2 * xx;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t idx = ib + static_cast<std::size_t>(2 * y + dy) * xs.w + 2 * xx + dx;
            if (xv[idx] > xv[best]) best = idx;
          }
        }
        out[ob + static_cast<std::size_t>(y) * os.w + xx] = xv[best];
        argmax[ob + static_cast<std::size_t>(y) * os.w + xx] = best;
      }
    }
  }
  return finish(make_node(os, std::move(out)), {x.node()},
                [argmax = std::move(argmax)](Node& self) {
                  Node& in = *self.inputs[0];
                  if (!in.requires_grad) return;
                  auto& g = in.grad_buffer();
                  for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += self.grad[i];
                });
}

Var upsample_nearest2x(const Var& x) {
  require_defined(x, "upsample_nearest2x");
  const Shape xs = x.shape();
  const Shape os{xs.n, xs.c, xs.h * 2, xs.w * 2};
  std::vector<double> out(os.numel());
  const auto xv = x.value();
  for (int p = 0; p < xs.n * xs.c; ++p) {
    const std::size_t ib = static_cast<std::size_t>(p) * xs.plane();
    const std::size_t ob = static_cast<std::size_t>(p) * os.plane();
    for (int y = 0; y < os.h; ++y) {
      for (int xx = 0; xx < os.w; ++xx) {
        out[ob + static_cast<std::size_t>(y) * os.w + xx] =
            xv[ib + static_cast<std::size_t>(y / 2) * xs.w + xx / 2];
      }
    }
  }
  return finish(make_node(os, std::move(out)), {x.node()}, [xs, os](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (int p = 0; p < xs.n * xs.c; ++p) {
      const std::size_t ib = static_cast<std::size_t>(p) * xs.plane();
      const std::size_t ob = static_cast<std::size_t>(p) * os.plane();
      for (int y = 0; y < os.h; ++y) {
        for (int xx = 0; xx < os.w; ++xx) {
          g[ib + static_cast<std::size_t>(y / 2) * xs.w + xx / 2] +=
              self.grad[ob + static_cast<std::size_t>(y) * os.w + xx];
        }
      }
    }
  });
}

Var concat_channels(const Var& a, const Var& b) {
  require_defined(a, "concat_channels");
  require_defined(b, "concat_channels");
  const Shape as = a.shape();
  const Shape bs = b.shape();
  if (as.n != bs.n || as.h != bs.h || as.w != bs.w) {
    throw ShapeError("concat_channels: " + as.str() + " vs " + bs.str());
  }
  const Shape os{as.n, as.c + bs.c, as.h, as.w};
  const std::size_t plane = as.plane();
  std::vector<double> out(os.numel());
  for (int n = 0; n < as.n; ++n) {
    const auto asrc = a.value().subspan(static_cast<std::size_t>(n) * as.c * plane, as.c * plane);
    const auto bsrc = b.value().subspan(static_cast<std::size_t>(n) * bs.c * plane, bs.c * plane);
    auto dst = out.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(n) * os.c * plane);
    dst = std::copy(asrc.begin(), asrc.end(), dst);
    std::copy(bsrc.begin(), bsrc.end(), dst);
  }
  return finish(make_node(os, std::move(out)), {a.node(), b.node()}, [as, bs, plane](Node& self) {
    const int oc = as.c + bs.c;
    for (int n = 0; n < as.n; ++n) {
      const double* g = self.grad.data() + static_cast<std::size_t>(n) * oc * plane;
      if (self.inputs[0]->requires_grad) {
        auto& ga = self.inputs[0]->grad_buffer();
        double* dst = ga.data() + static_cast<std::size_t>(n) * as.c * plane;
        for (std::size_t i = 0; i < as.c * plane; ++i) dst[i] += g[i];
      }
      if (self.inputs[1]->requires_grad) {
        auto& gb = self.inputs[1]->grad_buffer();
        double* dst = gb.data() + static_cast<std::size_t>(n) * bs.c * plane;
        const double* gsrc = g + as.c * plane;
        for (std::size_t i = 0; i < bs.c * plane; ++i) dst[i] += gsrc[i];
      }
    }
  });
}

Var slice_channels(const Var& x, int begin, int count) {
  require_defined(x, "slice_channels");
  const Shape xs = x.shape();
  if (begin < 0 || count < 1 || begin + count > xs.c) {
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + xs.str());
  }
  const Shape os{xs.n, count, xs.h, xs.w};
  const std::size_t plane = xs.plane();
  std::vector<double> out(os.numel());
  for (int n = 0; n < xs.n; ++n) {
    const auto src = x.value().subspan((static_cast<std::size_t>(n) * xs.c + begin) * plane,
                                       count * plane);
    std::copy(src.begin(), src.end(),
              out.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(n) * count * plane));
  }
  return finish(make_node(os, std::move(out)), {x.node()}, [xs, begin, count, plane](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (int n = 0; n < xs.n; ++n) {
      double* dst = g.data() + (static_cast<std::size_t>(n) * xs.c + begin) * plane;
      const double* src = self.grad.data() + static_cast<std::size_t>(n) * count * plane;
      for (std::size_t i = 0; i < count * plane; ++i) dst[i] += src[i];
    }
  });
}

}  // namespace ccdf

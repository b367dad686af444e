// Copyright 2026 The MMX Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mmx/tensor.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmx/error.h"

namespace mmx::nn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

std::string to_string(const Shape& s) {
  return "[" + std::to_string(s.rows) + "x" + std::to_string(s.cols) + "]";
}

// --- parameters ---------------------------------------------------------------

Parameter& ParameterStore::add(const std::string& name, Shape shape, bool frozen,
                               std::uint64_t seed) {
  if (index_.count(name)) throw Error("duplicate parameter '" + name + "'");
  if (shape.size() == 0) throw ShapeError("parameter '" + name + "' has an empty shape");
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->shape = shape;
  p->value.assign(shape.size(), 0.0);
  p->frozen = frozen;
  p->seed = seed;
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParameterStore::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

Parameter& ParameterStore::get(const std::string& name) {
  if (auto* p = find(name)) return *p;
  throw Error("no parameter '" + name + "'");
}

const Parameter& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("no parameter '" + name + "'");
  return *params_[it->second];
}

std::vector<Parameter*> ParameterStore::trainable() {
  std::vector<Parameter*> out;
  for (auto& p : params_)
    if (!p->frozen) out.push_back(p.get());
  return out;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->grad.clear();
}

void init_uniform(Parameter& p, double bound, std::uint64_t seed) {
  CounterRng rng(seed);
  for (auto& v : p.value) v = rng.uniform(-bound, bound);
  p.seed = seed;
}

// --- graph ---------------------------------------------------------------------

struct Node {
  Graph* graph = nullptr;
  Shape shape;
  std::vector<double> value;
  Parameter* param = nullptr;
  std::vector<double> grad;
  bool requires_grad = false;
  bool tracked = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  ~Node() {
    if (tracked) graph->release(shape.size());
  }

  const double* v() const { return param ? param->value.data() : value.data(); }

  // Lazily allocated gradient accumulator; null when no gradient flows here.
  double* g() {
    if (!requires_grad) return nullptr;
    if (grad.empty()) grad.assign(shape.size(), 0.0);
    return grad.data();
  }
};

const Shape& Var::shape() const { return node_->shape; }

std::span<const double> Var::data() const { return {node_->v(), node_->shape.size()}; }

double Var::item() const {
  if (node_->shape.size() != 1) throw ShapeError("item() on " + to_string(node_->shape));
  return node_->v()[0];
}

std::span<const double> Var::grad() const { return node_->grad; }

bool Var::requires_grad() const { return node_->requires_grad; }

Graph& Var::graph() const { return *node_->graph; }

Graph::Graph(GraphOptions options) : options_(options) {}

Graph::~Graph() {
  param_nodes_.clear();
  tape_.clear();
}

void Graph::push_scope(const std::string& name) {
  scope_marks_.push_back(scope_.size());
  if (!scope_.empty()) scope_ += '/';
  scope_ += name;
}

void Graph::pop_scope() {
  if (scope_marks_.empty()) return;
  scope_.resize(scope_marks_.back());
  scope_marks_.pop_back();
}

void Graph::track(const char* op, std::size_t elements) {
  live_ += elements;
  total_ += elements;
  peak_ = std::max(peak_, live_);
  if (options_.retain) buffers_.push_back(BufferRecord{op, scope_, elements});
}

namespace {

void finalize_values(const GraphOptions& opt, const char* op, std::vector<double>& values) {
  for (auto& x : values) {
    if (opt.precision == Precision::kFloat32) x = static_cast<double>(static_cast<float>(x));
    if (!std::isfinite(x)) throw NumericFault(std::string(op) + ": non-finite output");
  }
}

}  // namespace

Var make_op(Graph& g, const char* op, Shape shape, std::vector<double> values,
            std::vector<Var> inputs, std::function<void(Node&)> backward) {
  if (values.size() != shape.size()) throw ShapeError(std::string(op) + ": internal size mismatch");
  finalize_values(g.options_, op, values);
  auto node = std::make_shared<Node>();
  node->graph = &g;
  node->shape = shape;
  node->value = std::move(values);
  node->tracked = true;
  g.track(op, shape.size());
  bool needs = false;
  if (g.options_.record)
    for (const auto& in : inputs) needs = needs || in.node_->requires_grad;
  node->requires_grad = needs;
  if (needs) {
    for (auto& in : inputs) node->parents.push_back(in.node_);
    node->backward = std::move(backward);
  }
  if (needs || g.options_.retain) g.tape_.push_back(node);
  return Var(node);
}

Var Graph::constant(Shape shape, std::vector<double> values) {
  if (values.size() != shape.size())
    throw ShapeError("constant: " + std::to_string(values.size()) + " values for " + to_string(shape));
  return make_op(*this, "constant", shape, std::move(values), {}, nullptr);
}

Var Graph::param(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var(it->second);
  auto node = std::make_shared<Node>();
  node->graph = this;
  node->shape = p.shape;
  node->param = &p;
  node->requires_grad = options_.record && !p.frozen;
  param_nodes_[&p] = node;
  return Var(node);
}

void Graph::backward(const Var& loss) {
  if (!options_.record) throw Error("backward on a graph that does not record");
  if (loss.shape().size() != 1) throw ShapeError("backward needs a scalar loss, got " + to_string(loss.shape()));
  if (!loss.node_->requires_grad) return;
  loss.node_->g()[0] += 1.0;
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
    Node& n = **it;
    if (n.backward && !n.grad.empty()) n.backward(n);
  }
  for (auto& [param, node] : param_nodes_) {
    if (!node->requires_grad || node->grad.empty()) continue;
    if (param->grad.empty()) param->grad.assign(param->size(), 0.0);
    for (std::size_t i = 0; i < param->size(); ++i) param->grad[i] += node->grad[i];
  }
}

// --- ops ---------------------------------------------------------------------------

namespace {

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a) + " and " + to_string(b));
}

void check_same_graph(const char* op, const Var& a, const Var& b) {
  if (&a.graph() != &b.graph()) throw Error(std::string(op) + ": operands belong to different graphs");
}

bool broadcastable(const Shape& a, const Shape& b) {
  return (b.rows == a.rows || b.rows == 1) && (b.cols == a.cols || b.cols == 1);
}

template <typename Fwd, typename GradA, typename GradB>
Var binary(const char* op, const Var& a, const Var& b, Fwd fwd, GradA da, GradB db) {
  check_same_graph(op, a, b);
  const Shape sa = a.shape(), sb = b.shape();
  if (!broadcastable(sa, sb)) shape_fail(op, sa, sb);
  const bool rb = sb.rows == 1, cb = sb.cols == 1;
  auto bidx = [=](std::size_t r, std::size_t c) { return (rb ? 0 : r) * sb.cols + (cb ? 0 : c); };
  std::vector<double> out(sa.size());
  auto av = a.data(), bv = b.data();
  for (std::size_t r = 0; r < sa.rows; ++r)
    for (std::size_t c = 0; c < sa.cols; ++c)
      out[r * sa.cols + c] = fwd(av[r * sa.cols + c], bv[bidx(r, c)]);
  return make_op(a.graph(), op, sa, std::move(out), {a, b}, [=](Node& self) {
    Node& na = *self.parents[0];
    Node& nb = *self.parents[1];
    double* ga = na.g();
    double* gb = nb.g();
    const double* x = na.v();
    const double* y = nb.v();
    for (std::size_t r = 0; r < sa.rows; ++r)
      for (std::size_t c = 0; c < sa.cols; ++c) {
        const std::size_t i = r * sa.cols + c, j = bidx(r, c);
        const double gout = self.grad[i];
        if (ga) ga[i] += da(gout, x[i], y[j], self.value[i]);
        if (gb) gb[j] += db(gout, x[i], y[j], self.value[i]);
      }
  });
}

template <typename Fwd, typename Grad>
Var unary(const char* op, const Var& a, Fwd fwd, Grad grad) {
  auto av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  return make_op(a.graph(), op, a.shape(), std::move(out), {a}, [=](Node& self) {
    Node& na = *self.parents[0];
    double* ga = na.g();
    const double* x = na.v();
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * grad(x[i], self.value[i]);
  });
}

void check_axis(const char* op, int axis) {
  if (axis != 0 && axis != 1) throw ShapeError(std::string(op) + ": axis must be 0 or 1");
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  check_same_graph("matmul", a, b);
  const Shape sa = a.shape(), sb = b.shape();
  if (sa.cols != sb.rows) shape_fail("matmul", sa, sb);
  const Shape so{sa.rows, sb.cols};
  std::vector<double> out(so.size());
  MutMap(out.data(), so.rows, so.cols).noalias() =
      ConstMap(a.data().data(), sa.rows, sa.cols) * ConstMap(b.data().data(), sb.rows, sb.cols);
  return make_op(a.graph(), "matmul", so, std::move(out), {a, b}, [=](Node& self) {
    Node& na = *self.parents[0];
    Node& nb = *self.parents[1];
    ConstMap gout(self.grad.data(), so.rows, so.cols);
    if (double* ga = na.g())
      MutMap(ga, sa.rows, sa.cols).noalias() += gout * ConstMap(nb.v(), sb.rows, sb.cols).transpose();
    if (double* gb = nb.g())
      MutMap(gb, sb.rows, sb.cols).noalias() += ConstMap(na.v(), sa.rows, sa.cols).transpose() * gout;
  });
}

Var matmul_nt(const Var& a, const Var& b, double s) {
  check_same_graph("matmul_nt", a, b);
  const Shape sa = a.shape(), sb = b.shape();
  if (sa.cols != sb.cols) shape_fail("matmul_nt", sa, sb);
  const Shape so{sa.rows, sb.rows};
  std::vector<double> out(so.size());
  MutMap(out.data(), so.rows, so.cols).noalias() =
      s * (ConstMap(a.data().data(), sa.rows, sa.cols) *
           ConstMap(b.data().data(), sb.rows, sb.cols).transpose());
  return make_op(a.graph(), "matmul_nt", so, std::move(out), {a, b}, [=](Node& self) {
    Node& na = *self.parents[0];
    Node& nb = *self.parents[1];
    ConstMap gout(self.grad.data(), so.rows, so.cols);
    if (double* ga = na.g())
      MutMap(ga, sa.rows, sa.cols).noalias() += s * (gout * ConstMap(nb.v(), sb.rows, sb.cols));
    if (double* gb = nb.g())
      MutMap(gb, sb.rows, sb.cols).noalias() +=
          s * (gout.transpose() * ConstMap(na.v(), sa.rows, sa.cols));
  });
}

Var add(const Var& a, const Var& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double g, double, double, double) { return g; },
      [](double g, double, double, double) { return g; });
}

Var sub(const Var& a, const Var& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double g, double, double, double) { return g; },
      [](double g, double, double, double) { return -g; });
}

Var mul(const Var& a, const Var& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double g, double, double y, double) { return g * y; },
      [](double g, double x, double, double) { return g * x; });
}

Var div(const Var& a, const Var& b) {
  return binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double g, double, double y, double) { return g / y; },
      [](double g, double, double y, double out) { return -g * out / y; });
}

Var scale(const Var& a, double s) {
  return unary(
      "scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var tanh(const Var& a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var exp(const Var& a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var gelu(const Var& a) {
  constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double c = 0.044715;
  return unary(
      "gelu", a,
      [](double x) { return 0.5 * x * (1.0 + std::tanh(k * (x + c * x * x * x))); },
      [](double x, double) {
        const double t = std::tanh(k * (x + c * x * x * x));
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * k * (1.0 + 3.0 * c * x * x);
      });
}

Var transpose(const Var& a) {
  const Shape sa = a.shape();
  std::vector<double> out(sa.size());
  auto av = a.data();
  for (std::size_t r = 0; r < sa.rows; ++r)
    for (std::size_t c = 0; c < sa.cols; ++c) out[c * sa.rows + r] = av[r * sa.cols + c];
  return make_op(a.graph(), "transpose", {sa.cols, sa.rows}, std::move(out), {a}, [=](Node& self) {
    double* ga = self.parents[0]->g();
    for (std::size_t r = 0; r < sa.rows; ++r)
      for (std::size_t c = 0; c < sa.cols; ++c) ga[r * sa.cols + c] += self.grad[c * sa.rows + r];
  });
}

Var concat(const std::vector<Var>& parts, int axis) {
  check_axis("concat", axis);
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Shape so = parts[0].shape();
  for (std::size_t i = 1; i < parts.size(); ++i) {
    check_same_graph("concat", parts[0], parts[i]);
    const Shape& s = parts[i].shape();
    if (axis == 0 ? s.cols != so.cols : s.rows != so.rows) shape_fail("concat", so, s);
    (axis == 0 ? so.rows : so.cols) += axis == 0 ? s.rows : s.cols;
  }
  std::vector<double> out(so.size());
  std::vector<Shape> shapes;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const Shape s = p.shape();
    shapes.push_back(s);
    auto pv = p.data();
    for (std::size_t r = 0; r < s.rows; ++r)
      for (std::size_t c = 0; c < s.cols; ++c) {
        const std::size_t orow = axis == 0 ? offset + r : r;
        const std::size_t ocol = axis == 0 ? c : offset + c;
        out[orow * so.cols + ocol] = pv[r * s.cols + c];
      }
    offset += axis == 0 ? s.rows : s.cols;
  }
  return make_op(parts[0].graph(), "concat", so, std::move(out), parts, [=](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < shapes.size(); ++k) {
      const Shape s = shapes[k];
      if (double* gp = self.parents[k]->g())
        for (std::size_t r = 0; r < s.rows; ++r)
          for (std::size_t c = 0; c < s.cols; ++c) {
            const std::size_t orow = axis == 0 ? off + r : r;
            const std::size_t ocol = axis == 0 ? c : off + c;
            gp[r * s.cols + c] += self.grad[orow * so.cols + ocol];
          }
      off += axis == 0 ? s.rows : s.cols;
    }
  });
}

Var slice(const Var& a, int axis, std::size_t begin, std::size_t end) {
  check_axis("slice", axis);
  const Shape sa = a.shape();
  const std::size_t extent = axis == 0 ? sa.rows : sa.cols;
  if (begin >= end || end > extent)
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of bounds for " + to_string(sa));
  const Shape so = axis == 0 ? Shape{end - begin, sa.cols} : Shape{sa.rows, end - begin};
  std::vector<double> out(so.size());
  auto av = a.data();
  for (std::size_t r = 0; r < so.rows; ++r)
    for (std::size_t c = 0; c < so.cols; ++c)
      out[r * so.cols + c] = axis == 0 ? av[(begin + r) * sa.cols + c] : av[r * sa.cols + begin + c];
  return make_op(a.graph(), "slice", so, std::move(out), {a}, [=](Node& self) {
    double* ga = self.parents[0]->g();
    for (std::size_t r = 0; r < so.rows; ++r)
      for (std::size_t c = 0; c < so.cols; ++c) {
        const std::size_t i = axis == 0 ? (begin + r) * sa.cols + c : r * sa.cols + begin + c;
        ga[i] += self.grad[r * so.cols + c];
      }
  });
}

namespace {

// Visits the reduction groups of a 2-D buffer: along axis 1 each row is a
// group, along axis 0 each column.
struct Groups {
  Shape s;
  int axis;
  std::size_t count() const { return axis == 1 ? s.rows : s.cols; }
  std::size_t length() const { return axis == 1 ? s.cols : s.rows; }
  std::size_t index(std::size_t group, std::size_t k) const {
    return axis == 1 ? group * s.cols + k : k * s.cols + group;
  }
};

}  // namespace

Var softmax(const Var& a, int axis) {
  check_axis("softmax", axis);
  const Groups gr{a.shape(), axis};
  auto av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t g = 0; g < gr.count(); ++g) {
    double m = -INFINITY;
    for (std::size_t k = 0; k < gr.length(); ++k) m = std::max(m, av[gr.index(g, k)]);
    double z = 0;
    for (std::size_t k = 0; k < gr.length(); ++k) {
      const std::size_t i = gr.index(g, k);
      out[i] = std::exp(av[i] - m);
      z += out[i];
    }
    for (std::size_t k = 0; k < gr.length(); ++k) out[gr.index(g, k)] /= z;
  }
  return make_op(a.graph(), "softmax", a.shape(), std::move(out), {a}, [=](Node& self) {
    double* ga = self.parents[0]->g();
    for (std::size_t g = 0; g < gr.count(); ++g) {
      double dot = 0;
      for (std::size_t k = 0; k < gr.length(); ++k) {
        const std::size_t i = gr.index(g, k);
        dot += self.grad[i] * self.value[i];
      }
      for (std::size_t k = 0; k < gr.length(); ++k) {
        const std::size_t i = gr.index(g, k);
        ga[i] += self.value[i] * (self.grad[i] - dot);
      }
    }
  });
}

Var logsumexp(const Var& a, int axis) {
  check_axis("logsumexp", axis);
  const Groups gr{a.shape(), axis};
  const Shape so = axis == 1 ? Shape{a.rows(), 1} : Shape{1, a.cols()};
  auto av = a.data();
  std::vector<double> out(gr.count());
  for (std::size_t g = 0; g < gr.count(); ++g) {
    double m = -INFINITY;
    for (std::size_t k = 0; k < gr.length(); ++k) m = std::max(m, av[gr.index(g, k)]);
    double z = 0;
    for (std::size_t k = 0; k < gr.length(); ++k) z += std::exp(av[gr.index(g, k)] - m);
    out[g] = m + std::log(z);
  }
  return make_op(a.graph(), "logsumexp", so, std::move(out), {a}, [=](Node& self) {
    Node& na = *self.parents[0];
    double* ga = na.g();
    const double* x = na.v();
    for (std::size_t g = 0; g < gr.count(); ++g)
      for (std::size_t k = 0; k < gr.length(); ++k) {
        const std::size_t i = gr.index(g, k);
        ga[i] += self.grad[g] * std::exp(x[i] - self.value[g]);
      }
  });
}

Var reduce_max(const Var& a, int axis) {
  check_axis("reduce_max", axis);
  const Groups gr{a.shape(), axis};
  const Shape so = axis == 1 ? Shape{a.rows(), 1} : Shape{1, a.cols()};
  auto av = a.data();
  std::vector<std::size_t> arg(gr.count());
  std::vector<double> out(gr.count());
  for (std::size_t g = 0; g < gr.count(); ++g) {
    std::size_t best = gr.index(g, 0);
    for (std::size_t k = 1; k < gr.length(); ++k)
      if (av[gr.index(g, k)] > av[best]) best = gr.index(g, k);
    arg[g] = best;
    out[g] = av[best];
  }
  return make_op(a.graph(), "reduce_max", so, std::move(out), {a}, [=](Node& self) {
    double* ga = self.parents[0]->g();
    for (std::size_t g = 0; g < arg.size(); ++g) ga[arg[g]] += self.grad[g];
  });
}

Var sum(const Var& a) {
  auto av = a.data();
  std::vector<double> out{std::accumulate(av.begin(), av.end(), 0.0)};
  return make_op(a.graph(), "sum", {1, 1}, std::move(out), {a}, [](Node& self) {
    double* ga = self.parents[0]->g();
    const std::size_t n = self.parents[0]->shape.size();
    for (std::size_t i = 0; i < n; ++i) ga[i] += self.grad[0];
  });
}

Var clamp_min(const Var& a, double lo) {
  return unary(
      "clamp_min", a, [lo](double x) { return x > lo ? x : lo; },
      [lo](double x, double) { return x > lo ? 1.0 : 0.0; });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  check_same_graph("layer_norm", x, gain);
  check_same_graph("layer_norm", x, bias);
  const Shape sx = x.shape();
  const Shape row{1, sx.cols};
  if (!(gain.shape() == row)) shape_fail("layer_norm", sx, gain.shape());
  if (!(bias.shape() == row)) shape_fail("layer_norm", sx, bias.shape());
  auto xv = x.data(), gv = gain.data(), bv = bias.data();
  std::vector<double> out(sx.size());
  const double n = static_cast<double>(sx.cols);
  for (std::size_t r = 0; r < sx.rows; ++r) {
    const double* xr = xv.data() + r * sx.cols;
    double mean = 0;
    for (std::size_t c = 0; c < sx.cols; ++c) mean += xr[c];
    mean /= n;
    double var = 0;
    for (std::size_t c = 0; c < sx.cols; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < sx.cols; ++c)
      out[r * sx.cols + c] = gv[c] * (xr[c] - mean) * inv + bv[c];
  }
  return make_op(x.graph(), "layer_norm", sx, std::move(out), {x, gain, bias}, [=](Node& self) {
    Node& nx = *self.parents[0];
    Node& ng = *self.parents[1];
    Node& nb = *self.parents[2];
    double* gx = nx.g();
    double* gg = ng.g();
    double* gb = nb.g();
    const double* g = ng.v();
    std::vector<double> xhat(sx.cols), dxhat(sx.cols);
    for (std::size_t r = 0; r < sx.rows; ++r) {
      const double* xr = nx.v() + r * sx.cols;
      const double* dy = self.grad.data() + r * sx.cols;
      double mean = 0;
      for (std::size_t c = 0; c < sx.cols; ++c) mean += xr[c];
      mean /= n;
      double var = 0;
      for (std::size_t c = 0; c < sx.cols; ++c) var += (xr[c] - mean) * (xr[c] - mean);
      var /= n;
      const double inv = 1.0 / std::sqrt(var + eps);
      double mean_d = 0, mean_dx = 0;
      for (std::size_t c = 0; c < sx.cols; ++c) {
        xhat[c] = (xr[c] - mean) * inv;
        dxhat[c] = dy[c] * g[c];
        mean_d += dxhat[c];
        mean_dx += dxhat[c] * xhat[c];
        if (gg) gg[c] += dy[c] * xhat[c];
        if (gb) gb[c] += dy[c];
      }
      mean_d /= n;
      mean_dx /= n;
      if (gx)
        for (std::size_t c = 0; c < sx.cols; ++c)
          gx[r * sx.cols + c] += inv * (dxhat[c] - mean_d - xhat[c] * mean_dx);
    }
  });
}

Var embedding_gather(const Var& table, const std::vector<std::size_t>& ids) {
  const Shape st = table.shape();
  if (ids.empty()) throw ShapeError("embedding_gather: no ids");
  for (auto id : ids)
    if (id >= st.rows)
      throw ShapeError("embedding_gather: id " + std::to_string(id) + " out of range for " + to_string(st));
  const Shape so{ids.size(), st.cols};
  std::vector<double> out(so.size());
  auto tv = table.data();
  for (std::size_t r = 0; r < ids.size(); ++r)
    std::copy_n(tv.data() + ids[r] * st.cols, st.cols, out.data() + r * st.cols);
  return make_op(table.graph(), "embedding_gather", so, std::move(out), {table}, [=](Node& self) {
    double* gt = self.parents[0]->g();
    for (std::size_t r = 0; r < ids.size(); ++r)
      for (std::size_t c = 0; c < st.cols; ++c) gt[ids[r] * st.cols + c] += self.grad[r * st.cols + c];
  });
}

Var unfold_rows(const Var& x, std::size_t width, std::size_t pad_left) {
  if (width == 0) throw ShapeError("unfold_rows: width must be positive");
  const Shape sx = x.shape();
  const Shape so{sx.rows, width * sx.cols};
  auto src = [=](std::size_t i, std::size_t k) -> long {
    const long r = static_cast<long>(i + k) - static_cast<long>(pad_left);
    return (r < 0 || r >= static_cast<long>(sx.rows)) ? -1 : r;
  };
  std::vector<double> out(so.size(), 0.0);
  auto xv = x.data();
  for (std::size_t i = 0; i < sx.rows; ++i)
    for (std::size_t k = 0; k < width; ++k)
      if (long r = src(i, k); r >= 0)
        std::copy_n(xv.data() + r * sx.cols, sx.cols, out.data() + i * so.cols + k * sx.cols);
  return make_op(x.graph(), "unfold_rows", so, std::move(out), {x}, [=](Node& self) {
    double* gx = self.parents[0]->g();
    for (std::size_t i = 0; i < sx.rows; ++i)
      for (std::size_t k = 0; k < width; ++k)
        if (long r = src(i, k); r >= 0)
          for (std::size_t c = 0; c < sx.cols; ++c)
            gx[r * sx.cols + c] += self.grad[i * so.cols + k * sx.cols + c];
  });
}

Var scaled_dot_attention(const Var& q, const Var& k, const Var& v, const Var* mask, double s) {
  Var scores = matmul_nt(q, k, s);
  if (mask) scores = add(scores, *mask);
  return matmul(softmax(scores, 1), v);
}

// --- training helpers ---------------------------------------------------------------

void sgd_step(const std::vector<Parameter*>& params, double lr) {
  for (Parameter* p : params) {
    if (p->frozen || p->grad.empty()) continue;
    for (std::size_t i = 0; i < p->size(); ++i) p->value[i] -= lr * p->grad[i];
  }
}

double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm) {
  double sq = 0;
  for (const Parameter* p : params)
    if (!p->frozen)
      for (double g : p->grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    const double f = max_norm / norm;
    for (Parameter* p : params)
      if (!p->frozen)
        for (double& g : p->grad) g *= f;
  }
  return norm;
}

GradCheckResult grad_check(const std::function<Var(Graph&)>& loss_fn,
                           const std::vector<Parameter*>& params, double eps,
                           std::size_t max_coords, std::uint64_t seed) {
  for (Parameter* p : params) p->grad.clear();
  {
    Graph g;
    Var loss = loss_fn(g);
    g.backward(loss);
  }
  std::vector<std::pair<Parameter*, std::size_t>> coords;
  for (Parameter* p : params)
    if (!p->frozen)
      for (std::size_t i = 0; i < p->size(); ++i) coords.emplace_back(p, i);
  if (coords.size() > max_coords) {
    // Partial Fisher-Yates: the first max_coords entries become the sample.
    CounterRng rng(seed);
    for (std::size_t i = 0; i < max_coords; ++i) {
      const std::size_t j = i + rng.below(coords.size() - i);
      std::swap(coords[i], coords[j]);
    }
    coords.resize(max_coords);
  }
  auto eval = [&] {
    Graph g(GraphOptions{.record = false, .retain = false});
    return loss_fn(g).item();
  };
  GradCheckResult result;
  for (auto [p, i] : coords) {
    const double analytic = p->grad.empty() ? 0.0 : p->grad[i];
    const double saved = p->value[i];
    p->value[i] = saved + eps;
    const double up = eval();
    p->value[i] = saved - eps;
    const double down = eval();
    p->value[i] = saved;
    const double numeric = (up - down) / (2 * eps);
    const double rel = std::abs(analytic - numeric) / std::max(kGradCheckFloor, std::abs(analytic) + std::abs(numeric));
    if (rel > result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_parameter = p->name + "[" + std::to_string(i) + "]";
    }
    ++result.coordinates;
  }
  return result;
}

}  // namespace mmx::nn

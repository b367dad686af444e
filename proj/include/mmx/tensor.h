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

#ifndef MMX_TENSOR_H_
#define MMX_TENSOR_H_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mmx/rng.h"

// Minimal dense compute core. Every value is a 2-D row-major matrix (vectors
// are 1 x n). Ops run eagerly and, when recording, push a backward rule onto
// the owning Graph's tape.
namespace mmx::nn {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

enum class Precision { kFloat64, kFloat32 };

// A named trainable (or frozen) matrix that outlives graphs.
struct Parameter {
  std::string name;
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until the first backward touches it
  bool frozen = false;
  std::uint64_t seed = 0;

  std::size_t size() const { return value.size(); }
};

// Owns parameters in registration order; addresses are stable.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, Shape shape, bool frozen = false, std::uint64_t seed = 0);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  Parameter* find(const std::string& name);
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  std::vector<Parameter*> trainable();
  void zero_grad();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Fills with uniform(-bound, bound) from `rng` and records the seed.
void init_uniform(Parameter& p, double bound, std::uint64_t seed);

class Graph;
struct Node;

class Var {
 public:
  Var() = default;

  const Shape& shape() const;
  std::size_t rows() const { return shape().rows; }
  std::size_t cols() const { return shape().cols; }
  std::span<const double> data() const;
  double at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }
  double item() const;
  // Empty when no gradient reached this value.
  std::span<const double> grad() const;
  bool requires_grad() const;
  Graph& graph() const;
  bool valid() const { return node_ != nullptr; }

 private:
  friend class Graph;
  friend Var make_op(Graph&, const char*, Shape, std::vector<double>, std::vector<Var>,
                     std::function<void(Node&)>);
  explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  std::shared_ptr<Node> node_;
};

struct GraphOptions {
  // Keep backward rules; off for pure inference.
  bool record = true;
  // Keep every buffer alive until the graph dies (training and memory
  // accounting). Off lets buffers die with their last handle.
  bool retain = true;
  Precision precision = Precision::kFloat64;
};

// One materialized activation buffer.
struct BufferRecord {
  std::string op;
  std::string scope;
  std::size_t elements;
};

class Graph {
 public:
  explicit Graph(GraphOptions options = {});
  ~Graph();
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  const GraphOptions& options() const { return options_; }

  Var constant(Shape shape, std::vector<double> values);
  Var param(Parameter& p);

  // Reverse sweep from a 1 x 1 loss; accumulates into Parameter::grad of
  // every unfrozen parameter reached.
  void backward(const Var& loss);

  // Activation accounting in elements (parameters are not activations).
  std::size_t live_elements() const { return live_; }
  std::size_t peak_elements() const { return peak_; }
  std::size_t total_elements() const { return total_; }
  // Populated only when retaining.
  const std::vector<BufferRecord>& buffers() const { return buffers_; }

  void push_scope(const std::string& name);
  void pop_scope();
  const std::string& scope() const { return scope_; }

 private:
  friend struct Node;
  friend Var make_op(Graph&, const char*, Shape, std::vector<double>, std::vector<Var>,
                     std::function<void(Node&)>);
  void track(const char* op, std::size_t elements);
  void release(std::size_t elements) { live_ -= elements; }

  GraphOptions options_;
  std::vector<std::shared_ptr<Node>> tape_;
  std::unordered_map<Parameter*, std::shared_ptr<Node>> param_nodes_;
  std::vector<BufferRecord> buffers_;
  std::vector<std::size_t> scope_marks_;
  std::string scope_;
  std::size_t live_ = 0, peak_ = 0, total_ = 0;
};

class ScopeGuard {
 public:
  ScopeGuard(Graph& g, const std::string& name) : g_(g) { g_.push_scope(name); }
  ~ScopeGuard() { g_.pop_scope(); }
  ScopeGuard(const ScopeGuard&) = delete;
  ScopeGuard& operator=(const ScopeGuard&) = delete;

 private:
  Graph& g_;
};

// --- ops ------------------------------------------------------------------
// Binary elementwise ops broadcast `b` when a dimension of b is 1.

Var matmul(const Var& a, const Var& b);
// scale * a * b^T
Var matmul_nt(const Var& a, const Var& b, double scale = 1.0);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var transpose(const Var& a);
Var concat(const std::vector<Var>& parts, int axis);
Var slice(const Var& a, int axis, std::size_t begin, std::size_t end);
Var tanh(const Var& a);
Var exp(const Var& a);
// tanh approximation of GELU
Var gelu(const Var& a);
Var softmax(const Var& a, int axis);
// axis 1 -> rows x 1, axis 0 -> 1 x cols
Var logsumexp(const Var& a, int axis);
Var reduce_max(const Var& a, int axis);
Var sum(const Var& a);
// max(a, lo) elementwise; gradient passes where a > lo.
Var clamp_min(const Var& a, double lo);
// Normalizes each row, then gain * x + bias; gain/bias are 1 x cols.
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps);
// Rows of `table` at `ids`.
Var embedding_gather(const Var& table, const std::vector<std::size_t>& ids);
// Row i of the output is rows i-pad_left .. i-pad_left+width-1 of x laid side
// by side, zero outside x. Output is rows x (width * cols).
Var unfold_rows(const Var& x, std::size_t width, std::size_t pad_left);

// softmax(q k^T * scale + mask) v, built from primitive ops.
Var scaled_dot_attention(const Var& q, const Var& k, const Var& v, const Var* mask, double scale);

// --- training helpers -------------------------------------------------------

// theta <- theta - lr * grad for unfrozen parameters with a gradient.
void sgd_step(const std::vector<Parameter*>& params, double lr);

// Rescales gradients to global L2 norm <= max_norm. Returns the norm before
// clipping.
double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm);

inline constexpr double kGradCheckFloor = 1e-6;

struct GradCheckResult {
  double max_relative_error = 0;
  std::size_t coordinates = 0;
  std::string worst_parameter;
};

// Central differences on at most `max_coords` sampled coordinates of the
// unfrozen parameters, compared to one reverse sweep. Relative error is
// |a - n| / max(kGradCheckFloor, |a| + |n|). The floor sits above the rounding
// noise of central differences (about 1e-16 * |loss| / eps), so exactly-zero
// gradients are not reported as large relative errors.
GradCheckResult grad_check(const std::function<Var(Graph&)>& loss_fn,
                           const std::vector<Parameter*>& params, double eps = 1e-5,
                           std::size_t max_coords = 200, std::uint64_t seed = 17);

}  // namespace mmx::nn

#endif  // MMX_TENSOR_H_

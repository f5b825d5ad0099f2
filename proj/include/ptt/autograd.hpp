/******************************************************************************
 * Copyright 2026 The PTTrack Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *****************************************************************************/
#ifndef PTT_AUTOGRAD_HPP
#define PTT_AUTOGRAD_HPP

#include <cstdint>
#include <stdexcept>
#include <filesystem>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ptt/tensor.hpp"

namespace ptt {

struct IndexMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int32_t> data;

  IndexMatrix() = default;
  IndexMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0) {}
  std::int32_t& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  std::int32_t at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

/// Named parameter tensors with deterministic iteration order.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    bool trainable = true;
  };

  Tensor& add(const std::string& name, Tensor value, bool trainable = true);
  bool has(const std::string& name) const;
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool trainable(const std::string& name) const;
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Iteration-order-stable checksum of all values, for determinism tests.
  std::uint64_t checksum() const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Checkpoint file: magic + version byte, then (name, shape,
/// little-endian f64 buffer) records. Byte-exact round trip.
void save_checkpoint(const ParamStore& store, const std::filesystem::path& path);
ParamStore load_checkpoint(const std::filesystem::path& path);

struct Value {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Raised when an op produces a non-finite value (the CLI maps this family
/// to its numerical-failure exit code).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reverse-mode tape. Nodes are appended in construction order (ids are a
/// topological order), values are computed eagerly, and backward() walks the
/// tape once in reverse. Each op validates that its result is finite.
class Graph {
 public:
  Value constant(Tensor t);
  Value variable(Tensor t, const std::string& name = "");
  Value param(ParamStore& store, const std::string& name);

  // Elementwise (shapes must match exactly).
  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);
  Value div(Value a, Value b);
  Value scale(Value a, double s);
  Value add_scalar(Value a, double s);
  Value relu(Value a);
  Value sqrt(Value a);

  // Shape manipulation.
  Value reshape(Value a, Shape s);
  Value slice_last(Value a, std::size_t start, std::size_t len);
  Value concat_last(const std::vector<Value>& parts);
  /// [N, C] -> [N, k, C], rows repeated along the inserted middle axis.
  Value expand_mid(Value a, std::size_t k);
  /// [...] -> [..., m], values repeated along the appended last axis.
  Value expand_last(Value a, std::size_t m);

  // Linear maps.
  /// x [..., In] x W [In, Out] + b [Out] -> [..., Out].
  Value linear(Value x, Value w, Value b);
  Value matmul(Value a, Value b);     // [m,p] x [p,n]
  Value matmul_nt(Value a, Value b);  // [m,p] x [n,p]^T -> [m,n]

  /// feats [M, C], idx [N, k] with entries in [0, M) -> [N, k, C].
  /// Gradient scatters additively back to the source rows.
  Value gather_rows(Value feats, const IndexMatrix& idx);

  // Reductions and normalization.
  Value softmax(Value a, std::size_t axis);
  Value sum_axis(Value a, std::size_t axis);
  Value max_axis(Value a, std::size_t axis);
  Value sum_all(Value a);
  Value mean_all(Value a);

  // Loss kernels (elementwise; targets do not receive gradients).
  Value bce_with_logits(Value logits, Value targets);
  Value smooth_l1(Value pred, Value target, double delta = 1.0);

  void backward(Value root);

  const Tensor& value(Value v) const;
  const Tensor& grad(Value v) const;
  bool has_grad(Value v) const;
  /// Gradient accumulated for a named parameter (zeros if it never
  /// received one).
  Tensor grad_of(const std::string& param_name) const;

  std::size_t node_count() const { return nodes_.size(); }

  /// Distance to the nearest non-differentiable kink observed while
  /// building this graph (ReLU zero crossings, max-axis ties, smooth-L1
  /// transitions, and any distances noted by callers). Finite-difference
  /// checks skip evaluations that came this close to a kink.
  double min_kink_distance() const { return min_kink_distance_; }
  void note_kink_distance(double d);

  /// Test hook: scales every ReLU backward rule to simulate a broken
  /// gradient implementation (negative control for grad_check).
  static bool corrupt_relu_backward;

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // empty until backward touches it
    std::vector<int> parents;
    std::function<void(Graph&, int)> backward;
    bool needs_grad = false;
    std::string param_name;
    const char* op = "";
  };

  Value push(Node n, const char* op);
  Node& node(Value v);
  const Node& node(Value v) const;
  Tensor& grad_buffer(int id);
  void check_finite(Value v, const char* op) const;

  std::vector<Node> nodes_;
  std::unordered_map<std::string, int> param_nodes_;
  double min_kink_distance_ = 1e300;

  friend struct GraphAccess;
};

/// linear -> ReLU -> linear.
Value mlp2_relu(Graph& g, Value x, Value w1, Value b1, Value w2, Value b2);

/// Kaiming-style uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Tensor init_linear_weight(std::size_t fan_in, std::size_t fan_out, class Rng& rng);

}  // namespace ptt

#endif  // PTT_AUTOGRAD_HPP

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
#include "ptt/autograd.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "ptt/rng.hpp"

namespace ptt {

bool Graph::corrupt_relu_backward = false;

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                              shape_str(a.shape) + " vs " + shape_str(b.shape));
}

void axis_extents(const Shape& s, std::size_t axis, std::size_t& outer,
                  std::size_t& n, std::size_t& inner) {
  if (axis >= s.size()) {
    throw std::invalid_argument("axis " + std::to_string(axis) +
                                " out of range for shape " + shape_str(s));
  }
  outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  n = s[axis];
  inner = 1;
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
}

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// ParamStore

Tensor& ParamStore::add(const std::string& name, Tensor value, bool trainable) {
  if (has(name)) throw std::invalid_argument("ParamStore: duplicate name '" + name + "'");
  index_[name] = entries_.size();
  entries_.push_back({name, std::move(value), trainable});
  return entries_.back().value;
}

bool ParamStore::has(const std::string& name) const { return index_.count(name) > 0; }

Tensor& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("ParamStore: unknown name '" + name + "'");
  return entries_[it->second].value;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("ParamStore: unknown name '" + name + "'");
  return entries_[it->second].value;
}

bool ParamStore::trainable(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("ParamStore: unknown name '" + name + "'");
  return entries_[it->second].trainable;
}

std::uint64_t ParamStore::checksum() const {
  // FNV-1a over the raw little-endian bytes of every value, in order.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto eat = [&h](const void* p, std::size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const Entry& e : entries_) {
    eat(e.name.data(), e.name.size());
    eat(e.value.data.data(), e.value.data.size() * sizeof(double));
  }
  return h;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

namespace {

constexpr char kCheckpointMagic[7] = {'P', 'T', 'C', 'K', 'P', 'T', 'S'};
constexpr unsigned char kCheckpointVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& os, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  write_u64(os, v);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& is) {
  const std::uint64_t v = read_u64(is);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

}  // namespace

void save_checkpoint(const ParamStore& store, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  os.put(static_cast<char>(kCheckpointVersion));
  write_u64(os, store.size());
  for (const ParamStore::Entry& e : store.entries()) {
    write_u32(os, static_cast<std::uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    os.put(e.trainable ? 1 : 0);
    write_u32(os, static_cast<std::uint32_t>(e.value.rank()));
    for (std::size_t d : e.value.shape) write_u64(os, d);
    for (double v : e.value.data) write_f64(os, v);
  }
  if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

ParamStore load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("load_checkpoint: bad magic in " + path.string());
  }
  const int version = is.get();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("load_checkpoint: unsupported version " + std::to_string(version));
  }
  ParamStore store;
  const std::uint64_t count = read_u64(is);
  for (std::uint64_t r = 0; r < count; ++r) {
    const std::uint32_t name_len = read_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const int trainable = is.get();
    const std::uint32_t rank = read_u32(is);
    Shape shape(rank);
    for (std::uint32_t i = 0; i < rank; ++i) shape[i] = read_u64(is);
    Tensor t = Tensor::zeros(shape);
    for (double& v : t.data) v = read_f64(is);
    if (!is) throw std::runtime_error("load_checkpoint: truncated file " + path.string());
    store.add(name, std::move(t), trainable != 0);
  }
  return store;
}

// ---------------------------------------------------------------------------
// Graph

Value Graph::push(Node n, const char* op) {
  n.op = op;
  nodes_.push_back(std::move(n));
  const Value v{static_cast<int>(nodes_.size()) - 1};
  check_finite(v, op);
  return v;
}

Graph::Node& Graph::node(Value v) { return nodes_.at(static_cast<std::size_t>(v.id)); }
const Graph::Node& Graph::node(Value v) const { return nodes_.at(static_cast<std::size_t>(v.id)); }

Tensor& Graph::grad_buffer(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.data.empty()) n.grad = Tensor::zeros(n.value.shape);
  return n.grad;
}

void Graph::check_finite(Value v, const char* op) const {
  if (!node(v).value.all_finite()) {
    throw NumericalError(std::string("non-finite value produced by op '") + op +
                         "' (node " + std::to_string(v.id) + ")");
  }
}

void Graph::note_kink_distance(double d) {
  min_kink_distance_ = std::min(min_kink_distance_, d);
}

Value Graph::constant(Tensor t) {
  Node n;
  n.value = std::move(t);
  n.needs_grad = false;
  return push(std::move(n), "constant");
}

Value Graph::variable(Tensor t, const std::string& name) {
  Node n;
  n.value = std::move(t);
  n.needs_grad = true;
  n.param_name = name;
  Value v = push(std::move(n), "variable");
  if (!name.empty()) param_nodes_[name] = v.id;
  return v;
}

Value Graph::param(ParamStore& store, const std::string& name) {
  auto it = param_nodes_.find(name);
  if (it != param_nodes_.end()) return Value{it->second};
  Node n;
  n.value = store.at(name);
  n.needs_grad = store.trainable(name);
  n.param_name = name;
  Value v = push(std::move(n), "param");
  param_nodes_[name] = v.id;
  return v;
}

Value Graph::add(Value a, Value b) {
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  if (!ta.same_shape(tb)) shape_error("add", ta, tb);
  Node n;
  n.value = ta;
  for (std::size_t i = 0; i < tb.numel(); ++i) n.value[i] += tb[i];
  n.parents = {a.id, b.id};
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.backward = [a, b](Graph& g, int self) {
    const Tensor& gr = g.nodes_[self].grad;
    if (g.node(a).needs_grad) {
      Tensor& da = g.grad_buffer(a.id);
      for (std::size_t i = 0; i < gr.numel(); ++i) da[i] += gr[i];
    }
    if (g.node(b).needs_grad) {
      Tensor& db = g.grad_buffer(b.id);
      for (std::size_t i = 0; i < gr.numel(); ++i) db[i] += gr[i];
    }
  };
  return push(std::move(n), "add");
}

Value Graph::sub(Value a, Value b) {
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  if (!ta.same_shape(tb)) shape_error("sub", ta, tb);
  Node n;
  n.value = ta;
  for (std::size_t i = 0; i < tb.numel(); ++i) n.value[i] -= tb[i];
  n.parents = {a.id, b.id};
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.backward = [a, b](Graph& g, int self) {
    const Tensor& gr = g.nodes_[self].grad;
    if (g.node(a).needs_grad) {
      Tensor& da = g.grad_buffer(a.id);
      for (std::size_t i = 0; i < gr.numel(); ++i) da[i] += gr[i];
    }
    if (g.node(b).needs_grad) {
      Tensor& db = g.grad_buffer(b.id);
      for (std::size_t i = 0; i < gr.numel(); ++i) db[i] -= gr[i];
    }
  };
  return push(std::move(n), "sub");
}

Value Graph::mul(Value a, Value b) {
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  if (!ta.same_shape(tb)) shape_error("mul", ta, tb);
  Node n;
  n.value = ta;
  for (std::size_t i = 0; i < tb.numel(); ++i) n.value[i] *= tb[i];
  n.parents = {a.id, b.id};
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.backward = [a, b](Graph& g, int self) {
    const Tensor& gr = g.nodes_[self].grad;
    const Tensor& va = g.node(a).value;
    const Tensor& vb = g.node(b).value;
    if (g.node(a).needs_grad) {
      Tensor& da = g.grad_buffer(a.id);
      for (std::size_t i = 0; i < gr.numel(); ++i) da[i] += gr[i] * vb[i];
    }
    if (g.node(b).needs_grad) {
      Tensor& db = g.grad_buffer(b.id);
      for (std::size_t i = 0; i < gr.numel(); ++i) db[i] += gr[i] * va[i];
    }
  };
  return push(std::move(n), "mul");
}

Value Graph::div(Value a, Value b) {
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  if (!ta.same_shape(tb)) shape_error("div", ta, tb);
  Node n;
  n.value = ta;
  for (std::size_t i = 0; i < tb.numel(); ++i) n.value[i] /= tb[i];
  n.parents = {a.id, b.id};
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.backward = [a, b](Graph& g, int self) {
    const Tensor& gr = g.nodes_[self].grad;
    const Tensor& va = g.node(a).value;
    const Tensor& vb = g.node(b).value;
    if (g.node(a).needs_grad) {
      Tensor& da = g.grad_buffer(a.id);
      for (std::size_t i = 0; i < gr.numel(); ++i) da[i] += gr[i] / vb[i];
    }
    if (g.node(b).needs_grad) {
      Tensor& db = g.grad_buffer(b.id);
      for (std::size_t i = 0; i < gr.numel(); ++i) db[i] -= gr[i] * va[i] / (vb[i] * vb[i]);
    }
  };
  return push(std::move(n), "div");
}

Value Graph::scale(Value a, double s) {
  Node n;
  n.value = node(a).value;
  for (double& v : n.value.data) v *= s;
  n.parents = {a.id};
  n.needs_grad = node(a).needs_grad;
  n.backward = [a, s](Graph& g, int self) {
    const Tensor& gr = g.nodes_[self].grad;
    Tensor& da = g.grad_buffer(a.id);
    for (std::size_t i = 0; i < gr.numel(); ++i) da[i] += gr[i] * s;
  };
  return push(std::move(n), "scale");
}

Value Graph::add_scalar(Value a, double s) {
  Node n;
  n.value = node(a).value;
  for (double& v : n.value.data) v += s;
  n.parents = {a.id};
  n.needs_grad = node(a).needs_grad;
  n.backward = [a](Graph& g, int self) {
    const Tensor& gr = g.nodes_[self].grad;
    Tensor& da = g.grad_buffer(a.id);
    for (std::size_t i = 0; i < gr.numel(); ++i) da[i] += gr[i];
  };
  return push(std::move(n), "add_scalar");
}

Value Graph::relu(Value a) {
  const Tensor& ta = node(a).value;
  Node n;
  n.value = ta;
  double nearest = 1e300;
  for (double& v : n.value.data) {
    const double a_v = std::abs(v);
    if (a_v < nearest) nearest = a_v;
    if (v < 0.0) v = 0.0;
  }
  note_kink_distance(nearest);
  n.parents = {a.id};
  n.needs_grad = node(a).needs_grad;
  n.backward = [a](Graph& g, int self) {
    const Tensor& gr = g.nodes_[self].grad;
    const Tensor& va = g.node(a).value;
    Tensor& da = g.grad_buffer(a.id);
    const double k = Graph::corrupt_relu_backward ? 1.5 : 1.0;
    for (std::size_t i = 0; i < gr.numel(); ++i) {
      if (va[i] > 0.0) da[i] += k * gr[i];  // subgradient at 0 is 0
    }
  };
  return push(std::move(n), "relu");
}

Value Graph::sqrt(Value a) {
  const Tensor& ta = node(a).value;
  Node n;
  n.value = ta;
  for (double& v : n.value.data) {
    if (v < 0.0) throw NumericalError("sqrt: negative input");
    v = std::sqrt(v);
  }
  n.parents = {a.id};
  n.needs_grad = node(a).needs_grad;
  n.backward = [a](Graph& g, int self) {
    const Tensor& gr = g.nodes_[self].grad;
    const Tensor& out = g.nodes_[self].value;
    Tensor& da = g.grad_buffer(a.id);
    for (std::size_t i = 0; i < gr.numel(); ++i) da[i] += 0.5 * gr[i] / out[i];
  };
  return push(std::move(n), "sqrt");
}

Value Graph::reshape(Value a, Shape s) {
  const Tensor& ta = node(a).value;
  if (shape_numel(s) != ta.numel()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(ta.shape) +
                                " as " + shape_str(s));
  }
  Node n;
  n.value = Tensor(std::move(s), ta.data);
  n.parents = {a.id};
  n.needs_grad = node(a).needs_grad;
  n.backward = [a](Graph& g, int self) {
    const Tensor& gr = g.nodes_[self].grad;
    Tensor& da = g.grad_buffer(a.id);
    for (std::size_t i = 0; i < gr.numel(); ++i) da[i] += gr[i];
  };
  return push(std::move(n), "reshape");
}

Value Graph::slice_last(Value a, std::size_t start, std::size_t len) {
  const Tensor& ta = node(a).value;
  const std::size_t last = ta.shape.back();
  if (start + len > last) throw std::invalid_argument("slice_last: out of range");
  const std::size_t rows = ta.numel() / last;
  Shape out_shape = ta.shape;
  out_shape.back() = len;
  Node n;
  n.value = Tensor::zeros(out_shape);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < len; ++j) {
      n.value[r * len + j] = ta[r * last + start + j];
    }
  }
  n.parents = {a.id};
  n.needs_grad = node(a).needs_grad;
  n.backward = [a, start, len, last, rows](Graph& g, int self) {
    const Tensor& gr = g.nodes_[self].grad;
    Tensor& da = g.grad_buffer(a.id);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < len; ++j) {
        da[r * last + start + j] += gr[r * len + j];
      }
    }
  };
  return push(std::move(n), "slice_last");
}

Value Graph::concat_last(const std::vector<Value>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_last: no parts");
  const Shape& head = node(parts[0]).value.shape;
  std::size_t total_last = 0;
  bool needs = false;
  for (Value p : parts) {
    const Shape& s = node(p).value.shape;
    if (s.size() != head.size() ||
        !std::equal(s.begin(), s.end() - 1, head.begin())) {
      shape_error("concat_last", node(parts[0]).value, node(p).value);
    }
    total_last += s.back();
    needs = needs || node(p).needs_grad;
  }
  Shape out_shape = head;
  out_shape.back() = total_last;
  const std::size_t rows = shape_numel(out_shape) / total_last;
  Node n;
  n.value = Tensor::zeros(out_shape);
  std::size_t off = 0;
  for (Value p : parts) {
    const Tensor& tp = node(p).value;
    const std::size_t w = tp.shape.back();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < w; ++j) {
        n.value[r * total_last + off + j] = tp[r * w + j];
      }
    }
    off += w;
  }
  for (Value p : parts) n.parents.push_back(p.id);
  n.needs_grad = needs;
  std::vector<Value> ps = parts;
  n.backward = [ps, total_last, rows](Graph& g, int self) {
    const Tensor& gr = g.nodes_[self].grad;
    std::size_t off = 0;
    for (Value p : ps) {
      const std::size_t w = g.node(p).value.shape.back();
      if (g.node(p).needs_grad) {
        Tensor& dp = g.grad_buffer(p.id);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < w; ++j) {
            dp[r * w + j] += gr[r * total_last + off + j];
          }
        }
      }
      off += w;
    }
  };
  return push(std::move(n), "concat_last");
}

Value Graph::expand_mid(Value a, std::size_t k) {
  const Tensor& ta = node(a).value;
  if (ta.rank() != 2) throw std::invalid_argument("expand_mid: expected rank 2, got " + shape_str(ta.shape));
  const std::size_t rows = ta.shape[0];
  const std::size_t c = ta.shape[1];
  Node n;
  n.value = Tensor::zeros({rows, k, c});
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t t = 0; t < c; ++t) n.value.at3(i, j, t) = ta.at2(i, t);
    }
  }
  n.parents = {a.id};
  n.needs_grad = node(a).needs_grad;
  n.backward = [a, rows, k, c](Graph& g, int self) {
    const Tensor& gr = g.nodes_[self].grad;
    Tensor& da = g.grad_buffer(a.id);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t t = 0; t < c; ++t) da.at2(i, t) += gr.at3(i, j, t);
      }
    }
  };
  return push(std::move(n), "expand_mid");
}

Value Graph::expand_last(Value a, std::size_t m) {
  const Tensor& ta = node(a).value;
  Shape out_shape = ta.shape;
  out_shape.push_back(m);
  const std::size_t rows = ta.numel();
  Node n;
  n.value = Tensor::zeros(out_shape);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < m; ++j) n.value[r * m + j] = ta[r];
  }
  n.parents = {a.id};
  n.needs_grad = node(a).needs_grad;
  n.backward = [a, rows, m](Graph& g, int self) {
    const Tensor& gr = g.nodes_[self].grad;
    Tensor& da = g.grad_buffer(a.id);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < m; ++j) da[r] += gr[r * m + j];
    }
  };
  return push(std::move(n), "expand_last");
}

Value Graph::linear(Value x, Value w, Value b) {
  const Tensor& tx = node(x).value;
  const Tensor& tw = node(w).value;
  const Tensor& tb = node(b).value;
  if (tw.rank() != 2 || tb.rank() != 1) {
    throw std::invalid_argument("linear: weight must be rank 2 and bias rank 1, got " +
                                shape_str(tw.shape) + " and " + shape_str(tb.shape));
  }
  const std::size_t in = tw.shape[0];
  const std::size_t out = tw.shape[1];
  if (tx.shape.empty() || tx.shape.back() != in || tb.shape[0] != out) {
    throw std::invalid_argument("linear: dimension mismatch, x " + shape_str(tx.shape) +
                                ", W " + shape_str(tw.shape) + ", b " + shape_str(tb.shape));
  }
  const std::size_t rows = tx.numel() / in;
  Shape out_shape = tx.shape;
  out_shape.back() = out;
  Node n;
  n.value = Tensor::zeros(out_shape);
  for (std::size_t r = 0; r < rows; ++r) {
    double* y = n.value.data.data() + r * out;
    for (std::size_t o = 0; o < out; ++o) y[o] = tb[o];
    const double* xr = tx.data.data() + r * in;
    for (std::size_t i = 0; i < in; ++i) {
      const double xv = xr[i];
      const double* wr = tw.data.data() + i * out;
      for (std::size_t o = 0; o < out; ++o) y[o] += xv * wr[o];
    }
  }
  n.parents = {x.id, w.id, b.id};
  n.needs_grad = node(x).needs_grad || node(w).needs_grad || node(b).needs_grad;
  n.backward = [x, w, b, rows, in, out](Graph& g, int self) {
    const Tensor& gr = g.nodes_[self].grad;
    const Tensor& tx = g.node(x).value;
    const Tensor& tw = g.node(w).value;
    if (g.node(x).needs_grad) {
      Tensor& dx = g.grad_buffer(x.id);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* gy = gr.data.data() + r * out;
        double* dxr = dx.data.data() + r * in;
        for (std::size_t i = 0; i < in; ++i) {
          const double* wr = tw.data.data() + i * out;
          double acc = 0.0;
          for (std::size_t o = 0; o < out; ++o) acc += gy[o] * wr[o];
          dxr[i] += acc;
        }
      }
    }
    if (g.node(w).needs_grad) {
      Tensor& dw = g.grad_buffer(w.id);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* gy = gr.data.data() + r * out;
        const double* xr = tx.data.data() + r * in;
        for (std::size_t i = 0; i < in; ++i) {
          const double xv = xr[i];
          double* dwr = dw.data.data() + i * out;
          for (std::size_t o = 0; o < out; ++o) dwr[o] += xv * gy[o];
        }
      }
    }
    if (g.node(b).needs_grad) {
      Tensor& db = g.grad_buffer(b.id);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* gy = gr.data.data() + r * out;
        for (std::size_t o = 0; o < out; ++o) db[o] += gy[o];
      }
    }
  };
  return push(std::move(n), "linear");
}

Value Graph::matmul(Value a, Value b) {
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  if (ta.rank() != 2 || tb.rank() != 2 || ta.shape[1] != tb.shape[0]) {
    shape_error("matmul", ta, tb);
  }
  const std::size_t m = ta.shape[0], p = ta.shape[1], q = tb.shape[1];
  Node n;
  n.value = Tensor::zeros({m, q});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < p; ++k) {
      const double av = ta.at2(i, k);
      for (std::size_t j = 0; j < q; ++j) n.value.at2(i, j) += av * tb.at2(k, j);
    }
  }
  n.parents = {a.id, b.id};
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.backward = [a, b, m, p, q](Graph& g, int self) {
    const Tensor& gr = g.nodes_[self].grad;
    const Tensor& ta = g.node(a).value;
    const Tensor& tb = g.node(b).value;
    if (g.node(a).needs_grad) {
      Tensor& da = g.grad_buffer(a.id);  // dA = G * B^T
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < q; ++j) {
          const double gv = gr.at2(i, j);
          for (std::size_t k = 0; k < p; ++k) da.at2(i, k) += gv * tb.at2(k, j);
        }
      }
    }
    if (g.node(b).needs_grad) {
      Tensor& db = g.grad_buffer(b.id);  // dB = A^T * G
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t k = 0; k < p; ++k) {
          const double av = ta.at2(i, k);
          for (std::size_t j = 0; j < q; ++j) db.at2(k, j) += av * gr.at2(i, j);
        }
      }
    }
  };
  return push(std::move(n), "matmul");
}

Value Graph::matmul_nt(Value a, Value b) {
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  if (ta.rank() != 2 || tb.rank() != 2 || ta.shape[1] != tb.shape[1]) {
    shape_error("matmul_nt", ta, tb);
  }
  const std::size_t m = ta.shape[0], p = ta.shape[1], q = tb.shape[0];
  Node n;
  n.value = Tensor::zeros({m, q});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < q; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < p; ++k) acc += ta.at2(i, k) * tb.at2(j, k);
      n.value.at2(i, j) = acc;
    }
  }
  n.parents = {a.id, b.id};
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.backward = [a, b, m, p, q](Graph& g, int self) {
    const Tensor& gr = g.nodes_[self].grad;
    const Tensor& ta = g.node(a).value;
    const Tensor& tb = g.node(b).value;
    if (g.node(a).needs_grad) {
      Tensor& da = g.grad_buffer(a.id);  // dA = G * B
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < q; ++j) {
          const double gv = gr.at2(i, j);
          for (std::size_t k = 0; k < p; ++k) da.at2(i, k) += gv * tb.at2(j, k);
        }
      }
    }
    if (g.node(b).needs_grad) {
      Tensor& db = g.grad_buffer(b.id);  // dB = G^T * A
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < q; ++j) {
          const double gv = gr.at2(i, j);
          for (std::size_t k = 0; k < p; ++k) db.at2(j, k) += gv * ta.at2(i, k);
        }
      }
    }
  };
  return push(std::move(n), "matmul_nt");
}

Value Graph::gather_rows(Value feats, const IndexMatrix& idx) {
  const Tensor& tf = node(feats).value;
  if (tf.rank() != 2) {
    throw std::invalid_argument("gather_rows: feats must be rank 2, got " + shape_str(tf.shape));
  }
  const std::size_t m = tf.shape[0];
  const std::size_t c = tf.shape[1];
  for (std::int32_t v : idx.data) {
    if (v < 0 || static_cast<std::size_t>(v) >= m) {
      throw std::invalid_argument("gather_rows: index " + std::to_string(v) +
                                  " out of range [0, " + std::to_string(m) + ")");
    }
  }
  Node n;
  n.value = Tensor::zeros({idx.rows, idx.cols, c});
  for (std::size_t i = 0; i < idx.rows; ++i) {
    for (std::size_t j = 0; j < idx.cols; ++j) {
      const std::size_t src = static_cast<std::size_t>(idx.at(i, j));
      for (std::size_t t = 0; t < c; ++t) n.value.at3(i, j, t) = tf.at2(src, t);
    }
  }
  n.parents = {feats.id};
  n.needs_grad = node(feats).needs_grad;
  IndexMatrix idx_copy = idx;
  n.backward = [feats, idx_copy, c](Graph& g, int self) {
    const Tensor& gr = g.nodes_[self].grad;
    Tensor& df = g.grad_buffer(feats.id);
    for (std::size_t i = 0; i < idx_copy.rows; ++i) {
      for (std::size_t j = 0; j < idx_copy.cols; ++j) {
        const std::size_t src = static_cast<std::size_t>(idx_copy.at(i, j));
        for (std::size_t t = 0; t < c; ++t) df.at2(src, t) += gr.at3(i, j, t);
      }
    }
  };
  return push(std::move(n), "gather_rows");
}

Value Graph::softmax(Value a, std::size_t axis) {
  const Tensor& ta = node(a).value;
  std::size_t outer, cnt, inner;
  axis_extents(ta.shape, axis, outer, cnt, inner);
  Node n;
  n.value = Tensor::zeros(ta.shape);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * cnt * inner + in;
      double mx = ta[base];
      for (std::size_t t = 1; t < cnt; ++t) mx = std::max(mx, ta[base + t * inner]);
      double denom = 0.0;
      for (std::size_t t = 0; t < cnt; ++t) {
        const double e = std::exp(ta[base + t * inner] - mx);
        n.value[base + t * inner] = e;
        denom += e;
      }
      for (std::size_t t = 0; t < cnt; ++t) n.value[base + t * inner] /= denom;
    }
  }
  n.parents = {a.id};
  n.needs_grad = node(a).needs_grad;
  n.backward = [a, outer, cnt, inner](Graph& g, int self) {
    const Tensor& gr = g.nodes_[self].grad;
    const Tensor& w = g.nodes_[self].value;
    Tensor& da = g.grad_buffer(a.id);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * cnt * inner + in;
        double dot = 0.0;
        for (std::size_t t = 0; t < cnt; ++t) dot += gr[base + t * inner] * w[base + t * inner];
        for (std::size_t t = 0; t < cnt; ++t) {
          da[base + t * inner] += w[base + t * inner] * (gr[base + t * inner] - dot);
        }
      }
    }
  };
  return push(std::move(n), "softmax");
}

Value Graph::sum_axis(Value a, std::size_t axis) {
  const Tensor& ta = node(a).value;
  std::size_t outer, cnt, inner;
  axis_extents(ta.shape, axis, outer, cnt, inner);
  Shape out_shape;
  for (std::size_t i = 0; i < ta.rank(); ++i) {
    if (i != axis) out_shape.push_back(ta.shape[i]);
  }
  if (out_shape.empty()) out_shape = {1};
  Node n;
  n.value = Tensor::zeros(out_shape);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t t = 0; t < cnt; ++t) {
      for (std::size_t in = 0; in < inner; ++in) {
        n.value[o * inner + in] += ta[(o * cnt + t) * inner + in];
      }
    }
  }
  n.parents = {a.id};
  n.needs_grad = node(a).needs_grad;
  n.backward = [a, outer, cnt, inner](Graph& g, int self) {
    const Tensor& gr = g.nodes_[self].grad;
    Tensor& da = g.grad_buffer(a.id);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t t = 0; t < cnt; ++t) {
        for (std::size_t in = 0; in < inner; ++in) {
          da[(o * cnt + t) * inner + in] += gr[o * inner + in];
        }
      }
    }
  };
  return push(std::move(n), "sum_axis");
}

Value Graph::max_axis(Value a, std::size_t axis) {
  const Tensor& ta = node(a).value;
  std::size_t outer, cnt, inner;
  axis_extents(ta.shape, axis, outer, cnt, inner);
  Shape out_shape;
  for (std::size_t i = 0; i < ta.rank(); ++i) {
    if (i != axis) out_shape.push_back(ta.shape[i]);
  }
  if (out_shape.empty()) out_shape = {1};
  Node n;
  n.value = Tensor::zeros(out_shape);
  std::vector<std::size_t> argmax(outer * inner, 0);
  double nearest = 1e300;
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      double best = ta[o * cnt * inner + in];
      double second = -1e300;
      std::size_t best_t = 0;
      for (std::size_t t = 1; t < cnt; ++t) {
        const double v = ta[(o * cnt + t) * inner + in];
        if (v > best) {
          second = best;
          best = v;
          best_t = t;
        } else {
          second = std::max(second, v);
        }
      }
      // A gap of exactly zero means duplicated inputs (padded groups repeat
      // rows); copies move together under perturbation, so only strictly
      // positive near-ties count as kinks.
      if (cnt > 1 && best - second > 0.0) nearest = std::min(nearest, best - second);
      n.value[o * inner + in] = best;
      argmax[o * inner + in] = best_t;
    }
  }
  note_kink_distance(nearest);
  n.parents = {a.id};
  n.needs_grad = node(a).needs_grad;
  n.backward = [a, outer, cnt, inner, argmax](Graph& g, int self) {
    const Tensor& gr = g.nodes_[self].grad;
    Tensor& da = g.grad_buffer(a.id);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t t = argmax[o * inner + in];
        da[(o * cnt + t) * inner + in] += gr[o * inner + in];
      }
    }
  };
  return push(std::move(n), "max_axis");
}

Value Graph::sum_all(Value a) {
  const Tensor& ta = node(a).value;
  Node n;
  n.value = Tensor::zeros({1});
  double acc = 0.0;
  for (double v : ta.data) acc += v;
  n.value[0] = acc;
  n.parents = {a.id};
  n.needs_grad = node(a).needs_grad;
  n.backward = [a](Graph& g, int self) {
    const double gv = g.nodes_[self].grad[0];
    Tensor& da = g.grad_buffer(a.id);
    for (double& v : da.data) v += gv;
  };
  return push(std::move(n), "sum_all");
}

Value Graph::mean_all(Value a) {
  const std::size_t n = node(a).value.numel();
  return scale(sum_all(a), 1.0 / static_cast<double>(n));
}

Value Graph::bce_with_logits(Value logits, Value targets) {
  const Tensor& tz = node(logits).value;
  const Tensor& ty = node(targets).value;
  if (!tz.same_shape(ty)) shape_error("bce_with_logits", tz, ty);
  Node n;
  n.value = Tensor::zeros(tz.shape);
  for (std::size_t i = 0; i < tz.numel(); ++i) {
    const double z = tz[i];
    const double y = ty[i];
    n.value[i] = std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  n.parents = {logits.id, targets.id};
  n.needs_grad = node(logits).needs_grad;
  n.backward = [logits, targets](Graph& g, int self) {
    const Tensor& gr = g.nodes_[self].grad;
    const Tensor& tz = g.node(logits).value;
    const Tensor& ty = g.node(targets).value;
    Tensor& dz = g.grad_buffer(logits.id);
    for (std::size_t i = 0; i < gr.numel(); ++i) {
      dz[i] += gr[i] * (stable_sigmoid(tz[i]) - ty[i]);
    }
  };
  return push(std::move(n), "bce_with_logits");
}

Value Graph::smooth_l1(Value pred, Value target, double delta) {
  const Tensor& tp = node(pred).value;
  const Tensor& tt = node(target).value;
  if (!tp.same_shape(tt)) shape_error("smooth_l1", tp, tt);
  Node n;
  n.value = Tensor::zeros(tp.shape);
  double nearest = 1e300;
  for (std::size_t i = 0; i < tp.numel(); ++i) {
    const double d = tp[i] - tt[i];
    const double ad = std::abs(d);
    nearest = std::min(nearest, std::abs(ad - delta));
    n.value[i] = ad < delta ? 0.5 * d * d / delta : ad - 0.5 * delta;
  }
  note_kink_distance(nearest);
  n.parents = {pred.id, target.id};
  n.needs_grad = node(pred).needs_grad;
  n.backward = [pred, target, delta](Graph& g, int self) {
    const Tensor& gr = g.nodes_[self].grad;
    const Tensor& tp = g.node(pred).value;
    const Tensor& tt = g.node(target).value;
    Tensor& dp = g.grad_buffer(pred.id);
    for (std::size_t i = 0; i < gr.numel(); ++i) {
      const double d = tp[i] - tt[i];
      const double slope = std::abs(d) < delta ? d / delta : (d > 0.0 ? 1.0 : -1.0);
      dp[i] += gr[i] * slope;
    }
  };
  return push(std::move(n), "smooth_l1");
}

void Graph::backward(Value root) {
  const Node& r = node(root);
  if (r.value.numel() != 1) {
    throw std::invalid_argument("backward: root must be scalar, got shape " +
                                shape_str(r.value.shape));
  }
  grad_buffer(root.id)[0] = 1.0;
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad || n.grad.data.empty() || !n.backward) continue;
    n.backward(*this, i);
  }
}

const Tensor& Graph::value(Value v) const { return node(v).value; }

const Tensor& Graph::grad(Value v) const {
  const Node& n = node(v);
  if (n.grad.data.empty()) {
    throw std::runtime_error("grad: node never received a gradient");
  }
  return n.grad;
}

bool Graph::has_grad(Value v) const { return !node(v).grad.data.empty(); }

Tensor Graph::grad_of(const std::string& param_name) const {
  auto it = param_nodes_.find(param_name);
  if (it == param_nodes_.end()) return Tensor{};  // parameter never entered this graph
  const Node& n = nodes_[static_cast<std::size_t>(it->second)];
  if (n.grad.data.empty()) return Tensor::zeros(n.value.shape);
  return n.grad;
}

Value mlp2_relu(Graph& g, Value x, Value w1, Value b1, Value w2, Value b2) {
  return g.linear(g.relu(g.linear(x, w1, b1)), w2, b2);
}

Tensor init_linear_weight(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t = Tensor::zeros({fan_in, fan_out});
  for (double& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace ptt

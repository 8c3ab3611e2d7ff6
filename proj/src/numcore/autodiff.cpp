// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include "fepcross/numcore/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_set>
#include <utility>

namespace fepcross::numcore {

template <typename T>
Tensor<T>& Node<T>::grad_buffer() {
  if (grad.size() != value.size() || grad.shape() != value.shape()) grad = Tensor<T>(value.shape());
  return grad;
}

template <typename T>
T Var<T>::item() const {
  if (node_->value.size() != 1) {
    throw ShapeError("item: expected one element, got shape " + shape_to_string(node_->value.shape()));
  }
  return node_->value[0];
}

template <typename T>
void Var<T>::zero_grad() {
  if (node_ && node_->requires_grad) node_->grad_buffer().fill(T{0});
}

template <typename T>
Var<T> parameter(Tensor<T> value) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->requires_grad = true;
  node->grad = Tensor<T>(node->value.shape());
  return Var<T>(std::move(node));
}

template <typename T>
Var<T> constant(Tensor<T> value) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  return Var<T>(std::move(node));
}

namespace {

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string shapes_message(const char* op, const Shape& a, const Shape& b) {
  return std::string(op) + ": incompatible shapes " + shape_to_string(a) + " and " + shape_to_string(b);
}

template <typename T>
Var<T> make_result(const char* op, Tensor<T> value, std::vector<NodePtr<T>> parents,
                   std::function<void(Node<T>&)> backward_fn) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->op = op;
  const bool needs_grad =
      std::any_of(parents.begin(), parents.end(), [](const NodePtr<T>& p) { return p->requires_grad; });
  if (needs_grad) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return Var<T>(std::move(node));
}

struct Extent {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

Extent axis_extent(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                     shape_to_string(shape));
  }
  Extent e;
  for (std::size_t i = 0; i < axis; ++i) e.outer *= shape[i];
  e.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) e.inner *= shape[i];
  return e;
}

std::vector<std::size_t> row_major_strides(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

// Numpy-style broadcast of two shapes, with per-output-axis input strides.
struct Broadcast {
  enum class Kind { kSame, kSuffixB, kGeneral };
  Kind kind = Kind::kGeneral;
  Shape out;
  std::vector<std::size_t> stride_a;
  std::vector<std::size_t> stride_b;
  std::size_t size_b = 1;
};

Broadcast plan_broadcast(const char* op, const Shape& a, const Shape& b) {
  Broadcast bc;
  if (a == b) {
    bc.kind = Broadcast::Kind::kSame;
    bc.out = a;
    return bc;
  }
  const std::size_t rank = std::max(a.size(), b.size());
  bc.out.assign(rank, 1);
  Shape pa(rank, 1), pb(rank, 1);
  std::copy(a.begin(), a.end(), pa.begin() + static_cast<std::ptrdiff_t>(rank - a.size()));
  std::copy(b.begin(), b.end(), pb.begin() + static_cast<std::ptrdiff_t>(rank - b.size()));
  for (std::size_t i = 0; i < rank; ++i) {
    if (pa[i] != pb[i] && pa[i] != 1 && pb[i] != 1) throw ShapeError(shapes_message(op, a, b));
    bc.out[i] = std::max(pa[i], pb[i]);
  }
  const auto sa = row_major_strides(pa);
  const auto sb = row_major_strides(pb);
  bc.stride_a.resize(rank);
  bc.stride_b.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    bc.stride_a[i] = pa[i] == 1 ? 0 : sa[i];
    bc.stride_b[i] = pb[i] == 1 ? 0 : sb[i];
  }
  bc.size_b = shape_size(b);
  if (pa == bc.out) {
    // b broadcast only over leading axes: b index is the output index modulo |b|.
    bool suffix = true;
    bool leading = true;
    for (std::size_t i = 0; i < rank; ++i) {
      if (pb[i] == 1 && bc.out[i] != 1) {
        if (!leading) suffix = false;
      } else if (pb[i] != 1) {
        leading = false;
      }
    }
    if (suffix) bc.kind = Broadcast::Kind::kSuffixB;
  }
  return bc;
}

template <typename F>
void for_each_broadcast(const Broadcast& bc, F&& f) {
  const std::size_t n = shape_size(bc.out);
  switch (bc.kind) {
    case Broadcast::Kind::kSame:
      for (std::size_t i = 0; i < n; ++i) f(i, i, i);
      return;
    case Broadcast::Kind::kSuffixB:
      for (std::size_t i = 0; i < n; ++i) f(i, i, i % bc.size_b);
      return;
    case Broadcast::Kind::kGeneral:
      break;
  }
  const std::size_t rank = bc.out.size();
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < n; ++i) {
    f(i, ia, ib);
    for (std::size_t ax = rank; ax-- > 0;) {
      ++idx[ax];
      ia += bc.stride_a[ax];
      ib += bc.stride_b[ax];
      if (idx[ax] < bc.out[ax]) break;
      ia -= bc.stride_a[ax] * bc.out[ax];
      ib -= bc.stride_b[ax] * bc.out[ax];
      idx[ax] = 0;
    }
  }
}

template <typename T, typename Fwd, typename DA, typename DB>
Var<T> binary(const char* op, const Var<T>& a, const Var<T>& b, Fwd fwd, DA da, DB db) {
  Broadcast bc = plan_broadcast(op, a.shape(), b.shape());
  Tensor<T> out(bc.out);
  {
    const auto av = a.value().data();
    const auto bv = b.value().data();
    auto ov = out.data();
    for_each_broadcast(bc, [&](std::size_t i, std::size_t ia, std::size_t ib) { ov[i] = fwd(av[ia], bv[ib]); });
  }
  return make_result<T>(op, std::move(out), {a.node(), b.node()},
                        [bc = std::move(bc), da, db](Node<T>& self) {
                          auto& pa = *self.parents[0];
                          auto& pb = *self.parents[1];
                          const auto g = self.grad.data();
                          const auto av = pa.value.data();
                          const auto bv = pb.value.data();
                          if (pa.requires_grad) {
                            auto ga = pa.grad_buffer().data();
                            for_each_broadcast(bc, [&](std::size_t i, std::size_t ia, std::size_t ib) {
                              ga[ia] += g[i] * da(av[ia], bv[ib]);
                            });
                          }
                          if (pb.requires_grad) {
                            auto gb = pb.grad_buffer().data();
                            for_each_broadcast(bc, [&](std::size_t i, std::size_t ia, std::size_t ib) {
                              gb[ib] += g[i] * db(av[ia], bv[ib]);
                            });
                          }
                        });
}

// df receives (input, output).
template <typename T, typename F, typename DF>
Var<T> unary(const char* op, const Var<T>& x, F f, DF df) {
  Tensor<T> out(x.shape());
  const auto xv = x.value().data();
  auto ov = out.data();
  for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = f(xv[i]);
  return make_result<T>(op, std::move(out), {x.node()}, [df](Node<T>& self) {
    auto& p = *self.parents[0];
    const auto g = self.grad.data();
    const auto xv = p.value.data();
    const auto yv = self.value.data();
    auto gx = p.grad_buffer().data();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(xv[i], yv[i]);
  });
}

template <typename T>
void add_into(Node<T>& parent, std::span<const T> g) {
  if (!parent.requires_grad) return;
  auto gp = parent.grad_buffer().data();
  for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
}

}  // namespace

template <typename T>
void backward(const Var<T>& root) {
  if (!root.defined()) throw std::invalid_argument("backward: undefined root");
  if (root.size() != 1) {
    throw ShapeError("backward: root must hold one element, got shape " + shape_to_string(root.shape()));
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS over nodes that carry gradients.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->grad_buffer()[0] += T{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward_fn) {
      node->grad_buffer();
      node->backward_fn(*node);
    }
  }
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  return binary<T>(
      "add", a, b, [](T x, T y) { return x + y; }, [](T, T) { return T{1}; }, [](T, T) { return T{1}; });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  return binary<T>(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T, T) { return T{1}; }, [](T, T) { return T{-1}; });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  return binary<T>(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; }, [](T x, T) { return x; });
}

template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b) {
  for (T v : b.value().data()) {
    if (v == T{0}) throw DomainError("div: zero divisor");
  }
  return binary<T>(
      "div", a, b, [](T x, T y) { return x / y; }, [](T, T y) { return T{1} / y; },
      [](T x, T y) { return -x / (y * y); });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T c) {
  return unary<T>(
      "add_scalar", a, [c](T x) { return x + c; }, [](T, T) { return T{1}; });
}

template <typename T>
Var<T> mul_scalar(const Var<T>& a, T c) {
  return unary<T>(
      "mul_scalar", a, [c](T x) { return x * c; }, [c](T, T) { return c; });
}

namespace {
thread_local double g_relu_margin = std::numeric_limits<double>::infinity();
}  // namespace

double relu_margin() { return g_relu_margin; }
void reset_relu_margin() { g_relu_margin = std::numeric_limits<double>::infinity(); }

template <typename T>
Var<T> relu(const Var<T>& x) {
  for (T v : x.value().data()) g_relu_margin = std::min(g_relu_margin, static_cast<double>(std::abs(v)));
  return unary<T>(
      "relu", x, [](T v) { return v > T{0} ? v : T{0}; }, [](T v, T) { return v > T{0} ? T{1} : T{0}; });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return unary<T>(
      "sigmoid", x, [](T v) { return T{1} / (T{1} + std::exp(-v)); }, [](T, T y) { return y * (T{1} - y); });
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  return unary<T>(
      "tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T{1} - y * y; });
}

template <typename T>
Var<T> exp(const Var<T>& x) {
  return unary<T>(
      "exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Var<T> log(const Var<T>& x) {
  for (T v : x.value().data()) {
    if (!(v > T{0})) throw DomainError("log: non-positive operand " + std::to_string(v));
  }
  return unary<T>(
      "log", x, [](T v) { return std::log(v); }, [](T v, T) { return T{1} / v; });
}

template <typename T>
Var<T> sqrt(const Var<T>& x) {
  for (T v : x.value().data()) {
    if (!(v >= T{0})) throw DomainError("sqrt: negative operand " + std::to_string(v));
  }
  return unary<T>(
      "sqrt", x, [](T v) { return std::sqrt(v); }, [](T, T y) { return T{0.5} / y; });
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sb.size() < 2) throw ShapeError(shapes_message("matmul", sa, sb));
  const std::size_t m = sa[sa.size() - 2];
  const std::size_t k = sa.back();
  const std::size_t n = sb.back();
  if (sb[sb.size() - 2] != k) throw ShapeError(shapes_message("matmul", sa, sb));
  const bool shared = sb.size() == 2;
  if (!shared && (sb.size() != sa.size() || !std::equal(sa.begin(), sa.end() - 2, sb.begin()))) {
    throw ShapeError(shapes_message("matmul", sa, sb));
  }
  const std::size_t batch = shape_size(sa) / (m * k);
  Shape out_shape(sa.begin(), sa.end() - 1);
  out_shape.push_back(n);
  Tensor<T> out(out_shape);

  using Map = Eigen::Map<MatRM<T>>;
  using CMap = Eigen::Map<const MatRM<T>>;
  const T* ap = a.value().data().data();
  const T* bp = b.value().data().data();
  T* op = out.data().data();
  const auto ei = [](std::size_t v) { return static_cast<Eigen::Index>(v); };
  if (shared) {
    Map(op, ei(batch * m), ei(n)).noalias() = CMap(ap, ei(batch * m), ei(k)) * CMap(bp, ei(k), ei(n));
  } else {
    for (std::size_t i = 0; i < batch; ++i) {
      Map(op + i * m * n, ei(m), ei(n)).noalias() = CMap(ap + i * m * k, ei(m), ei(k)) * CMap(bp + i * k * n, ei(k), ei(n));
    }
  }
  return make_result<T>("matmul", std::move(out), {a.node(), b.node()},
                        [shared, batch, m, k, n, ei](Node<T>& self) {
                          auto& pa = *self.parents[0];
                          auto& pb = *self.parents[1];
                          const T* g = self.grad.data().data();
                          const T* ap = pa.value.data().data();
                          const T* bp = pb.value.data().data();
                          if (shared) {
                            if (pa.requires_grad) {
                              Map(pa.grad_buffer().data().data(), ei(batch * m), ei(k)).noalias() +=
                                  CMap(g, ei(batch * m), ei(n)) * CMap(bp, ei(k), ei(n)).transpose();
                            }
                            if (pb.requires_grad) {
                              Map(pb.grad_buffer().data().data(), ei(k), ei(n)).noalias() +=
                                  CMap(ap, ei(batch * m), ei(k)).transpose() * CMap(g, ei(batch * m), ei(n));
                            }
                            return;
                          }
                          for (std::size_t i = 0; i < batch; ++i) {
                            if (pa.requires_grad) {
                              Map(pa.grad_buffer().data().data() + i * m * k, ei(m), ei(k)).noalias() +=
                                  CMap(g + i * m * n, ei(m), ei(n)) * CMap(bp + i * k * n, ei(k), ei(n)).transpose();
                            }
                            if (pb.requires_grad) {
                              Map(pb.grad_buffer().data().data() + i * k * n, ei(k), ei(n)).noalias() +=
                                  CMap(ap + i * m * k, ei(m), ei(k)).transpose() * CMap(g + i * m * n, ei(m), ei(n));
                            }
                          }
                        });
}

template <typename T>
Var<T> softmax(const Var<T>& x, std::size_t axis) {
  const Extent e = axis_extent(x.shape(), axis, "softmax");
  Tensor<T> out(x.shape());
  const auto xv = x.value().data();
  auto ov = out.data();
  for (std::size_t o = 0; o < e.outer; ++o) {
    for (std::size_t in = 0; in < e.inner; ++in) {
      const std::size_t base = o * e.len * e.inner + in;
      T mx = xv[base];
      for (std::size_t l = 1; l < e.len; ++l) mx = std::max(mx, xv[base + l * e.inner]);
      T total{0};
      for (std::size_t l = 0; l < e.len; ++l) {
        const T v = std::exp(xv[base + l * e.inner] - mx);
        ov[base + l * e.inner] = v;
        total += v;
      }
      for (std::size_t l = 0; l < e.len; ++l) ov[base + l * e.inner] /= total;
    }
  }
  return make_result<T>("softmax", std::move(out), {x.node()}, [e](Node<T>& self) {
    auto& p = *self.parents[0];
    const auto g = self.grad.data();
    const auto y = self.value.data();
    auto gx = p.grad_buffer().data();
    for (std::size_t o = 0; o < e.outer; ++o) {
      for (std::size_t in = 0; in < e.inner; ++in) {
        const std::size_t base = o * e.len * e.inner + in;
        T dot{0};
        for (std::size_t l = 0; l < e.len; ++l) dot += g[base + l * e.inner] * y[base + l * e.inner];
        for (std::size_t l = 0; l < e.len; ++l) {
          const std::size_t i = base + l * e.inner;
          gx[i] += y[i] * (g[i] - dot);
        }
      }
    }
  });
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, T eps) {
  if (x.shape().empty()) throw ShapeError("layer_norm: scalar input");
  const std::size_t len = x.shape().back();
  const std::size_t rows = x.size() / len;
  Tensor<T> out(x.shape());
  std::vector<T> rstd(rows);
  const auto xv = x.value().data();
  auto ov = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv.data() + r * len;
    T mu{0};
    for (std::size_t i = 0; i < len; ++i) mu += row[i];
    mu /= static_cast<T>(len);
    T var{0};
    for (std::size_t i = 0; i < len; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= static_cast<T>(len);
    rstd[r] = T{1} / std::sqrt(var + eps);
    for (std::size_t i = 0; i < len; ++i) ov[r * len + i] = (row[i] - mu) * rstd[r];
  }
  return make_result<T>("layer_norm", std::move(out), {x.node()},
                        [len, rows, rstd = std::move(rstd)](Node<T>& self) {
                          auto& p = *self.parents[0];
                          const auto g = self.grad.data();
                          const auto y = self.value.data();
                          auto gx = p.grad_buffer().data();
                          const T inv_len = T{1} / static_cast<T>(len);
                          for (std::size_t r = 0; r < rows; ++r) {
                            T gm{0}, gym{0};
                            for (std::size_t i = 0; i < len; ++i) {
                              gm += g[r * len + i];
                              gym += g[r * len + i] * y[r * len + i];
                            }
                            gm *= inv_len;
                            gym *= inv_len;
                            for (std::size_t i = 0; i < len; ++i) {
                              const std::size_t j = r * len + i;
                              gx[j] += rstd[r] * (g[j] - gm - y[j] * gym);
                            }
                          }
                        });
}

template <typename T>
Var<T> concat(std::span<const Var<T>> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts[0].shape();
  const Extent e0 = axis_extent(first, axis, "concat");
  std::vector<std::size_t> lens;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) throw ShapeError(shapes_message("concat", first, s));
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) throw ShapeError(shapes_message("concat", first, s));
    }
    lens.push_back(s[axis]);
    total += s[axis];
  }
  Shape out_shape = first;
  out_shape[axis] = total;
  Tensor<T> out(out_shape);
  auto ov = out.data();
  const std::size_t inner = e0.inner;
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto pv = parts[p].value().data();
    const std::size_t block = lens[p] * inner;
    for (std::size_t o = 0; o < e0.outer; ++o) {
      std::copy_n(pv.data() + o * block, block, ov.data() + o * total * inner + offset * inner);
    }
    offset += lens[p];
  }
  std::vector<NodePtr<T>> parents;
  for (const auto& p : parts) parents.push_back(p.node());
  return make_result<T>("concat", std::move(out), std::move(parents),
                        [outer = e0.outer, inner, total, lens](Node<T>& self) {
                          const auto g = self.grad.data();
                          std::size_t offset = 0;
                          for (std::size_t p = 0; p < lens.size(); ++p) {
                            auto& parent = *self.parents[p];
                            const std::size_t block = lens[p] * inner;
                            if (parent.requires_grad) {
                              auto gp = parent.grad_buffer().data();
                              for (std::size_t o = 0; o < outer; ++o) {
                                const T* src = g.data() + o * total * inner + offset * inner;
                                T* dst = gp.data() + o * block;
                                for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                              }
                            }
                            offset += lens[p];
                          }
                        });
}

template <typename T>
Var<T> slice(const Var<T>& x, std::size_t axis, std::size_t start, std::size_t length) {
  const Extent e = axis_extent(x.shape(), axis, "slice");
  if (start + length > e.len) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") exceeds axis of shape " + shape_to_string(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  Tensor<T> out(out_shape);
  const auto xv = x.value().data();
  auto ov = out.data();
  const std::size_t block = length * e.inner;
  for (std::size_t o = 0; o < e.outer; ++o) {
    std::copy_n(xv.data() + o * e.len * e.inner + start * e.inner, block, ov.data() + o * block);
  }
  return make_result<T>("slice", std::move(out), {x.node()}, [e, start, block](Node<T>& self) {
    auto& p = *self.parents[0];
    const auto g = self.grad.data();
    auto gp = p.grad_buffer().data();
    for (std::size_t o = 0; o < e.outer; ++o) {
      T* dst = gp.data() + o * e.len * e.inner + start * e.inner;
      const T* src = g.data() + o * block;
      for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
    }
  });
}

template <typename T>
std::vector<Var<T>> split(const Var<T>& x, std::span<const std::size_t> sizes, std::size_t axis) {
  const Extent e = axis_extent(x.shape(), axis, "split");
  if (std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) != e.len) {
    throw ShapeError("split: sizes do not cover axis " + std::to_string(axis) + " of shape " +
                     shape_to_string(x.shape()));
  }
  std::vector<Var<T>> out;
  std::size_t start = 0;
  for (std::size_t s : sizes) {
    out.push_back(slice(x, axis, start, s));
    start += s;
  }
  return out;
}

template <typename T>
Var<T> sum(const Var<T>& x, std::size_t axis, bool keepdim) {
  const Extent e = axis_extent(x.shape(), axis, "sum");
  Shape out_shape = x.shape();
  if (keepdim) {
    out_shape[axis] = 1;
  } else {
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
    if (out_shape.empty()) out_shape.push_back(1);
  }
  Tensor<T> out(out_shape);
  const auto xv = x.value().data();
  auto ov = out.data();
  for (std::size_t o = 0; o < e.outer; ++o) {
    for (std::size_t l = 0; l < e.len; ++l) {
      const T* src = xv.data() + (o * e.len + l) * e.inner;
      T* dst = ov.data() + o * e.inner;
      for (std::size_t in = 0; in < e.inner; ++in) dst[in] += src[in];
    }
  }
  return make_result<T>("sum", std::move(out), {x.node()}, [e](Node<T>& self) {
    auto& p = *self.parents[0];
    const auto g = self.grad.data();
    auto gp = p.grad_buffer().data();
    for (std::size_t o = 0; o < e.outer; ++o) {
      for (std::size_t l = 0; l < e.len; ++l) {
        T* dst = gp.data() + (o * e.len + l) * e.inner;
        const T* src = g.data() + o * e.inner;
        for (std::size_t in = 0; in < e.inner; ++in) dst[in] += src[in];
      }
    }
  });
}

template <typename T>
Var<T> mean(const Var<T>& x, std::size_t axis, bool keepdim) {
  const Extent e = axis_extent(x.shape(), axis, "mean");
  return mul_scalar(sum(x, axis, keepdim), T{1} / static_cast<T>(e.len));
}

template <typename T>
Var<T> sum_all(const Var<T>& x) {
  T total{0};
  for (T v : x.value().data()) total += v;
  return make_result<T>("sum_all", Tensor<T>::scalar(total), {x.node()}, [](Node<T>& self) {
    auto& p = *self.parents[0];
    const T g = self.grad[0];
    for (T& v : p.grad_buffer().data()) v += g;
  });
}

template <typename T>
Var<T> mean_all(const Var<T>& x) {
  if (x.size() == 0) throw ShapeError("mean_all: empty tensor");
  return mul_scalar(sum_all(x), T{1} / static_cast<T>(x.size()));
}

template <typename T>
Var<T> permute(const Var<T>& x, std::span<const std::size_t> order) {
  const Shape& in_shape = x.shape();
  const std::size_t rank = in_shape.size();
  if (order.size() != rank) throw ShapeError("permute: order rank mismatch for shape " + shape_to_string(in_shape));
  std::vector<bool> seen(rank, false);
  for (std::size_t a : order) {
    if (a >= rank || seen[a]) throw ShapeError("permute: invalid axis order for shape " + shape_to_string(in_shape));
    seen[a] = true;
  }
  const auto in_strides = row_major_strides(in_shape);
  Shape out_shape(rank);
  std::vector<std::size_t> src_stride(rank);
  for (std::size_t j = 0; j < rank; ++j) {
    out_shape[j] = in_shape[order[j]];
    src_stride[j] = in_strides[order[j]];
  }
  // Maps flat output index -> flat input index.
  const std::size_t n = shape_size(out_shape);
  std::vector<std::size_t> src(n);
  {
    std::vector<std::size_t> idx(rank, 0);
    std::size_t off = 0;
    for (std::size_t i = 0; i < n; ++i) {
      src[i] = off;
      for (std::size_t ax = rank; ax-- > 0;) {
        ++idx[ax];
        off += src_stride[ax];
        if (idx[ax] < out_shape[ax]) break;
        off -= src_stride[ax] * out_shape[ax];
        idx[ax] = 0;
      }
    }
  }
  Tensor<T> out(out_shape);
  const auto xv = x.value().data();
  auto ov = out.data();
  for (std::size_t i = 0; i < n; ++i) ov[i] = xv[src[i]];
  return make_result<T>("permute", std::move(out), {x.node()}, [src = std::move(src)](Node<T>& self) {
    auto& p = *self.parents[0];
    const auto g = self.grad.data();
    auto gp = p.grad_buffer().data();
    for (std::size_t i = 0; i < g.size(); ++i) gp[src[i]] += g[i];
  });
}

template <typename T>
Var<T> transpose(const Var<T>& x, std::size_t axis0, std::size_t axis1) {
  std::vector<std::size_t> order(x.shape().size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (axis0 >= order.size() || axis1 >= order.size()) {
    throw ShapeError("transpose: axis out of range for shape " + shape_to_string(x.shape()));
  }
  std::swap(order[axis0], order[axis1]);
  return permute<T>(x, order);
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  Tensor<T> out = x.value().reshaped(std::move(shape));
  return make_result<T>("reshape", std::move(out), {x.node()},
                        [](Node<T>& self) { add_into<T>(*self.parents[0], self.grad.data()); });
}

template <typename T>
Var<T> embedding(const Var<T>& table, std::span<const std::size_t> indices) {
  if (table.shape().size() != 2) throw ShapeError("embedding: table must be 2-D, got " + shape_to_string(table.shape()));
  const std::size_t rows = table.shape()[0];
  const std::size_t width = table.shape()[1];
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  Tensor<T> out(Shape{idx.size(), width});
  const auto tv = table.value().data();
  auto ov = out.data();
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= rows) throw std::out_of_range("embedding: index " + std::to_string(idx[r]) + " >= " + std::to_string(rows));
    std::copy_n(tv.data() + idx[r] * width, width, ov.data() + r * width);
  }
  return make_result<T>("embedding", std::move(out), {table.node()}, [idx = std::move(idx), width](Node<T>& self) {
    auto& p = *self.parents[0];
    const auto g = self.grad.data();
    auto gp = p.grad_buffer().data();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (std::size_t c = 0; c < width; ++c) gp[idx[r] * width + c] += g[r * width + c];
    }
  });
}

template <typename T>
Var<T> mse(const Var<T>& a, const Var<T>& b) {
  if (a.shape() != b.shape()) throw ShapeError(shapes_message("mse", a.shape(), b.shape()));
  if (a.size() == 0) throw ShapeError("mse: empty tensors");
  const auto av = a.value().data();
  const auto bv = b.value().data();
  T total{0};
  for (std::size_t i = 0; i < av.size(); ++i) total += (av[i] - bv[i]) * (av[i] - bv[i]);
  const T inv_n = T{1} / static_cast<T>(av.size());
  return make_result<T>("mse", Tensor<T>::scalar(total * inv_n), {a.node(), b.node()}, [inv_n](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    const T g = self.grad[0] * T{2} * inv_n;
    const auto av = pa.value.data();
    const auto bv = pb.value.data();
    if (pa.requires_grad) {
      auto ga = pa.grad_buffer().data();
      for (std::size_t i = 0; i < av.size(); ++i) ga[i] += g * (av[i] - bv[i]);
    }
    if (pb.requires_grad) {
      auto gb = pb.grad_buffer().data();
      for (std::size_t i = 0; i < av.size(); ++i) gb[i] -= g * (av[i] - bv[i]);
    }
  });
}

#define FEPCROSS_INSTANTIATE_AUTODIFF(T)                                                          \
  template struct Node<T>;                                                                        \
  template class Var<T>;                                                                          \
  template Var<T> parameter<T>(Tensor<T>);                                                        \
  template Var<T> constant<T>(Tensor<T>);                                                         \
  template void backward<T>(const Var<T>&);                                                       \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                                           \
  template Var<T> sub<T>(const Var<T>&, const Var<T>&);                                           \
  template Var<T> mul<T>(const Var<T>&, const Var<T>&);                                           \
  template Var<T> div<T>(const Var<T>&, const Var<T>&);                                           \
  template Var<T> add_scalar<T>(const Var<T>&, T);                                                \
  template Var<T> mul_scalar<T>(const Var<T>&, T);                                                \
  template Var<T> relu<T>(const Var<T>&);                                                         \
  template Var<T> sigmoid<T>(const Var<T>&);                                                      \
  template Var<T> tanh<T>(const Var<T>&);                                                         \
  template Var<T> exp<T>(const Var<T>&);                                                          \
  template Var<T> log<T>(const Var<T>&);                                                          \
  template Var<T> sqrt<T>(const Var<T>&);                                                         \
  template Var<T> matmul<T>(const Var<T>&, const Var<T>&);                                        \
  template Var<T> softmax<T>(const Var<T>&, std::size_t);                                         \
  template Var<T> layer_norm<T>(const Var<T>&, T);                                                \
  template Var<T> concat<T>(std::span<const Var<T>>, std::size_t);                                \
  template Var<T> slice<T>(const Var<T>&, std::size_t, std::size_t, std::size_t);                 \
  template std::vector<Var<T>> split<T>(const Var<T>&, std::span<const std::size_t>, std::size_t); \
  template Var<T> sum<T>(const Var<T>&, std::size_t, bool);                                       \
  template Var<T> mean<T>(const Var<T>&, std::size_t, bool);                                      \
  template Var<T> sum_all<T>(const Var<T>&);                                                      \
  template Var<T> mean_all<T>(const Var<T>&);                                                     \
  template Var<T> transpose<T>(const Var<T>&, std::size_t, std::size_t);                          \
  template Var<T> permute<T>(const Var<T>&, std::span<const std::size_t>);                        \
  template Var<T> reshape<T>(const Var<T>&, Shape);                                               \
  template Var<T> embedding<T>(const Var<T>&, std::span<const std::size_t>);                      \
  template Var<T> mse<T>(const Var<T>&, const Var<T>&);

FEPCROSS_INSTANTIATE_AUTODIFF(float)
FEPCROSS_INSTANTIATE_AUTODIFF(double)

}  // namespace fepcross::numcore

// Copyright 2026 The riskdiff Authors
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

#ifndef RISKDIFF__AUTODIFF__OPS_HPP_
#define RISKDIFF__AUTODIFF__OPS_HPP_

#include "riskdiff/autodiff/kernels.hpp"
#include "riskdiff/autodiff/tensor.hpp"
#include "riskdiff/util/rng.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

// Differentiable primitives. Broadcasting is limited to a trailing row vector
// (add_bias / mul_bias) over any number of leading dimensions.
namespace riskdiff::ad
{

inline constexpr double kLayerNormEps = 1e-5;

namespace detail
{

template <class T>
void require_finite(std::string_view op, const Tensor<T> & t)
{
  if (!t.defined()) {
    throw TensorError(std::string(op) + ": undefined input tensor");
  }
  for (T v : t.values()) {
    if (!std::isfinite(v)) {
      throw TensorError(
        std::string(op) + ": non-finite input value in tensor " + shape_str(t.shape()));
    }
  }
}

template <class T>
bool tracking(std::initializer_list<const Tensor<T> *> inputs)
{
  if (current_tape<T>() == nullptr) {
    return false;
  }
  for (const Tensor<T> * t : inputs) {
    if (t->requires_grad()) {
      return true;
    }
  }
  return false;
}

template <class T>
std::shared_ptr<Node<T>> make_node(Shape shape, bool requires_grad)
{
  auto node = std::make_shared<Node<T>>();
  node->value.assign(numel(shape), T(0));
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return node;
}

template <class T, class Fn>
void record(std::string_view op, Fn && fn)
{
  current_tape<T>()->record(op, std::forward<Fn>(fn));
}

[[noreturn]] inline void shape_error(std::string_view op, const Shape & a, const Shape & b)
{
  throw TensorError(
    std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

inline std::size_t normalize_axis(std::string_view op, long axis, std::size_t rank)
{
  const long r = static_cast<long>(rank);
  const long a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw TensorError(
      std::string(op) + ": axis " + std::to_string(axis) + " out of range for rank " +
      std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

// Splits a shape around an axis: outer * shape[axis] * inner == numel.
inline void split_axis(const Shape & s, std::size_t axis, std::size_t & outer, std::size_t & inner)
{
  outer = 1;
  inner = 1;
  for (std::size_t i = 0; i < axis; ++i) {
    outer *= s[i];
  }
  for (std::size_t i = axis + 1; i < s.size(); ++i) {
    inner *= s[i];
  }
}

template <class T, class F, class G>
Tensor<T> unary(std::string_view op, const Tensor<T> & a, F forward, G derivative)
{
  require_finite(op, a);
  const bool track = tracking<T>({&a});
  auto out = make_node<T>(a.shape(), track);
  const auto av = a.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    out->value[i] = forward(av[i]);
  }
  if (track) {
    auto an = a.shared();
    std::weak_ptr<Node<T>> wo = out;
    record<T>(op, [an, wo, derivative]() {
      auto o = wo.lock();
      if (!o || !o->has_grad() || !an->requires_grad) {
        return;
      }
      T * ga = an->grad_data();
      for (std::size_t i = 0; i < o->value.size(); ++i) {
        ga[i] += o->grad[i] * derivative(an->value[i], o->value[i]);
      }
    });
  }
  return Tensor<T>::from_node(out);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Sources

/// Standard-normal draw; a non-differentiable source.
template <class T>
Tensor<T> gaussian(Shape shape, Rng & rng)
{
  auto node = detail::make_node<T>(std::move(shape), false);
  for (T & v : node->value) {
    v = static_cast<T>(rng.normal());
  }
  return Tensor<T>::from_node(node);
}

template <class T>
Tensor<T> constant(Shape shape, std::vector<T> values)
{
  return Tensor<T>(std::move(shape), std::move(values), false);
}

/// Copy that does not participate in gradient flow.
template <class T>
Tensor<T> detach(const Tensor<T> & a)
{
  detail::require_finite("detach", a);
  auto node = detail::make_node<T>(a.shape(), false);
  std::copy(a.values().begin(), a.values().end(), node->value.begin());
  return Tensor<T>::from_node(node);
}

// ---------------------------------------------------------------------------
// Linear algebra

/// a[..., k] x b[k, n] -> [..., n]
template <class T>
Tensor<T> matmul(const Tensor<T> & a, const Tensor<T> & b)
{
  detail::require_finite("matmul", a);
  detail::require_finite("matmul", b);
  if (b.rank() != 2 || a.rank() < 1 || a.shape().back() != b.dim(0)) {
    detail::shape_error("matmul", a.shape(), b.shape());
  }
  const std::size_t k = b.dim(0);
  const std::size_t n = b.dim(1);
  const std::size_t rows = a.size() / k;
  Shape os = a.shape();
  os.back() = n;
  const bool track = detail::tracking<T>({&a, &b});
  auto out = detail::make_node<T>(os, track);
  kernels::gemm_nn(rows, k, n, a.values().data(), b.values().data(), out->value.data());
  if (track) {
    auto an = a.shared();
    auto bn = b.shared();
    std::weak_ptr<Node<T>> wo = out;
    detail::record<T>("matmul", [an, bn, wo, rows, k, n]() {
      auto o = wo.lock();
      if (!o || !o->has_grad()) {
        return;
      }
      if (an->requires_grad) {
        kernels::gemm_nt(rows, n, k, o->grad.data(), bn->value.data(), an->grad_data());
      }
      if (bn->requires_grad) {
        kernels::gemm_tn(rows, k, n, an->value.data(), o->grad.data(), bn->grad_data());
      }
    });
  }
  return Tensor<T>::from_node(out);
}

/// Batched product with a leading batch dimension.
/// transpose_b == false: a[B,m,k] x b[B,k,n] -> [B,m,n]
/// transpose_b == true:  a[B,m,k] x b[B,n,k]^T -> [B,m,n]
template <class T>
Tensor<T> bmm(const Tensor<T> & a, const Tensor<T> & b, bool transpose_b = false)
{
  const char * op = transpose_b ? "bmm_nt" : "bmm";
  detail::require_finite(op, a);
  detail::require_finite(op, b);
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0)) {
    detail::shape_error(op, a.shape(), b.shape());
  }
  const std::size_t batch = a.dim(0);
  const std::size_t m = a.dim(1);
  const std::size_t k = a.dim(2);
  const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
  if ((transpose_b ? b.dim(2) : b.dim(1)) != k) {
    detail::shape_error(op, a.shape(), b.shape());
  }
  const bool track = detail::tracking<T>({&a, &b});
  auto out = detail::make_node<T>(Shape{batch, m, n}, track);
  for (std::size_t i = 0; i < batch; ++i) {
    const T * ap = a.values().data() + i * m * k;
    const T * bp = b.values().data() + i * k * n;
    T * cp = out->value.data() + i * m * n;
    if (transpose_b) {
      kernels::gemm_nt(m, k, n, ap, bp, cp);
    } else {
      kernels::gemm_nn(m, k, n, ap, bp, cp);
    }
  }
  if (track) {
    auto an = a.shared();
    auto bn = b.shared();
    std::weak_ptr<Node<T>> wo = out;
    detail::record<T>(op, [an, bn, wo, batch, m, k, n, transpose_b]() {
      auto o = wo.lock();
      if (!o || !o->has_grad()) {
        return;
      }
      for (std::size_t i = 0; i < batch; ++i) {
        const T * go = o->grad.data() + i * m * n;
        const T * ap = an->value.data() + i * m * k;
        const T * bp = bn->value.data() + i * k * n;
        if (an->requires_grad) {
          T * ga = an->grad_data() + i * m * k;
          if (transpose_b) {
            kernels::gemm_nn(m, n, k, go, bp, ga);
          } else {
            kernels::gemm_nt(m, n, k, go, bp, ga);
          }
        }
        if (bn->requires_grad) {
          T * gb = bn->grad_data() + i * k * n;
          if (transpose_b) {
            kernels::gemm_tn(m, n, k, go, ap, gb);
          } else {
            kernels::gemm_tn(m, k, n, ap, go, gb);
          }
        }
      }
    });
  }
  return Tensor<T>::from_node(out);
}

// ---------------------------------------------------------------------------
// Elementwise

namespace detail
{

template <class T, class F, class GA, class GB>
Tensor<T> binary(
  std::string_view op, const Tensor<T> & a, const Tensor<T> & b, F forward, GA da, GB db)
{
  require_finite(op, a);
  require_finite(op, b);
  if (a.shape() != b.shape()) {
    shape_error(op, a.shape(), b.shape());
  }
  const bool track = tracking<T>({&a, &b});
  auto out = make_node<T>(a.shape(), track);
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    out->value[i] = forward(av[i], bv[i]);
  }
  if (track) {
    auto an = a.shared();
    auto bn = b.shared();
    std::weak_ptr<Node<T>> wo = out;
    record<T>(op, [an, bn, wo, da, db]() {
      auto o = wo.lock();
      if (!o || !o->has_grad()) {
        return;
      }
      const std::size_t n = o->value.size();
      if (an->requires_grad) {
        T * g = an->grad_data();
        for (std::size_t i = 0; i < n; ++i) {
          g[i] += o->grad[i] * da(an->value[i], bn->value[i]);
        }
      }
      if (bn->requires_grad) {
        T * g = bn->grad_data();
        for (std::size_t i = 0; i < n; ++i) {
          g[i] += o->grad[i] * db(an->value[i], bn->value[i]);
        }
      }
    });
  }
  return Tensor<T>::from_node(out);
}

}  // namespace detail

template <class T>
Tensor<T> add(const Tensor<T> & a, const Tensor<T> & b)
{
  return detail::binary<T>(
    "add", a, b, [](T x, T y) { return x + y; }, [](T, T) { return T(1); },
    [](T, T) { return T(1); });
}

template <class T>
Tensor<T> sub(const Tensor<T> & a, const Tensor<T> & b)
{
  return detail::binary<T>(
    "sub", a, b, [](T x, T y) { return x - y; }, [](T, T) { return T(1); },
    [](T, T) { return T(-1); });
}

template <class T>
Tensor<T> mul(const Tensor<T> & a, const Tensor<T> & b)
{
  return detail::binary<T>(
    "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; },
    [](T x, T) { return x; });
}

namespace detail
{

// a[..., n] (op) row[n]; mode 0 = add, 1 = multiply.
template <class T>
Tensor<T> row_broadcast(std::string_view op, const Tensor<T> & a, const Tensor<T> & row, int mode)
{
  require_finite(op, a);
  require_finite(op, row);
  if (row.rank() != 1 || a.rank() < 1 || a.shape().back() != row.dim(0)) {
    shape_error(op, a.shape(), row.shape());
  }
  const std::size_t n = row.dim(0);
  const std::size_t rows = a.size() / n;
  const bool track = tracking<T>({&a, &row});
  auto out = make_node<T>(a.shape(), track);
  const T * av = a.values().data();
  const T * rv = row.values().data();
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out->value[i * n + j] = mode == 0 ? av[i * n + j] + rv[j] : av[i * n + j] * rv[j];
    }
  }
  if (track) {
    auto an = a.shared();
    auto rn = row.shared();
    std::weak_ptr<Node<T>> wo = out;
    record<T>(op, [an, rn, wo, rows, n, mode]() {
      auto o = wo.lock();
      if (!o || !o->has_grad()) {
        return;
      }
      const T * go = o->grad.data();
      if (an->requires_grad) {
        T * ga = an->grad_data();
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            ga[i * n + j] += mode == 0 ? go[i * n + j] : go[i * n + j] * rn->value[j];
          }
        }
      }
      if (rn->requires_grad) {
        T * gr = rn->grad_data();
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            gr[j] += mode == 0 ? go[i * n + j] : go[i * n + j] * an->value[i * n + j];
          }
        }
      }
    });
  }
  return Tensor<T>::from_node(out);
}

}  // namespace detail

/// a[..., n] + bias[n]
template <class T>
Tensor<T> add_bias(const Tensor<T> & a, const Tensor<T> & bias)
{
  return detail::row_broadcast<T>("add_bias", a, bias, 0);
}

/// a[..., n] * gain[n]
template <class T>
Tensor<T> mul_bias(const Tensor<T> & a, const Tensor<T> & gain)
{
  return detail::row_broadcast<T>("mul_bias", a, gain, 1);
}

template <class T>
Tensor<T> scale(const Tensor<T> & a, T c)
{
  return detail::unary<T>(
    "scale", a, [c](T x) { return c * x; }, [c](T, T) { return c; });
}

template <class T>
Tensor<T> add_scalar(const Tensor<T> & a, T c)
{
  return detail::unary<T>(
    "add_scalar", a, [c](T x) { return x + c; }, [](T, T) { return T(1); });
}

template <class T>
Tensor<T> relu(const Tensor<T> & a)
{
  return detail::unary<T>(
    "relu", a, [](T x) { return x > T(0) ? x : T(0); },
    [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <class T>
Tensor<T> tanh(const Tensor<T> & a)
{
  return detail::unary<T>(
    "tanh", a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T> & a)
{
  return detail::unary<T>(
    "sigmoid", a, [](T x) { return T(1) / (T(1) + std::exp(-x)); },
    [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Tensor<T> square(const Tensor<T> & a)
{
  return detail::unary<T>(
    "square", a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

/// Elementwise Huber penalty of a residual: quadratic inside |r| < delta,
/// linear outside.
template <class T>
Tensor<T> huber(const Tensor<T> & residual, T delta)
{
  if (!(delta > T(0))) {
    throw TensorError("huber: delta must be positive");
  }
  return detail::unary<T>(
    "huber", residual,
    [delta](T r) {
      const T ar = std::abs(r);
      return ar < delta ? T(0.5) * r * r : delta * (ar - T(0.5) * delta);
    },
    [delta](T r, T) {
      if (std::abs(r) < delta) {
        return r;
      }
      return r > T(0) ? delta : -delta;
    });
}

// ---------------------------------------------------------------------------
// Normalization

/// Normalizes each row (last dimension) to zero mean and unit population
/// variance, with kLayerNormEps added to the variance. No affine terms.
template <class T>
Tensor<T> layer_norm(const Tensor<T> & a)
{
  detail::require_finite("layer_norm", a);
  if (a.rank() < 1 || a.shape().back() == 0) {
    throw TensorError("layer_norm: empty last dimension " + shape_str(a.shape()));
  }
  const std::size_t n = a.shape().back();
  const std::size_t rows = a.size() / n;
  const bool track = detail::tracking<T>({&a});
  auto out = detail::make_node<T>(a.shape(), track);
  auto inv_std = std::make_shared<std::vector<T>>(rows);
  const T * av = a.values().data();
  for (std::size_t i = 0; i < rows; ++i) {
    const T * x = av + i * n;
    T mean = 0;
    for (std::size_t j = 0; j < n; ++j) {
      mean += x[j];
    }
    mean /= static_cast<T>(n);
    T var = 0;
    for (std::size_t j = 0; j < n; ++j) {
      var += (x[j] - mean) * (x[j] - mean);
    }
    var /= static_cast<T>(n);
    const T inv = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
    (*inv_std)[i] = inv;
    for (std::size_t j = 0; j < n; ++j) {
      out->value[i * n + j] = (x[j] - mean) * inv;
    }
  }
  if (track) {
    auto an = a.shared();
    std::weak_ptr<Node<T>> wo = out;
    detail::record<T>("layer_norm", [an, wo, inv_std, rows, n]() {
      auto o = wo.lock();
      if (!o || !o->has_grad() || !an->requires_grad) {
        return;
      }
      T * ga = an->grad_data();
      for (std::size_t i = 0; i < rows; ++i) {
        const T * dy = o->grad.data() + i * n;
        const T * y = o->value.data() + i * n;
        T sum_dy = 0;
        T sum_dy_y = 0;
        for (std::size_t j = 0; j < n; ++j) {
          sum_dy += dy[j];
          sum_dy_y += dy[j] * y[j];
        }
        const T inv = (*inv_std)[i];
        const T nn = static_cast<T>(n);
        for (std::size_t j = 0; j < n; ++j) {
          ga[i * n + j] += inv / nn * (nn * dy[j] - sum_dy - y[j] * sum_dy_y);
        }
      }
    });
  }
  return Tensor<T>::from_node(out);
}

/// Softmax over the last dimension.
template <class T>
Tensor<T> softmax(const Tensor<T> & a)
{
  detail::require_finite("softmax", a);
  const std::size_t n = a.shape().back();
  const std::size_t rows = a.size() / n;
  const bool track = detail::tracking<T>({&a});
  auto out = detail::make_node<T>(a.shape(), track);
  const T * av = a.values().data();
  for (std::size_t i = 0; i < rows; ++i) {
    const T * x = av + i * n;
    T * y = out->value.data() + i * n;
    const T mx = *std::max_element(x, x + n);
    T z = 0;
    for (std::size_t j = 0; j < n; ++j) {
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    for (std::size_t j = 0; j < n; ++j) {
      y[j] /= z;
    }
  }
  if (track) {
    auto an = a.shared();
    std::weak_ptr<Node<T>> wo = out;
    detail::record<T>("softmax", [an, wo, rows, n]() {
      auto o = wo.lock();
      if (!o || !o->has_grad() || !an->requires_grad) {
        return;
      }
      T * ga = an->grad_data();
      for (std::size_t i = 0; i < rows; ++i) {
        const T * dy = o->grad.data() + i * n;
        const T * y = o->value.data() + i * n;
        T dot = 0;
        for (std::size_t j = 0; j < n; ++j) {
          dot += dy[j] * y[j];
        }
        for (std::size_t j = 0; j < n; ++j) {
          ga[i * n + j] += y[j] * (dy[j] - dot);
        }
      }
    });
  }
  return Tensor<T>::from_node(out);
}

/// log(softmax(a)) over the last dimension, computed stably.
template <class T>
Tensor<T> log_softmax(const Tensor<T> & a)
{
  detail::require_finite("log_softmax", a);
  const std::size_t n = a.shape().back();
  const std::size_t rows = a.size() / n;
  const bool track = detail::tracking<T>({&a});
  auto out = detail::make_node<T>(a.shape(), track);
  const T * av = a.values().data();
  for (std::size_t i = 0; i < rows; ++i) {
    const T * x = av + i * n;
    const T mx = *std::max_element(x, x + n);
    T z = 0;
    for (std::size_t j = 0; j < n; ++j) {
      z += std::exp(x[j] - mx);
    }
    const T lse = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) {
      out->value[i * n + j] = x[j] - lse;
    }
  }
  if (track) {
    auto an = a.shared();
    std::weak_ptr<Node<T>> wo = out;
    detail::record<T>("log_softmax", [an, wo, rows, n]() {
      auto o = wo.lock();
      if (!o || !o->has_grad() || !an->requires_grad) {
        return;
      }
      T * ga = an->grad_data();
      for (std::size_t i = 0; i < rows; ++i) {
        const T * dy = o->grad.data() + i * n;
        const T * y = o->value.data() + i * n;
        T sum = 0;
        for (std::size_t j = 0; j < n; ++j) {
          sum += dy[j];
        }
        for (std::size_t j = 0; j < n; ++j) {
          ga[i * n + j] += dy[j] - std::exp(y[j]) * sum;
        }
      }
    });
  }
  return Tensor<T>::from_node(out);
}

// ---------------------------------------------------------------------------
// Structural

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>> & parts, long axis)
{
  if (parts.empty()) {
    throw TensorError("concat: no inputs");
  }
  for (const auto & p : parts) {
    detail::require_finite("concat", p);
  }
  const Shape & s0 = parts.front().shape();
  const std::size_t ax = detail::normalize_axis("concat", axis, s0.size());
  Shape os = s0;
  os[ax] = 0;
  for (const auto & p : parts) {
    if (p.rank() != s0.size()) {
      detail::shape_error("concat", s0, p.shape());
    }
    for (std::size_t d = 0; d < s0.size(); ++d) {
      if (d != ax && p.dim(d) != s0[d]) {
        detail::shape_error("concat", s0, p.shape());
      }
    }
    os[ax] += p.dim(ax);
  }
  std::size_t outer = 0;
  std::size_t inner = 0;
  detail::split_axis(os, ax, outer, inner);
  bool track = false;
  for (const auto & p : parts) {
    track = track || detail::tracking<T>({&p});
  }
  auto out = detail::make_node<T>(os, track);
  const std::size_t out_block = os[ax] * inner;
  std::size_t offset = 0;
  std::vector<std::shared_ptr<Node<T>>> nodes;
  std::vector<std::size_t> offsets;
  for (const auto & p : parts) {
    const std::size_t block = p.dim(ax) * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(
        p.values().data() + o * block, block, out->value.data() + o * out_block + offset);
    }
    nodes.push_back(p.shared());
    offsets.push_back(offset);
    offset += block;
  }
  if (track) {
    std::weak_ptr<Node<T>> wo = out;
    detail::record<T>("concat", [nodes, offsets, wo, outer, out_block]() {
      auto o = wo.lock();
      if (!o || !o->has_grad()) {
        return;
      }
      for (std::size_t k = 0; k < nodes.size(); ++k) {
        if (!nodes[k]->requires_grad) {
          continue;
        }
        const std::size_t block = nodes[k]->value.size() / outer;
        T * g = nodes[k]->grad_data();
        for (std::size_t r = 0; r < outer; ++r) {
          const T * src = o->grad.data() + r * out_block + offsets[k];
          for (std::size_t j = 0; j < block; ++j) {
            g[r * block + j] += src[j];
          }
        }
      }
    });
  }
  return Tensor<T>::from_node(out);
}

/// a[..., begin:end, ...] along one axis.
template <class T>
Tensor<T> slice(const Tensor<T> & a, long axis, std::size_t begin, std::size_t end)
{
  detail::require_finite("slice", a);
  const std::size_t ax = detail::normalize_axis("slice", axis, a.rank());
  if (begin >= end || end > a.dim(ax)) {
    throw TensorError(
      "slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
      ") invalid for shape " + shape_str(a.shape()));
  }
  std::size_t outer = 0;
  std::size_t inner = 0;
  detail::split_axis(a.shape(), ax, outer, inner);
  Shape os = a.shape();
  os[ax] = end - begin;
  const bool track = detail::tracking<T>({&a});
  auto out = detail::make_node<T>(os, track);
  const std::size_t in_block = a.dim(ax) * inner;
  const std::size_t out_block = os[ax] * inner;
  const std::size_t offset = begin * inner;
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(
      a.values().data() + o * in_block + offset, out_block, out->value.data() + o * out_block);
  }
  if (track) {
    auto an = a.shared();
    std::weak_ptr<Node<T>> wo = out;
    detail::record<T>("slice", [an, wo, outer, in_block, out_block, offset]() {
      auto o = wo.lock();
      if (!o || !o->has_grad() || !an->requires_grad) {
        return;
      }
      T * g = an->grad_data();
      for (std::size_t r = 0; r < outer; ++r) {
        for (std::size_t j = 0; j < out_block; ++j) {
          g[r * in_block + offset + j] += o->grad[r * out_block + j];
        }
      }
    });
  }
  return Tensor<T>::from_node(out);
}

template <class T>
Tensor<T> reshape(const Tensor<T> & a, Shape shape)
{
  detail::require_finite("reshape", a);
  if (numel(shape) != a.size()) {
    detail::shape_error("reshape", a.shape(), shape);
  }
  const bool track = detail::tracking<T>({&a});
  auto out = detail::make_node<T>(std::move(shape), track);
  std::copy(a.values().begin(), a.values().end(), out->value.begin());
  if (track) {
    auto an = a.shared();
    std::weak_ptr<Node<T>> wo = out;
    detail::record<T>("reshape", [an, wo]() {
      auto o = wo.lock();
      if (!o || !o->has_grad() || !an->requires_grad) {
        return;
      }
      T * g = an->grad_data();
      for (std::size_t i = 0; i < o->grad.size(); ++i) {
        g[i] += o->grad[i];
      }
    });
  }
  return Tensor<T>::from_node(out);
}

/// Gathers entries along the first axis: out[i] = a[indices[i]]. Repeated
/// indices are allowed; their gradients accumulate.
template <class T>
Tensor<T> index_select(const Tensor<T> & a, const std::vector<std::size_t> & indices)
{
  detail::require_finite("index_select", a);
  if (a.rank() < 1 || indices.empty()) {
    throw TensorError("index_select: empty selection on " + shape_str(a.shape()));
  }
  const std::size_t rows = a.dim(0);
  const std::size_t block = a.size() / rows;
  for (std::size_t idx : indices) {
    if (idx >= rows) {
      throw TensorError(
        "index_select: index " + std::to_string(idx) + " out of range for " +
        shape_str(a.shape()));
    }
  }
  Shape os = a.shape();
  os[0] = indices.size();
  const bool track = detail::tracking<T>({&a});
  auto out = detail::make_node<T>(os, track);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(a.values().data() + indices[i] * block, block, out->value.data() + i * block);
  }
  if (track) {
    auto an = a.shared();
    std::weak_ptr<Node<T>> wo = out;
    detail::record<T>("index_select", [an, wo, indices, block]() {
      auto o = wo.lock();
      if (!o || !o->has_grad() || !an->requires_grad) {
        return;
      }
      T * g = an->grad_data();
      for (std::size_t i = 0; i < indices.size(); ++i) {
        for (std::size_t j = 0; j < block; ++j) {
          g[indices[i] * block + j] += o->grad[i * block + j];
        }
      }
    });
  }
  return Tensor<T>::from_node(out);
}

/// Inclusive prefix sum along an axis.
template <class T>
Tensor<T> cumsum(const Tensor<T> & a, long axis)
{
  detail::require_finite("cumsum", a);
  const std::size_t ax = detail::normalize_axis("cumsum", axis, a.rank());
  std::size_t outer = 0;
  std::size_t inner = 0;
  detail::split_axis(a.shape(), ax, outer, inner);
  const std::size_t len = a.dim(ax);
  const bool track = detail::tracking<T>({&a});
  auto out = detail::make_node<T>(a.shape(), track);
  const T * av = a.values().data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < inner; ++j) {
      T acc = 0;
      for (std::size_t s = 0; s < len; ++s) {
        const std::size_t idx = (o * len + s) * inner + j;
        acc += av[idx];
        out->value[idx] = acc;
      }
    }
  }
  if (track) {
    auto an = a.shared();
    std::weak_ptr<Node<T>> wo = out;
    detail::record<T>("cumsum", [an, wo, outer, inner, len]() {
      auto o = wo.lock();
      if (!o || !o->has_grad() || !an->requires_grad) {
        return;
      }
      T * g = an->grad_data();
      for (std::size_t r = 0; r < outer; ++r) {
        for (std::size_t j = 0; j < inner; ++j) {
          T acc = 0;
          for (std::size_t s = len; s-- > 0;) {
            const std::size_t idx = (r * len + s) * inner + j;
            acc += o->grad[idx];
            g[idx] += acc;
          }
        }
      }
    });
  }
  return Tensor<T>::from_node(out);
}

// ---------------------------------------------------------------------------
// Reductions

template <class T>
Tensor<T> sum(const Tensor<T> & a)
{
  detail::require_finite("sum", a);
  const bool track = detail::tracking<T>({&a});
  auto out = detail::make_node<T>(Shape{1}, track);
  T acc = 0;
  for (T v : a.values()) {
    acc += v;
  }
  out->value[0] = acc;
  if (track) {
    auto an = a.shared();
    std::weak_ptr<Node<T>> wo = out;
    detail::record<T>("sum", [an, wo]() {
      auto o = wo.lock();
      if (!o || !o->has_grad() || !an->requires_grad) {
        return;
      }
      T * g = an->grad_data();
      for (std::size_t i = 0; i < an->value.size(); ++i) {
        g[i] += o->grad[0];
      }
    });
  }
  return Tensor<T>::from_node(out);
}

template <class T>
Tensor<T> mean(const Tensor<T> & a)
{
  if (a.defined() && a.size() == 0) {
    throw TensorError("mean: empty tensor");
  }
  return scale(sum(a), T(1) / static_cast<T>(a.size()));
}

/// Sums out one axis. A rank-1 input reduces to shape [1].
template <class T>
Tensor<T> sum_axis(const Tensor<T> & a, long axis)
{
  detail::require_finite("sum_axis", a);
  const std::size_t ax = detail::normalize_axis("sum_axis", axis, a.rank());
  std::size_t outer = 0;
  std::size_t inner = 0;
  detail::split_axis(a.shape(), ax, outer, inner);
  const std::size_t len = a.dim(ax);
  Shape os;
  for (std::size_t d = 0; d < a.rank(); ++d) {
    if (d != ax) {
      os.push_back(a.dim(d));
    }
  }
  if (os.empty()) {
    os.push_back(1);
  }
  const bool track = detail::tracking<T>({&a});
  auto out = detail::make_node<T>(os, track);
  const T * av = a.values().data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t s = 0; s < len; ++s) {
      for (std::size_t j = 0; j < inner; ++j) {
        out->value[o * inner + j] += av[(o * len + s) * inner + j];
      }
    }
  }
  if (track) {
    auto an = a.shared();
    std::weak_ptr<Node<T>> wo = out;
    detail::record<T>("sum_axis", [an, wo, outer, inner, len]() {
      auto o = wo.lock();
      if (!o || !o->has_grad() || !an->requires_grad) {
        return;
      }
      T * g = an->grad_data();
      for (std::size_t r = 0; r < outer; ++r) {
        for (std::size_t s = 0; s < len; ++s) {
          for (std::size_t j = 0; j < inner; ++j) {
            g[(r * len + s) * inner + j] += o->grad[r * inner + j];
          }
        }
      }
    });
  }
  return Tensor<T>::from_node(out);
}

template <class T>
Tensor<T> mean_axis(const Tensor<T> & a, long axis)
{
  const std::size_t ax = detail::normalize_axis("mean_axis", axis, a.rank());
  return scale(sum_axis(a, axis), T(1) / static_cast<T>(a.dim(ax)));
}

// ---------------------------------------------------------------------------
// Stochastic

/// Inverted dropout: zeroes each entry with probability p and rescales the
/// survivors by 1/(1-p). Identity when !train or p == 0.
template <class T>
Tensor<T> dropout(const Tensor<T> & a, double p, Rng & rng, bool train)
{
  if (p < 0.0 || p >= 1.0) {
    throw TensorError("dropout: rate must lie in [0, 1)");
  }
  if (!train || p == 0.0) {
    return a;
  }
  std::vector<T> mask(a.size());
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  for (T & m : mask) {
    m = rng.uniform() < p ? T(0) : keep_scale;
  }
  return mul(a, constant<T>(a.shape(), std::move(mask)));
}

// ---------------------------------------------------------------------------
// Recurrent

/// One gated recurrent unit step.
///   gx: [N, 3H] input projection (reset | update | candidate), bias included
///   h:  [N, H] previous state
///   wh: [H, 3H], bh: [3H] recurrent weights
/// r = s(gx_r + h wh_r + bh_r), z = s(gx_z + h wh_z + bh_z),
/// n = tanh(gx_n + r * (h wh_n + bh_n)), h' = (1 - z) * n + z * h.
template <class T>
Tensor<T> gru_cell(
  const Tensor<T> & gx, const Tensor<T> & h, const Tensor<T> & wh, const Tensor<T> & bh)
{
  for (const auto * t : {&gx, &h, &wh, &bh}) {
    detail::require_finite("gru_cell", *t);
  }
  if (h.rank() != 2 || gx.rank() != 2 || wh.rank() != 2 || bh.rank() != 1) {
    detail::shape_error("gru_cell", gx.shape(), h.shape());
  }
  const std::size_t rows = h.dim(0);
  const std::size_t hid = h.dim(1);
  if (gx.dim(0) != rows || gx.dim(1) != 3 * hid || wh.dim(0) != hid || wh.dim(1) != 3 * hid ||
    bh.dim(0) != 3 * hid)
  {
    detail::shape_error("gru_cell", gx.shape(), wh.shape());
  }
  const bool track = detail::tracking<T>({&gx, &h, &wh, &bh});
  auto out = detail::make_node<T>(Shape{rows, hid}, track);
  // Saved activations: r, z, n, and the recurrent candidate term gh_n.
  auto saved = std::make_shared<std::vector<T>>(4 * rows * hid);
  std::vector<T> gh(rows * 3 * hid);
  for (std::size_t i = 0; i < rows; ++i) {
    std::copy_n(bh.values().data(), 3 * hid, gh.data() + i * 3 * hid);
  }
  kernels::gemm_nn(rows, hid, 3 * hid, h.values().data(), wh.values().data(), gh.data());
  T * r = saved->data();
  T * z = r + rows * hid;
  T * nn = z + rows * hid;
  T * ghn = nn + rows * hid;
  const T * gxv = gx.values().data();
  const T * hv = h.values().data();
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < hid; ++j) {
      const std::size_t k = i * hid + j;
      const std::size_t g = i * 3 * hid;
      r[k] = T(1) / (T(1) + std::exp(-(gxv[g + j] + gh[g + j])));
      z[k] = T(1) / (T(1) + std::exp(-(gxv[g + hid + j] + gh[g + hid + j])));
      ghn[k] = gh[g + 2 * hid + j];
      nn[k] = std::tanh(gxv[g + 2 * hid + j] + r[k] * ghn[k]);
      out->value[k] = (T(1) - z[k]) * nn[k] + z[k] * hv[k];
    }
  }
  if (track) {
    auto gxn = gx.shared();
    auto hn = h.shared();
    auto whn = wh.shared();
    auto bhn = bh.shared();
    std::weak_ptr<Node<T>> wo = out;
    detail::record<T>("gru_cell", [gxn, hn, whn, bhn, wo, saved, rows, hid]() {
      auto o = wo.lock();
      if (!o || !o->has_grad()) {
        return;
      }
      const T * r = saved->data();
      const T * z = r + rows * hid;
      const T * nn = z + rows * hid;
      const T * ghn = nn + rows * hid;
      const T * dh = o->grad.data();
      const T * hv = hn->value.data();
      std::vector<T> dgh(rows * 3 * hid);
      std::vector<T> dgx(rows * 3 * hid);
      std::vector<T> dh_direct(rows * hid);
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < hid; ++j) {
          const std::size_t k = i * hid + j;
          const std::size_t g = i * 3 * hid;
          const T dz = dh[k] * (hv[k] - nn[k]);
          const T dn = dh[k] * (T(1) - z[k]);
          dh_direct[k] = dh[k] * z[k];
          const T dn_pre = dn * (T(1) - nn[k] * nn[k]);
          const T dr = dn_pre * ghn[k];
          const T dr_pre = dr * r[k] * (T(1) - r[k]);
          const T dz_pre = dz * z[k] * (T(1) - z[k]);
          dgx[g + j] = dr_pre;
          dgx[g + hid + j] = dz_pre;
          dgx[g + 2 * hid + j] = dn_pre;
          dgh[g + j] = dr_pre;
          dgh[g + hid + j] = dz_pre;
          dgh[g + 2 * hid + j] = dn_pre * r[k];
        }
      }
      if (gxn->requires_grad) {
        T * g = gxn->grad_data();
        for (std::size_t i = 0; i < dgx.size(); ++i) {
          g[i] += dgx[i];
        }
      }
      if (bhn->requires_grad) {
        T * g = bhn->grad_data();
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t j = 0; j < 3 * hid; ++j) {
            g[j] += dgh[i * 3 * hid + j];
          }
        }
      }
      if (whn->requires_grad) {
        kernels::gemm_tn(rows, hid, 3 * hid, hv, dgh.data(), whn->grad_data());
      }
      if (hn->requires_grad) {
        T * g = hn->grad_data();
        for (std::size_t i = 0; i < dh_direct.size(); ++i) {
          g[i] += dh_direct[i];
        }
        kernels::gemm_nt(rows, 3 * hid, hid, dgh.data(), whn->value.data(), g);
      }
    });
  }
  return Tensor<T>::from_node(out);
}

/// Scaled dot-product attention with `heads` heads over the last dimension.
///   q: [N, Lq, D], k and v: [N, Lk, D] -> [N, Lq, D]
/// If `weights` is non-null it receives the softmax rows, [N, heads, Lq, Lk].
template <class T>
Tensor<T> multi_head_attention(
  const Tensor<T> & q, const Tensor<T> & k, const Tensor<T> & v, std::size_t heads,
  std::vector<T> * weights = nullptr)
{
  for (const auto * t : {&q, &k, &v}) {
    detail::require_finite("attention", *t);
  }
  if (q.rank() != 3 || k.rank() != 3 || k.shape() != v.shape() || q.dim(0) != k.dim(0) ||
    q.dim(2) != k.dim(2))
  {
    detail::shape_error("attention", q.shape(), k.shape());
  }
  const std::size_t n = q.dim(0);
  const std::size_t lq = q.dim(1);
  const std::size_t lk = k.dim(1);
  const std::size_t d = q.dim(2);
  if (heads == 0 || d % heads != 0) {
    throw TensorError(
      "attention: model width " + std::to_string(d) + " not divisible by " +
      std::to_string(heads) + " heads");
  }
  const std::size_t dh = d / heads;
  const T inv = T(1) / std::sqrt(static_cast<T>(dh));
  const bool track = detail::tracking<T>({&q, &k, &v});
  auto out = detail::make_node<T>(Shape{n, lq, d}, track);
  auto probs = std::make_shared<std::vector<T>>(n * heads * lq * lk);
  const T * qv = q.values().data();
  const T * kv = k.values().data();
  const T * vv = v.values().data();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < lq; ++i) {
        const T * qi = qv + (b * lq + i) * d + h * dh;
        T * p = probs->data() + ((b * heads + h) * lq + i) * lk;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < lk; ++j) {
          const T * kj = kv + (b * lk + j) * d + h * dh;
          T s = 0;
          for (std::size_t c = 0; c < dh; ++c) {
            s += qi[c] * kj[c];
          }
          p[j] = s * inv;
          mx = std::max(mx, p[j]);
        }
        T z = 0;
        for (std::size_t j = 0; j < lk; ++j) {
          p[j] = std::exp(p[j] - mx);
          z += p[j];
        }
        T * oi = out->value.data() + (b * lq + i) * d + h * dh;
        for (std::size_t j = 0; j < lk; ++j) {
          p[j] /= z;
          const T * vj = vv + (b * lk + j) * d + h * dh;
          for (std::size_t c = 0; c < dh; ++c) {
            oi[c] += p[j] * vj[c];
          }
        }
      }
    }
  }
  if (weights != nullptr) {
    *weights = *probs;
  }
  if (track) {
    auto qn = q.shared();
    auto kn = k.shared();
    auto vn = v.shared();
    std::weak_ptr<Node<T>> wo = out;
    detail::record<T>("attention", [qn, kn, vn, wo, probs, n, lq, lk, d, heads, dh, inv]() {
      auto o = wo.lock();
      if (!o || !o->has_grad()) {
        return;
      }
      const T * go = o->grad.data();
      T * gq = qn->requires_grad ? qn->grad_data() : nullptr;
      T * gk = kn->requires_grad ? kn->grad_data() : nullptr;
      T * gv = vn->requires_grad ? vn->grad_data() : nullptr;
      std::vector<T> dp(lk);
      for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t h = 0; h < heads; ++h) {
          for (std::size_t i = 0; i < lq; ++i) {
            const T * p = probs->data() + ((b * heads + h) * lq + i) * lk;
            const T * goi = go + (b * lq + i) * d + h * dh;
            const T * qi = qn->value.data() + (b * lq + i) * d + h * dh;
            T dot = 0;
            for (std::size_t j = 0; j < lk; ++j) {
              const std::size_t row = (b * lk + j) * d + h * dh;
              T s = 0;
              for (std::size_t c = 0; c < dh; ++c) {
                s += goi[c] * vn->value[row + c];
              }
              dp[j] = s;
              dot += p[j] * s;
              if (gv != nullptr) {
                for (std::size_t c = 0; c < dh; ++c) {
                  gv[row + c] += p[j] * goi[c];
                }
              }
            }
            for (std::size_t j = 0; j < lk; ++j) {
              const T ds = p[j] * (dp[j] - dot) * inv;
              const std::size_t row = (b * lk + j) * d + h * dh;
              if (gq != nullptr) {
                T * gqi = gq + (b * lq + i) * d + h * dh;
                for (std::size_t c = 0; c < dh; ++c) {
                  gqi[c] += ds * kn->value[row + c];
                }
              }
              if (gk != nullptr) {
                for (std::size_t c = 0; c < dh; ++c) {
                  gk[row + c] += ds * qi[c];
                }
              }
            }
          }
        }
      }
    });
  }
  return Tensor<T>::from_node(out);
}

}  // namespace riskdiff::ad

#endif  // RISKDIFF__AUTODIFF__OPS_HPP_

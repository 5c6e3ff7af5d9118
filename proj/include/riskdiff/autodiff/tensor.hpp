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

#ifndef RISKDIFF__AUTODIFF__TENSOR_HPP_
#define RISKDIFF__AUTODIFF__TENSOR_HPP_

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace riskdiff::ad
{

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape & shape)
{
  return std::accumulate(
    shape.begin(), shape.end(), std::size_t{1}, std::multiplies<std::size_t>{});
}

inline std::string shape_str(const Shape & shape)
{
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    os << (i ? "," : "") << shape[i];
  }
  os << ']';
  return os.str();
}

/// Raised for any contract violation inside the engine (shape mismatch,
/// non-finite values, non-scalar backward root).
class TensorError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

template <class T>
struct Node
{
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;

  /// Lazily allocates the gradient buffer.
  T * grad_data()
  {
    if (grad.size() != value.size()) {
      grad.assign(value.size(), T(0));
    }
    return grad.data();
  }
  bool has_grad() const { return !grad.empty(); }
};

/// Shared handle to a shaped array. Copies alias the same storage.
template <class T>
class Tensor
{
public:
  using value_type = T;

  Tensor() = default;

  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false)
  : node_(std::make_shared<Node<T>>())
  {
    if (numel(shape) != values.size()) {
      throw TensorError(
        "tensor: shape " + shape_str(shape) + " holds " + std::to_string(numel(shape)) +
        " values, got " + std::to_string(values.size()));
    }
    for (T v : values) {
      if (!std::isfinite(v)) {
        throw TensorError("tensor: non-finite value at construction");
      }
    }
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false)
  {
    const std::size_t n = numel(shape);
    return Tensor(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
  }

  static Tensor scalar(T v) { return Tensor(Shape{1}, std::vector<T>{v}); }

  /// Internal: wraps a freshly built node without revalidation.
  static Tensor from_node(std::shared_ptr<Node<T>> node)
  {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape & shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t size() const { return node_->value.size(); }

  std::span<const T> values() const { return node_->value; }
  std::span<T> mutable_values() { return node_->value; }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return {node_->grad_data(), node_->value.size()}; }
  bool has_grad() const { return node_->has_grad(); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }

  T item() const
  {
    if (size() != 1) {
      throw TensorError("item: tensor " + shape_str(shape()) + " is not a scalar");
    }
    return node_->value[0];
  }

  T at(std::size_t flat) const { return node_->value.at(flat); }

  void zero_grad()
  {
    if (node_->has_grad()) {
      std::fill(node_->grad.begin(), node_->grad.end(), T(0));
    }
  }

  Node<T> * node() const { return node_.get(); }
  const std::shared_ptr<Node<T>> & shared() const { return node_; }

private:
  std::shared_ptr<Node<T>> node_;
};

/// Ordered record of primitive operations. Each record owns the closure that
/// pushes its output gradient back into its inputs. Records are appended in
/// execution order, so reverse iteration is a valid topological order.
template <class T>
class Tape
{
public:
  using BackwardFn = std::function<void()>;

  void record(std::string_view op, BackwardFn fn)
  {
    records_.push_back(Record{std::string(op), std::move(fn)});
  }

  std::size_t size() const { return records_.size(); }
  std::string_view op_at(std::size_t i) const { return records_.at(i).op; }

  void backward(const Tensor<T> & root)
  {
    if (!root.defined() || root.size() != 1) {
      throw TensorError(
        "backward: root must be a scalar, got " +
        (root.defined() ? shape_str(root.shape()) : std::string("undefined")));
    }
    if (!std::isfinite(root.item())) {
      throw TensorError("backward: non-finite root value");
    }
    if (!root.requires_grad()) {
      return;
    }
    root.node()->grad_data()[0] += T(1);
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
      it->backward();
    }
  }

  void clear() { records_.clear(); }

private:
  struct Record
  {
    std::string op;
    BackwardFn backward;
  };
  std::vector<Record> records_;
};

template <class T>
Tape<T> *& current_tape()
{
  thread_local Tape<T> * tape = nullptr;
  return tape;
}

/// Installs a tape as the recording target for the current thread. Operations
/// executed with no active tape are not recorded (inference mode).
template <class T>
class TapeScope
{
public:
  explicit TapeScope(Tape<T> & tape)
  : previous_(current_tape<T>())
  {
    current_tape<T>() = &tape;
  }
  ~TapeScope() { current_tape<T>() = previous_; }
  TapeScope(const TapeScope &) = delete;
  TapeScope & operator=(const TapeScope &) = delete;

private:
  Tape<T> * previous_;
};

/// Suspends recording for the current thread.
template <class T>
class NoGradScope
{
public:
  NoGradScope()
  : previous_(current_tape<T>())
  {
    current_tape<T>() = nullptr;
  }
  ~NoGradScope() { current_tape<T>() = previous_; }
  NoGradScope(const NoGradScope &) = delete;
  NoGradScope & operator=(const NoGradScope &) = delete;

private:
  Tape<T> * previous_;
};

}  // namespace riskdiff::ad

#endif  // RISKDIFF__AUTODIFF__TENSOR_HPP_

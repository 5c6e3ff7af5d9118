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

#ifndef RISKDIFF__AUTODIFF__NN_HPP_
#define RISKDIFF__AUTODIFF__NN_HPP_

#include "riskdiff/autodiff/ops.hpp"
#include "riskdiff/autodiff/tensor.hpp"
#include "riskdiff/util/rng.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace riskdiff::ad
{

/// Named collection of learnable tensors, in registration order.
template <class T>
class ParamSet
{
public:
  using Entry = std::pair<std::string, Tensor<T>>;

  Tensor<T> add(const std::string & name, Tensor<T> t)
  {
    for (const auto & e : entries_) {
      if (e.first == name) {
        throw TensorError("param set: duplicate parameter '" + name + "'");
      }
    }
    t.set_requires_grad(true);
    entries_.emplace_back(name, t);
    return t;
  }

  /// Uniform(-bound, bound) initialisation.
  Tensor<T> add_uniform(const std::string & name, Shape shape, double bound, Rng & rng)
  {
    std::vector<T> v(numel(shape));
    for (T & x : v) {
      x = static_cast<T>(rng.uniform(-bound, bound));
    }
    return add(name, Tensor<T>(std::move(shape), std::move(v)));
  }

  Tensor<T> add_zeros(const std::string & name, Shape shape)
  {
    return add(name, Tensor<T>::zeros(std::move(shape)));
  }

  const std::vector<Entry> & entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::size_t scalar_count() const
  {
    std::size_t n = 0;
    for (const auto & e : entries_) {
      n += e.second.size();
    }
    return n;
  }

  Tensor<T> get(const std::string & name) const
  {
    for (const auto & e : entries_) {
      if (e.first == name) {
        return e.second;
      }
    }
    throw TensorError("param set: no parameter '" + name + "'");
  }

  void zero_grad()
  {
    for (auto & e : entries_) {
      e.second.zero_grad();
    }
  }

  /// Sets every parameter to a constant (used by tests to build degenerate
  /// models).
  void fill(T v)
  {
    for (auto & e : entries_) {
      auto vals = e.second.mutable_values();
      std::fill(vals.begin(), vals.end(), v);
    }
  }

private:
  std::vector<Entry> entries_;
};

/// Affine map y = x W + b over the last dimension.
template <class T>
struct Linear
{
  Tensor<T> weight;  // [in, out]
  Tensor<T> bias;    // [out], undefined when bias-free
  std::size_t in = 0;
  std::size_t out = 0;

  Tensor<T> operator()(const Tensor<T> & x) const
  {
    auto y = matmul(x, weight);
    return bias.defined() ? add_bias(y, bias) : y;
  }
};

template <class T>
Linear<T> make_linear(
  ParamSet<T> & params, const std::string & name, std::size_t in, std::size_t out, Rng & rng,
  bool with_bias = true)
{
  Linear<T> l;
  l.in = in;
  l.out = out;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  l.weight = params.add_uniform(name + ".weight", Shape{in, out}, bound, rng);
  if (with_bias) {
    l.bias = params.add_zeros(name + ".bias", Shape{out});
  }
  return l;
}

/// Stack of Linear layers with ReLU between them (none after the last).
template <class T>
struct Mlp
{
  std::vector<Linear<T>> layers;

  Tensor<T> operator()(Tensor<T> x, double dropout_rate = 0.0, Rng * rng = nullptr,
    bool train = false) const
  {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      x = layers[i](x);
      if (i + 1 < layers.size()) {
        x = relu(x);
        if (train && rng != nullptr && dropout_rate > 0.0) {
          x = dropout(x, dropout_rate, *rng, train);
        }
      }
    }
    return x;
  }
};

/// widths = {in, hidden..., out}; widths.size() - 1 layers.
template <class T>
Mlp<T> make_mlp(
  ParamSet<T> & params, const std::string & name, const std::vector<std::size_t> & widths,
  Rng & rng)
{
  if (widths.size() < 2) {
    throw TensorError("mlp: need at least input and output width");
  }
  Mlp<T> m;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    m.layers.push_back(
      make_linear(params, name + "." + std::to_string(i), widths[i], widths[i + 1], rng));
  }
  return m;
}

}  // namespace riskdiff::ad

#endif  // RISKDIFF__AUTODIFF__NN_HPP_

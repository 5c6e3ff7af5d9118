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

#ifndef RISKDIFF__AUTODIFF__KERNELS_HPP_
#define RISKDIFF__AUTODIFF__KERNELS_HPP_

#include <cstddef>
#include <vector>

// Row-major dense kernels. All accumulate into C. Every loop keeps a fixed
// summation order so results are independent of how many rows are batched.
namespace riskdiff::ad::kernels
{

/// C[m,n] += A[m,k] * B[k,n]
template <class T>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const T * a, const T * b, T * c)
{
  for (std::size_t i = 0; i < m; ++i) {
    T * crow = c + i * n;
    const T * arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) {
        continue;
      }
      const T * brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        crow[j] += av * brow[j];
      }
    }
  }
}

template <class T>
std::vector<T> transpose(std::size_t rows, std::size_t cols, const T * a)
{
  std::vector<T> t(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      t[j * rows + i] = a[i * cols + j];
    }
  }
  return t;
}

/// C[m,n] += A[m,k] * B[n,k]^T
template <class T>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const T * a, const T * b, T * c)
{
  const std::vector<T> bt = transpose(n, k, b);
  gemm_nn(m, k, n, a, bt.data(), c);
}

/// C[k,n] += A[m,k]^T * B[m,n]
template <class T>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const T * a, const T * b, T * c)
{
  for (std::size_t i = 0; i < m; ++i) {
    const T * arow = a + i * k;
    const T * brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) {
        continue;
      }
      T * crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        crow[j] += av * brow[j];
      }
    }
  }
}

}  // namespace riskdiff::ad::kernels

#endif  // RISKDIFF__AUTODIFF__KERNELS_HPP_

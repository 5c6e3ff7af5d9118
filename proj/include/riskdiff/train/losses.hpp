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

#ifndef RISKDIFF__TRAIN__LOSSES_HPP_
#define RISKDIFF__TRAIN__LOSSES_HPP_

#include "riskdiff/autodiff/ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace riskdiff::train
{

/// Element-wise Huber on pred - gt, averaged over all elements.
template <class T>
ad::Tensor<T> huber_traj_loss(const ad::Tensor<T> & pred, const ad::Tensor<T> & gt, T delta)
{
  if (pred.shape() != gt.shape()) {
    throw std::invalid_argument(
      "huber_traj_loss: prediction " + ad::shape_str(pred.shape()) + " vs ground truth " +
      ad::shape_str(gt.shape()));
  }
  return ad::mean(ad::huber(ad::sub(pred, gt), delta));
}

/// L_diff + L_traj + lambda_conf * L_conf
template <class T>
ad::Tensor<T> total_loss(
  const ad::Tensor<T> & l_diff, const ad::Tensor<T> & l_traj, const ad::Tensor<T> & l_conf,
  T lambda_conf)
{
  for (const auto * t : {&l_diff, &l_traj, &l_conf}) {
    if (t->size() != 1 || !std::isfinite(static_cast<double>(t->item()))) {
      throw std::invalid_argument("total_loss: components must be finite scalars");
    }
  }
  return ad::add(ad::add(l_diff, l_traj), ad::scale(l_conf, lambda_conf));
}

}  // namespace riskdiff::train

#endif  // RISKDIFF__TRAIN__LOSSES_HPP_

// SPDX-License-Identifier: Apache-2.0
//
// Copyright (C) 2026 The nrxsim authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <stdexcept>

#include "nrx/ad/ops.hpp"

namespace nrx::ad {

/// Mean binary cross-entropy between logits z (LLRs, positive favours bit 1)
/// and bit labels: mean of ln(1 + exp(-(2b-1) z)). With a mask, only
/// elements with mask == 1 enter the mean and the remaining logits receive an
/// exactly zero gradient.
template <typename Scalar>
Var<Scalar> bce_with_logits(const Var<Scalar>& logits, const Tensor<Scalar>& bits, const Tensor<Scalar>* mask = nullptr) {
  const auto& z = logits.value();
  if (z.shape() != bits.shape()) detail::shape_error("bce_with_logits", z.shape(), bits.shape());
  if (mask && mask->shape() != z.shape()) detail::shape_error("bce_with_logits(mask)", z.shape(), mask->shape());
  if (((bits.values() != Scalar(0)) && (bits.values() != Scalar(1))).any()) {
    throw std::invalid_argument("bce_with_logits: labels must be 0 or 1");
  }
  Tensor<Scalar> weight = mask ? *mask : Tensor<Scalar>::constant(z.shape(), Scalar(1));
  if (((weight.values() != Scalar(0)) && (weight.values() != Scalar(1))).any()) {
    throw std::invalid_argument("bce_with_logits: mask must be 0 or 1");
  }
  const Scalar count = weight.values().sum();
  // u = -(2b - 1) z; softplus(u) = max(u, 0) + log1p(exp(-|u|)).
  const auto sign = Scalar(1) - Scalar(2) * bits.values();
  const auto u = (sign * z.values()).eval();
  const auto softplus = (u.max(Scalar(0)) + (-u.abs()).exp().log1p()).eval();
  Tensor<Scalar> out(Shape{});
  out[0] = count > 0 ? (softplus * weight.values()).sum() / count : Scalar(0);
  const Scalar inv = count > 0 ? Scalar(1) / count : Scalar(0);
  return logits.tape().record(
      "bce_with_logits", std::move(out), {logits.id()},
      [inv](Tape<Scalar>& t, int self) {
        const int iz = t.inputs(self)[0];
        if (!t.requires_grad(iz)) return;
        const auto& b = t.saved(self)[0].values();
        const auto& w = t.saved(self)[1].values();
        const auto& zv = t.value(iz).values();
        const Scalar g = t.grad_buffer(self)[0] * inv;
        // d/dz = sigmoid(z) - b
        const auto sig = (Scalar(1) / (Scalar(1) + (-zv).exp())).eval();
        t.grad_buffer(iz).values() += (w != Scalar(0)).select((sig - b) * g, Scalar(0));
      },
      {bits, std::move(weight)});
}

/// Mean squared difference over all real components.
template <typename Scalar>
Var<Scalar> mse(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.shape() != b.shape()) detail::shape_error("mse", a.shape(), b.shape());
  auto d = sub(a, b);
  return mean(multiply(d, d));
}

}  // namespace nrx::ad

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
#include <cstdint>
#include <stdexcept>
#include <string>

#include "nrx/ad/tensor.hpp"

namespace nrx::ad {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename Scalar>
struct AdamState {
  AdamHyper hyper;
  std::int64_t step = 0;
  NamedTensors<Scalar> m;
  NamedTensors<Scalar> v;
};

/// One bias-corrected Adam update of every parameter that has a gradient.
/// Parameters without an entry in \p grads are left untouched.
template <typename Scalar>
void adam_step(NamedTensors<Scalar>& params, const NamedTensors<Scalar>& grads, AdamState<Scalar>& state) {
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument("adam_step: gradient for unknown parameter '" + name + "'");
    if (it->second.shape() != g.shape()) {
      throw std::invalid_argument("adam_step: gradient shape " + to_string(g.shape()) + " does not match parameter '" +
                                  name + "' " + to_string(it->second.shape()));
    }
    if (!g.all_finite()) throw std::runtime_error("adam_step: non-finite gradient for parameter '" + name + "'");
  }
  ++state.step;
  const auto& h = state.hyper;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (const auto& [name, g] : grads) {
    auto& p = params.at(name);
    auto& m = state.m.try_emplace(name, Tensor<Scalar>(p.shape())).first->second.values();
    auto& v = state.v.try_emplace(name, Tensor<Scalar>(p.shape())).first->second.values();
    m = Scalar(h.beta1) * m + Scalar(1 - h.beta1) * g.values();
    v = Scalar(h.beta2) * v + Scalar(1 - h.beta2) * g.values().square();
    const auto m_hat = m / Scalar(c1);
    const auto v_hat = v / Scalar(c2);
    p.values() -= Scalar(h.lr) * m_hat / (v_hat.sqrt() + Scalar(h.epsilon));
  }
}

}  // namespace nrx::ad

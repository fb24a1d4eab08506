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
#include <random>

#include "nrx/ad/tensor.hpp"

namespace nrx::ad {

/// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
template <typename Scalar>
Tensor<Scalar> glorot_uniform(Shape shape, std::int64_t fan_in, std::int64_t fan_out, std::mt19937_64& engine) {
  Tensor<Scalar> t(std::move(shape));
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(dist(engine));
  return t;
}

}  // namespace nrx::ad

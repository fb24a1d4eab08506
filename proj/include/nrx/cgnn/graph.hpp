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

#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "nrx/ad/ops.hpp"
#include "nrx/ad/tape.hpp"
#include "nrx/cgnn/config.hpp"

namespace nrx::cgnn {

template <typename Scalar>
using Params = std::map<std::string, ad::Var<Scalar>>;

/// Puts the weights on a tape, as trainable parameters or as constants.
template <typename Scalar>
Params<Scalar> bind(ad::Tape<Scalar>& tape, const ad::NamedTensors<Scalar>& weights, bool trainable) {
  Params<Scalar> p;
  for (const auto& [name, t] : weights) p.emplace(name, trainable ? tape.parameter(t) : tape.constant(t));
  return p;
}

namespace detail {

template <typename Scalar>
const ad::Var<Scalar>& param(const Params<Scalar>& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) throw std::invalid_argument("missing NRX weight '" + name + "'");
  return it->second;
}

template <typename Scalar>
ad::Var<Scalar> conv(const Params<Scalar>& p, const std::string& prefix, const ad::Var<Scalar>& x) {
  return ad::add(ad::conv2d(x, param(p, prefix + ".kernel")), param(p, prefix + ".bias"));
}

template <typename Scalar>
ad::Var<Scalar> dense(const Params<Scalar>& p, const std::string& prefix, const ad::Var<Scalar>& x) {
  return ad::add(ad::matmul(x, param(p, prefix + ".weight")), param(p, prefix + ".bias"));
}

/// dense -> ReLU -> dense, applied per RE.
template <typename Scalar>
ad::Var<Scalar> mlp(const Params<Scalar>& p, const std::string& prefix, const ad::Var<Scalar>& x) {
  return dense(p, prefix + ".dense2", ad::relu(dense(p, prefix + ".dense1", x)));
}

/// conv1 -> ReLU -> conv2 -> ... -> convL, as many layers as the weights hold.
template <typename Scalar>
ad::Var<Scalar> conv_stack(const Params<Scalar>& p, const std::string& prefix, const ad::Var<Scalar>& x) {
  auto y = conv(p, prefix + ".conv1", x);
  for (int l = 2; p.count(prefix + ".conv" + std::to_string(l) + ".kernel"); ++l) {
    y = conv(p, prefix + ".conv" + std::to_string(l), ad::relu(y));
  }
  return y;
}

/// Rows of `modulation` grouped by order, in ascending order of m.
inline std::map<int, std::vector<std::int64_t>> rows_by_modulation(const std::vector<int>& modulation) {
  std::map<int, std::vector<std::int64_t>> out;
  for (std::size_t i = 0; i < modulation.size(); ++i) out[modulation[i]].push_back(static_cast<std::int64_t>(i));
  return out;
}

}  // namespace detail

/// Initial states [G, S, T, d_S] from the input planes.
template <typename Scalar>
ad::Var<Scalar> state_init(const NrxConfig& cfg, const Params<Scalar>& p, const ad::Var<Scalar>& features,
                           const std::vector<int>& modulation) {
  if (cfg.variant != Variant::var_io) return detail::conv_stack(p, "state_init", features);
  const auto groups = detail::rows_by_modulation(modulation);
  for (const auto& [m, rows] : groups) {
    if (!cfg.supports_modulation(m)) throw std::invalid_argument("state_init: unsupported modulation order " + std::to_string(m));
  }
  if (groups.size() == 1) return detail::conv_stack(p, "state_init" + io_suffix(cfg, groups.begin()->first), features);
  std::vector<ad::Var<Scalar>> parts;
  std::vector<std::int64_t> inverse(modulation.size());
  std::int64_t pos = 0;
  for (const auto& [m, rows] : groups) {
    parts.push_back(detail::conv_stack(p, "state_init" + io_suffix(cfg, m), ad::select_rows(features, rows)));
    for (auto r : rows) inverse[static_cast<std::size_t>(r)] = pos++;
  }
  return ad::select_rows(ad::concat_rows<Scalar>(parts), inverse);
}

/// One message-passing step. All UEs are updated from the same pre-update
/// states; the update is added to the state (residual form).
template <typename Scalar>
ad::Var<Scalar> cgnn_iteration(const Params<Scalar>& p, const ad::Var<Scalar>& state, const ad::Var<Scalar>& position,
                               const std::vector<int>& group) {
  const auto messages = detail::mlp(p, "iteration.message", state);
  const auto aggregate = ad::sum_others(messages, group);
  const auto update = detail::conv_stack(p, "iteration.update", ad::concat({state, aggregate, position}));
  return ad::add(state, update);
}

/// LLR logits [G_m, S, T, width] for the images `rows` (all when var_io is off).
template <typename Scalar>
ad::Var<Scalar> readout_llrs(const NrxConfig& cfg, const Params<Scalar>& p, const ad::Var<Scalar>& state, int m) {
  return detail::mlp(p, "readout_llr" + io_suffix(cfg, m), state);
}

/// Refined channel estimates [G, S, T, 2B].
template <typename Scalar>
ad::Var<Scalar> readout_chest(const Params<Scalar>& p, const ad::Var<Scalar>& state) {
  return detail::mlp(p, "readout_chest", state);
}

template <typename Scalar>
struct LlrBlock {
  int modulation = 0;              // 0: every image, width m_max
  std::vector<std::int64_t> rows;  // image indices covered by `logits`
  ad::Var<Scalar> logits;
};

template <typename Scalar>
struct Readout {
  ad::Var<Scalar> chest;
  std::vector<LlrBlock<Scalar>> llrs;
};

/// Runs `depth` iterations. With every_iteration set, readouts follow each
/// iteration (multi-loss training); otherwise only the last one.
template <typename Scalar>
std::vector<Readout<Scalar>> forward(const NrxConfig& cfg, const Params<Scalar>& p, const BatchInput<Scalar>& in,
                                     int depth, bool every_iteration) {
  if (depth < 1 || depth > cfg.n_it) {
    throw std::invalid_argument("NRX depth " + std::to_string(depth) + " outside [1, " + std::to_string(cfg.n_it) + "]");
  }
  for (int m : in.modulation) {
    if (!cfg.supports_modulation(m)) throw std::invalid_argument("NRX: unsupported modulation order " + std::to_string(m));
  }
  auto& tape = p.begin()->second.tape();
  const auto features = tape.constant(in.features);
  const auto position = tape.constant(in.position);
  auto state = state_init(cfg, p, features, in.modulation);
  const auto groups = detail::rows_by_modulation(in.modulation);
  std::vector<Readout<Scalar>> out;
  for (int it = 1; it <= depth; ++it) {
    state = cgnn_iteration(p, state, position, in.group);
    if (!every_iteration && it < depth) continue;
    Readout<Scalar> r;
    r.chest = readout_chest(p, state);
    if (cfg.variant == Variant::var_io) {
      for (const auto& [m, rows] : groups) {
        const auto s = groups.size() == 1 ? state : ad::select_rows(state, rows);
        r.llrs.push_back({m, rows, readout_llrs(cfg, p, s, m)});
      }
    } else {
      std::vector<std::int64_t> all(static_cast<std::size_t>(in.images()));
      std::iota(all.begin(), all.end(), 0);
      r.llrs.push_back({0, std::move(all), readout_llrs(cfg, p, state, cfg.m_max())});
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace nrx::cgnn

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

#include "nrx/cgnn/config.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <stdexcept>

#include "nrx/ad/init.hpp"

namespace nrx::cgnn {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::single:
      return "single";
    case Variant::masking:
      return "masking";
    case Variant::var_io:
      return "var_io";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  if (name == "single") return Variant::single;
  if (name == "masking") return Variant::masking;
  if (name == "var_io") return Variant::var_io;
  throw std::invalid_argument("unknown NRX variant '" + name + "' (single, masking, var_io)");
}

void NrxConfig::resolve(const phy::McsTable& table) {
  std::set<int> m;
  for (int i : mcs_indices) m.insert(table.at(i).modulation_order);
  modulations.assign(m.begin(), m.end());
  validate();
}

void NrxConfig::validate() const {
  if (d_s < 4) throw std::invalid_argument("NRX d_S must be >= 4");
  if (n_it < 1) throw std::invalid_argument("NRX N_it must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("NRX kernel size must be odd");
  if (layers < 1) throw std::invalid_argument("NRX needs at least one conv layer per block");
  if (mlp_hidden < 0) throw std::invalid_argument("NRX MLP hidden width must be >= 0");
  if (bs_antennas < 1) throw std::invalid_argument("NRX needs at least one BS antenna");
  if (mcs_indices.empty() || modulations.empty()) throw std::invalid_argument("NRX supported MCS set is empty");
  for (int m : modulations) {
    if (m != 2 && m != 4 && m != 6) throw std::invalid_argument("NRX supports modulation orders 2, 4, 6");
  }
  if (variant == Variant::single && modulations.size() != 1) {
    throw std::invalid_argument("single-MCS NRX must support exactly one modulation order");
  }
}

bool NrxConfig::supports_mcs(int index) const {
  return std::find(mcs_indices.begin(), mcs_indices.end(), index) != mcs_indices.end();
}

bool NrxConfig::supports_modulation(int m) const {
  if (variant == Variant::masking) return m <= m_max() && m % 2 == 0 && m >= 2;
  return std::find(modulations.begin(), modulations.end(), m) != modulations.end();
}

std::string io_suffix(const NrxConfig& cfg, int m) {
  return cfg.variant == Variant::var_io ? ".m" + std::to_string(m) : "";
}

namespace {

void add_conv(std::map<std::string, ad::Shape>& s, const std::string& prefix, int k, int cin, int cout) {
  s[prefix + ".kernel"] = {k, k, cin, cout};
  s[prefix + ".bias"] = {cout};
}

void add_dense(std::map<std::string, ad::Shape>& s, const std::string& prefix, int in, int out) {
  s[prefix + ".weight"] = {in, out};
  s[prefix + ".bias"] = {out};
}

}  // namespace

std::map<std::string, ad::Shape> parameter_shapes(const NrxConfig& cfg) {
  cfg.validate();
  std::map<std::string, ad::Shape> s;
  const int d = cfg.d_s;
  const int h = cfg.hidden();
  const int k = cfg.kernel;
  auto conv_stack = [&](const std::string& prefix, int cin) {
    for (int l = 1; l <= cfg.layers; ++l) add_conv(s, prefix + ".conv" + std::to_string(l), k, l == 1 ? cin : d, d);
  };
  auto mlp = [&](const std::string& prefix, int out) {
    add_dense(s, prefix + ".dense1", d, h);
    add_dense(s, prefix + ".dense2", h, out);
  };
  std::vector<int> io_mods = cfg.variant == Variant::var_io ? cfg.modulations : std::vector<int>{cfg.m_max()};
  for (int m : io_mods) {
    const auto sfx = io_suffix(cfg, m);
    conv_stack("state_init" + sfx, cfg.input_channels());
    mlp("readout_llr" + sfx, cfg.llr_width(m));
  }
  mlp("iteration.message", d);
  conv_stack("iteration.update", 2 * d + 2);
  mlp("readout_chest", 2 * cfg.bs_antennas);
  return s;
}

Weights init_weights(const NrxConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  Weights w;
  for (const auto& [name, shape] : parameter_shapes(cfg)) {
    if (shape.size() == 1) {
      w.emplace(name, ad::Tensor<float>(shape));
    } else if (shape.size() == 4) {
      w.emplace(name, ad::glorot_uniform<float>(shape, shape[0] * shape[1] * shape[2], shape[0] * shape[1] * shape[3], eng));
    } else {
      w.emplace(name, ad::glorot_uniform<float>(shape, shape[0], shape[1], eng));
    }
  }
  return w;
}

std::int64_t parameter_count(const Weights& w) { return ad::total_size(w); }

std::int64_t active_parameter_count(const NrxConfig& cfg, const Weights& w, int m) {
  if (!cfg.supports_modulation(m)) throw std::invalid_argument("active_parameter_count: unsupported modulation");
  std::int64_t n = 0;
  for (const auto& [name, t] : w) {
    bool other_io = false;
    if (cfg.variant == Variant::var_io) {
      for (int k : cfg.modulations) {
        if (k == m) continue;
        const auto sfx = io_suffix(cfg, k) + ".";
        other_io = other_io || name.rfind("state_init" + sfx, 0) == 0 || name.rfind("readout_llr" + sfx, 0) == 0;
      }
    }
    if (!other_io) n += t.size();
  }
  return n;
}

PosEncoding positional_encoding(const phy::SlotConfig& cfg, int ue, bool freq_position) {
  std::vector<int> comb;
  const int tp0 = cfg.pilot_symbols.empty() ? -1 : cfg.pilot_symbols.front();
  if (tp0 < 0) throw std::invalid_argument("positional_encoding: no pilot symbols");
  for (int s = 0; s < cfg.num_subcarriers; ++s) {
    if (phy::re_kind(cfg, ue, s, tp0) == phy::ReKind::pilot) comb.push_back(s);
  }
  if (comb.empty()) throw std::invalid_argument("positional_encoding: UE has no pilot subcarriers");
  PosEncoding pe(cfg.num_res(), 2);
  for (int s = 0; s < cfg.num_subcarriers; ++s) {
    int df = cfg.num_subcarriers;
    for (int sp : comb) df = std::min(df, std::abs(s - sp));
    for (int t = 0; t < cfg.num_symbols; ++t) {
      int dt = cfg.num_symbols;
      for (int tp : cfg.pilot_symbols) dt = std::min(dt, std::abs(t - tp));
      pe(s * cfg.num_symbols + t, 0) = static_cast<double>(dt) / cfg.num_symbols;
      pe(s * cfg.num_symbols + t, 1) = freq_position ? static_cast<double>(df) / cfg.num_subcarriers : 0.0;
    }
  }
  return pe;
}

Eigen::VectorXd mask_llrs(const Eigen::VectorXd& llrs, int width, int m) {
  if (m > width || m < 1) {
    throw std::invalid_argument("mask_llrs: target order " + std::to_string(m) + " exceeds output width " +
                                std::to_string(width));
  }
  if (llrs.size() % width != 0) throw std::invalid_argument("mask_llrs: length is not a multiple of the width");
  const auto n = llrs.size() / width;
  Eigen::VectorXd out(n * m);
  for (Eigen::Index i = 0; i < n; ++i) out.segment(i * m, m) = llrs.segment(i * width, m);
  return out;
}

}  // namespace nrx::cgnn

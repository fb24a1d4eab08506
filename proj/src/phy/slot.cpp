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

#include "nrx/phy/slot.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>

namespace nrx::phy {

void SlotConfig::validate() const {
  if (num_subcarriers < 1 || num_symbols < 1) throw std::invalid_argument("slot: empty resource grid");
  if (pilot_symbols.empty()) throw std::invalid_argument("slot: no pilot symbols configured");
  for (int t : pilot_symbols) {
    if (t < 0 || t >= num_symbols) throw std::invalid_argument("slot: pilot symbol " + std::to_string(t) + " outside [0, T)");
  }
  if (max_ues < 1 || comb_size < max_ues) throw std::invalid_argument("slot: pilot comb must have one offset per UE");
  if (bs_antennas < 1 || ue_antennas < 1) throw std::invalid_argument("slot: antenna counts must be positive");
  for (std::size_t u = 0; u < beams.size(); ++u) {
    if (beams[u].size() != ue_antennas) throw std::invalid_argument("slot: beam length differs from UE antenna count");
    if (std::abs(beams[u].norm() - 1.0) > 1e-9) throw std::invalid_argument("slot: beam vectors must have unit norm");
  }
}

CVector SlotConfig::beam(int ue) const {
  if (ue >= 0 && static_cast<std::size_t>(ue) < beams.size()) return beams[static_cast<std::size_t>(ue)];
  return CVector::Constant(ue_antennas, cd(1.0 / std::sqrt(static_cast<double>(ue_antennas)), 0.0));
}

bool SlotConfig::is_pilot_symbol(int t) const {
  return std::find(pilot_symbols.begin(), pilot_symbols.end(), t) != pilot_symbols.end();
}

ReKind re_kind(const SlotConfig& cfg, int ue, int s, int t) {
  if (!cfg.is_pilot_symbol(t)) return ReKind::data;
  return s % cfg.comb_size == ue % cfg.comb_size ? ReKind::pilot : ReKind::null;
}

std::vector<std::pair<int, int>> data_positions(const SlotConfig& cfg) {
  std::vector<std::pair<int, int>> out;
  for (int t = 0; t < cfg.num_symbols; ++t) {
    if (cfg.is_pilot_symbol(t)) continue;
    for (int s = 0; s < cfg.num_subcarriers; ++s) out.emplace_back(s, t);
  }
  return out;
}

int data_re_count(const SlotConfig& cfg) {
  const std::set<int> pilots(cfg.pilot_symbols.begin(), cfg.pilot_symbols.end());
  return cfg.num_subcarriers * (cfg.num_symbols - static_cast<int>(pilots.size()));
}

PilotBook make_pilots(const SlotConfig& cfg, int ue, std::uint64_t slot_seed) {
  PilotBook book;
  book.ue = ue;
  book.values = CMatrix::Zero(cfg.num_subcarriers, cfg.num_symbols);
  std::uint64_t x = mix_seed(slot_seed, static_cast<std::uint64_t>(ue)) | 1u;
  auto next = [&x] {
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    return x * 0x2545F4914F6CDD1Dull;
  };
  const double a = 1.0 / std::sqrt(2.0);
  for (int t = 0; t < cfg.num_symbols; ++t) {
    for (int s = 0; s < cfg.num_subcarriers; ++s) {
      if (re_kind(cfg, ue, s, t) != ReKind::pilot) continue;
      const std::uint64_t r = next();
      const double re = (r >> 63) ? -a : a;
      const double im = ((r >> 62) & 1) ? -a : a;
      book.values(s, t) = cd(re, im);
      book.positions.emplace_back(s, t);
    }
  }
  return book;
}

int payload_length(const SlotConfig& cfg, const McsEntry& mcs, CodeBook& codes) {
  return codes.get(data_re_count(cfg) * mcs.modulation_order, mcs.code_rate)->k();
}

std::vector<UeSlot> assemble_slot(const SlotConfig& cfg, std::span<const UeAssignment> ues,
                                  std::span<const std::vector<std::uint8_t>> payloads, CodeBook& codes,
                                  std::uint64_t slot_seed) {
  cfg.validate();
  if (ues.size() != payloads.size()) throw std::invalid_argument("assemble_slot: one payload per UE required");
  const auto positions = data_positions(cfg);
  std::set<int> seen;
  std::vector<UeSlot> out;
  for (std::size_t i = 0; i < ues.size(); ++i) {
    const auto& a = ues[i];
    if (a.ue < 0 || a.ue >= cfg.max_ues || !seen.insert(a.ue).second) {
      throw std::invalid_argument("assemble_slot: invalid or duplicate UE index " + std::to_string(a.ue));
    }
    const auto constellation = Constellation::qam(a.mcs.modulation_order);
    const auto code = codes.get(static_cast<int>(positions.size()) * a.mcs.modulation_order, a.mcs.code_rate);
    if (static_cast<int>(payloads[i].size()) != code->k()) {
      throw std::invalid_argument("assemble_slot: UE " + std::to_string(a.ue) + " payload has " +
                                  std::to_string(payloads[i].size()) + " bits, MCS " + std::to_string(a.mcs.index) +
                                  " needs " + std::to_string(code->k()));
    }
    UeSlot slot;
    slot.ue = a.ue;
    slot.mcs = a.mcs;
    slot.payload = payloads[i];
    slot.coded_bits = code->encode(slot.payload);
    const auto symbols = modulate(slot.coded_bits, constellation);
    slot.grid.symbols = CMatrix::Zero(cfg.num_subcarriers, cfg.num_symbols);
    slot.grid.kinds.resize(static_cast<std::size_t>(cfg.num_res()));
    for (int s = 0; s < cfg.num_subcarriers; ++s) {
      for (int t = 0; t < cfg.num_symbols; ++t) {
        slot.grid.kinds[static_cast<std::size_t>(s * cfg.num_symbols + t)] = re_kind(cfg, a.ue, s, t);
      }
    }
    for (std::size_t j = 0; j < positions.size(); ++j) slot.grid.symbols(positions[j].first, positions[j].second) = symbols[j];
    slot.pilots = make_pilots(cfg, a.ue, slot_seed);
    for (const auto& [s, t] : slot.pilots.positions) slot.grid.symbols(s, t) = slot.pilots.values(s, t);
    out.push_back(std::move(slot));
  }
  return out;
}

}  // namespace nrx::phy

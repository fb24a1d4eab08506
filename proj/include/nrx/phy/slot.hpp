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

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "nrx/common.hpp"
#include "nrx/phy/constellation.hpp"
#include "nrx/phy/ldpc.hpp"
#include "nrx/phy/mcs.hpp"

namespace nrx::phy {

/// Resource-grid and antenna configuration of one uplink slot.
struct SlotConfig {
  int num_subcarriers = 24;
  int num_symbols = 14;
  std::vector<int> pilot_symbols{2, 11};
  int comb_size = 2;
  int max_ues = 2;
  int bs_antennas = 4;
  int ue_antennas = 2;
  double subcarrier_spacing_hz = 30e3;
  /// Per-UE precoders; UEs without an entry use the all-ones beam / sqrt(N_u).
  std::vector<CVector> beams;

  void validate() const;
  CVector beam(int ue) const;
  bool is_pilot_symbol(int t) const;
  /// Cyclic-prefix duration (normal CP, 144/2048 of the useful symbol).
  double cyclic_prefix_s() const { return 144.0 / 2048.0 / subcarrier_spacing_hz; }
  /// OFDM symbol duration including the cyclic prefix.
  double symbol_duration_s() const { return (1.0 + 144.0 / 2048.0) / subcarrier_spacing_hz; }
  int num_res() const { return num_subcarriers * num_symbols; }
};

enum class ReKind : std::uint8_t { data, pilot, null };

/// Kind of RE (s, t) for a UE. Pilot symbols carry no data for any UE; UE u
/// owns the pilot comb s = u (mod comb_size).
ReKind re_kind(const SlotConfig& cfg, int ue, int s, int t);

/// Data REs in mapping order: subcarrier index runs fastest, then symbol.
std::vector<std::pair<int, int>> data_positions(const SlotConfig& cfg);
int data_re_count(const SlotConfig& cfg);

/// Symbols of one stream over the S x T grid together with the RE kinds.
struct ResourceGrid {
  CMatrix symbols;            // S x T
  std::vector<ReKind> kinds;  // s * T + t
  ReKind kind(int s, int t) const { return kinds[static_cast<std::size_t>(s * symbols.cols() + t)]; }
};

/// Known DMRS of one UE.
struct PilotBook {
  int ue = 0;
  CMatrix values;  // S x T, zero outside the UE's pilot REs
  std::vector<std::pair<int, int>> positions;
};

/// Unit-modulus QPSK pilots from a per-(slot, UE) seeded xorshift sequence.
PilotBook make_pilots(const SlotConfig& cfg, int ue, std::uint64_t slot_seed);

struct UeAssignment {
  int ue = 0;
  McsEntry mcs;
};

struct UeSlot {
  int ue = 0;
  McsEntry mcs;
  std::vector<std::uint8_t> payload;
  std::vector<std::uint8_t> coded_bits;  // labels, in data-RE mapping order
  ResourceGrid grid;
  PilotBook pilots;
};

/// Payload size implied by the data-RE count and the MCS.
int payload_length(const SlotConfig& cfg, const McsEntry& mcs, CodeBook& codes);

/// Encodes and maps every UE's payload onto its resource grid.
std::vector<UeSlot> assemble_slot(const SlotConfig& cfg, std::span<const UeAssignment> ues,
                                  std::span<const std::vector<std::uint8_t>> payloads, CodeBook& codes,
                                  std::uint64_t slot_seed);

/// Antenna-domain transmit vector v * x.
inline CVector beamform(cd symbol, const CVector& v) { return v * symbol; }

}  // namespace nrx::phy

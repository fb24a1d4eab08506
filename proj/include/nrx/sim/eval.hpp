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
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nrx/channel/channel.hpp"
#include "nrx/phy/mcs.hpp"
#include "nrx/sim/link.hpp"

namespace nrx::sim {

struct EvalConfig {
  std::vector<double> snr_db;
  int min_block_errors = 200;
  int max_blocks = 20000;
  /// Points above the first one with TBLER below this floor are skipped (0 disables).
  double skip_below_tbler = 0.0;
  std::vector<int> mcs_indices{14, 14};  // per UE
  std::uint64_t seed = 0;
  int threads = 1;
  /// Slots evaluated per scheduling round; part of the result definition.
  int chunk = 16;

  void validate() const;
};

struct MetricsRecord {
  std::string receiver;
  double snr_db = 0.0;
  std::int64_t blocks = 0, block_errors = 0, bit_errors = 0, bits = 0;
  double tbler() const { return blocks ? static_cast<double>(block_errors) / static_cast<double>(blocks) : 0.0; }
  double ber() const { return bits ? static_cast<double>(bit_errors) / static_cast<double>(bits) : 0.0; }
  bool operator==(const MetricsRecord&) const = default;
};

/// Monte-Carlo TBLER of every receiver over the SNR grid. All receivers see
/// the same slots; slot n of SNR point i is seeded by (seed, i, n) so the
/// result does not depend on the thread count.
std::vector<MetricsRecord> evaluate_tbler(const EvalConfig& cfg, const phy::SlotConfig& slot,
                                          const phy::McsTable& table, const channel::ChannelSource& source,
                                          std::span<const Receiver* const> receivers);

struct SnrAtTarget {
  double snr_db = 0.0;
  double sigma_db = 0.0;  // delta-method standard deviation
};

/// SNR where log10(TBLER) crosses \p target, interpolated linearly between
/// the first bracketing pair of points. Points with zero errors count as
/// half an error.
SnrAtTarget snr_at_tbler(std::span<const MetricsRecord> curve, double target = 0.1);

/// Records of one receiver, in SNR order.
std::vector<MetricsRecord> curve_of(std::span<const MetricsRecord> records, const std::string& receiver);

void write_metrics_csv(std::ostream& out, std::span<const MetricsRecord> records);

}  // namespace nrx::sim

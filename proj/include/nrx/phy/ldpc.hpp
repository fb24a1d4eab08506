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
#include <mutex>
#include <map>
#include <span>
#include <vector>

namespace nrx::phy {

struct DecodeResult {
  std::vector<std::uint8_t> info;
  bool success = false;
  int iterations = 0;
};

/// Binary LDPC code with a systematic GF(2) encoder, optional puncturing of
/// parity bits and shortening of information bits.
///
/// The transmitted word lists all mother-code positions that are neither
/// punctured nor shortened, in increasing position order.
class LdpcCode {
 public:
  /// \p checks lists, per parity check, the participating variable indices.
  LdpcCode(int n, std::vector<std::vector<int>> checks);

  static LdpcCode from_alist(std::istream& in);
  void write_alist(std::ostream& out) const;

  /// Column-weight-regular code with balanced row degrees, built greedily
  /// while avoiding length-4 cycles where possible.
  static LdpcCode regular(int n, int num_checks, int column_weight, std::uint64_t seed);
  /// Rate-1/2 (3,6)-regular code with n = 648, k = 324.
  static LdpcCode default_code();
  /// Rate-1/2 mother code sized so that, after puncturing (rate above 1/2) or
  /// shortening (rate below 1/2), it carries round(rate * coded_bits) payload
  /// bits in exactly \p coded_bits transmitted bits.
  static LdpcCode for_block(int coded_bits, double rate, std::uint64_t seed = 0x1D9C);

  int n() const { return n_; }
  int num_checks() const { return static_cast<int>(checks_.size()); }
  int rank() const { return static_cast<int>(pivot_columns_.size()); }
  /// Number of payload bits (mother dimension minus shortened bits).
  int k() const { return static_cast<int>(payload_positions_.size()); }
  int transmitted_length() const { return static_cast<int>(transmitted_positions_.size()); }
  double rate() const { return static_cast<double>(k()) / transmitted_length(); }
  const std::vector<int>& punctured() const { return punctured_; }
  const std::vector<int>& shortened() const { return shortened_; }
  const std::vector<std::vector<int>>& checks() const { return checks_; }

  /// Punctures parity positions and shortens information positions, both
  /// chosen evenly spread. Resets any earlier adjustment.
  void adjust(int num_punctured, int num_shortened);

  /// Full mother codeword for the given payload.
  std::vector<std::uint8_t> encode_full(std::span<const std::uint8_t> payload) const;
  /// Transmitted bits for the given payload.
  std::vector<std::uint8_t> encode(std::span<const std::uint8_t> payload) const;
  bool satisfies_parity(std::span<const std::uint8_t> codeword) const;

  /// Scaled min-sum decoding. \p llrs are logits ln(P(b=1)/P(b=0)) of the
  /// transmitted bits; punctured bits enter as erasures and shortened bits
  /// as known zeros. Stops early once all parity checks hold.
  DecodeResult decode(std::span<const double> llrs, int max_iterations = 20, double scaling = 0.8) const;

 private:
  void build_encoder();

  int n_ = 0;
  std::vector<std::vector<int>> checks_;
  std::vector<int> pivot_columns_;                 // parity positions, one per independent check
  std::vector<int> info_columns_;                  // free positions
  std::vector<std::vector<std::uint64_t>> parity_rows_;  // parity bit r = <row r, info bits>
  std::vector<int> punctured_;
  std::vector<int> shortened_;
  std::vector<int> payload_positions_;
  std::vector<int> transmitted_positions_;
  // decoder graph (edge-indexed)
  std::vector<int> edge_var_;
  std::vector<int> check_offset_;
};

/// Thread-safe cache of block codes keyed by (coded bits, payload bits).
class CodeBook {
 public:
  std::shared_ptr<const LdpcCode> get(int coded_bits, double rate);

 private:
  std::mutex mutex_;
  std::map<std::pair<int, int>, std::shared_ptr<const LdpcCode>> codes_;
};

}  // namespace nrx::phy

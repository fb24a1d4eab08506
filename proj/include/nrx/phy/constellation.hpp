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
#include <vector>

#include "nrx/common.hpp"

namespace nrx::phy {

/// Unit-energy Gray-labelled square QAM.
///
/// Labels are integers whose most significant bit is label position 0. The
/// first two positions select the quadrant (they equal the QPSK label of that
/// quadrant), positions 2-3 the sub-quadrant, and so on, so the label of the
/// order-m' constellation a point "belongs to" is the prefix of length m'.
class Constellation {
 public:
  /// Builds QPSK (2), 16-QAM (4) or 64-QAM (6).
  static Constellation qam(int bits_per_symbol);
  /// Shared immutable instance of qam(m).
  static const Constellation& standard(int bits_per_symbol);

  int bits_per_symbol() const { return bits_; }
  int size() const { return static_cast<int>(points_.size()); }
  const std::vector<cd>& points() const { return points_; }
  cd point(int label) const { return points_[static_cast<std::size_t>(label)]; }

  /// Bit at label position \p position (0 = first quadrant bit).
  int bit(int label, int position) const { return (label >> (bits_ - 1 - position)) & 1; }

  int label(std::span<const std::uint8_t> bits) const;
  cd map(std::span<const std::uint8_t> bits) const { return point(label(bits)); }
  int nearest(cd y) const;

  /// Amplitude normalization, e.g. 1/sqrt(10) for 16-QAM.
  double scale() const { return scale_; }

 private:
  int bits_ = 0;
  double scale_ = 1.0;
  std::vector<cd> points_;
};

/// Maps coded bits (length multiple of m) to symbols.
std::vector<cd> modulate(std::span<const std::uint8_t> bits, const Constellation& c);

}  // namespace nrx::phy

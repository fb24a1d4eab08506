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

#include "nrx/phy/constellation.hpp"

#include <limits>
#include <stdexcept>
#include <string>

namespace nrx::phy {

namespace {

// Amplitude along one axis from that axis' label bits c0 (sign), c1, ...:
// magnitude = 2^(L-1) - (1 - 2 c1) * magnitude(c2, ...), base magnitude 1.
int axis_amplitude(const std::vector<int>& c) {
  int mag = 1;
  const int levels = static_cast<int>(c.size());
  for (int j = levels - 1; j >= 1; --j) mag = (1 << (levels - j)) - (1 - 2 * c[static_cast<std::size_t>(j)]) * mag;
  return (1 - 2 * c[0]) * mag;
}

}  // namespace

const Constellation& Constellation::standard(int bits_per_symbol) {
  static const Constellation table[] = {qam(2), qam(4), qam(6)};
  if (bits_per_symbol != 2 && bits_per_symbol != 4 && bits_per_symbol != 6) {
    throw std::invalid_argument("unsupported modulation order " + std::to_string(bits_per_symbol));
  }
  return table[bits_per_symbol / 2 - 1];
}

Constellation Constellation::qam(int bits_per_symbol) {
  if (bits_per_symbol != 2 && bits_per_symbol != 4 && bits_per_symbol != 6) {
    throw std::invalid_argument("unsupported modulation order " + std::to_string(bits_per_symbol) +
                                " (expected 2, 4 or 6)");
  }
  Constellation c;
  c.bits_ = bits_per_symbol;
  const int levels = bits_per_symbol / 2;
  const int count = 1 << bits_per_symbol;
  c.points_.resize(static_cast<std::size_t>(count));
  double energy = 0.0;
  for (int label = 0; label < count; ++label) {
    std::vector<int> re(static_cast<std::size_t>(levels)), im(static_cast<std::size_t>(levels));
    for (int j = 0; j < levels; ++j) {
      re[static_cast<std::size_t>(j)] = c.bit(label, 2 * j);
      im[static_cast<std::size_t>(j)] = c.bit(label, 2 * j + 1);
    }
    c.points_[static_cast<std::size_t>(label)] = cd(axis_amplitude(re), axis_amplitude(im));
    energy += std::norm(c.points_[static_cast<std::size_t>(label)]);
  }
  c.scale_ = 1.0 / std::sqrt(energy / count);
  for (auto& p : c.points_) p *= c.scale_;
  return c;
}

int Constellation::label(std::span<const std::uint8_t> bits) const {
  if (static_cast<int>(bits.size()) != bits_) throw std::invalid_argument("label: wrong number of bits");
  int l = 0;
  for (auto b : bits) l = (l << 1) | (b & 1);
  return l;
}

int Constellation::nearest(cd y) const {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < size(); ++i) {
    const double d = std::norm(y - points_[static_cast<std::size_t>(i)]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::vector<cd> modulate(std::span<const std::uint8_t> bits, const Constellation& c) {
  const auto m = static_cast<std::size_t>(c.bits_per_symbol());
  if (bits.size() % m != 0) throw std::invalid_argument("modulate: bit count is not a multiple of the order");
  std::vector<cd> out(bits.size() / m);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c.map(bits.subspan(i * m, m));
  return out;
}

}  // namespace nrx::phy

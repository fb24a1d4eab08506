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

#include "nrx/phy/mcs.hpp"

#include <sstream>
#include <stdexcept>

namespace nrx::phy {

McsTable McsTable::nr_default() {
  // (modulation order, R x 1024)
  static constexpr int kTable[29][2] = {
      {2, 120}, {2, 157}, {2, 193}, {2, 251}, {2, 308}, {2, 379}, {2, 449}, {2, 526}, {2, 602}, {2, 679},
      {4, 340}, {4, 378}, {4, 434}, {4, 490}, {4, 553}, {4, 616}, {4, 658}, {6, 438}, {6, 466}, {6, 517},
      {6, 567}, {6, 616}, {6, 666}, {6, 719}, {6, 772}, {6, 822}, {6, 873}, {6, 910}, {6, 948}};
  McsTable t;
  for (int i = 0; i < 29; ++i) t.set({i, kTable[i][0], kTable[i][1] / 1024.0});
  return t;
}

McsTable McsTable::parse(std::string_view text) {
  McsTable t;
  std::stringstream ss{std::string(text)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    McsEntry e;
    char c1 = 0, c2 = 0;
    std::istringstream is(item);
    if (!(is >> e.index >> c1 >> e.modulation_order >> c2 >> e.code_rate) || c1 != ':' || c2 != ':') {
      throw std::invalid_argument("malformed MCS entry '" + item + "' (expected index:order:rate)");
    }
    t.set(e);
  }
  return t;
}

void McsTable::set(const McsEntry& e) {
  if (e.modulation_order != 2 && e.modulation_order != 4 && e.modulation_order != 6) {
    throw std::invalid_argument("MCS " + std::to_string(e.index) + ": modulation order must be 2, 4 or 6");
  }
  if (!(e.code_rate > 0.0 && e.code_rate < 1.0)) {
    throw std::invalid_argument("MCS " + std::to_string(e.index) + ": code rate must lie in (0, 1)");
  }
  entries_[e.index] = e;
}

const McsEntry& McsTable::at(int index) const {
  auto it = entries_.find(index);
  if (it == entries_.end()) throw std::out_of_range("MCS index " + std::to_string(index) + " not in table");
  return it->second;
}

std::vector<McsEntry> McsTable::entries() const {
  std::vector<McsEntry> out;
  for (const auto& [i, e] : entries_) out.push_back(e);
  return out;
}

std::string McsTable::to_string() const {
  std::ostringstream os;
  os.precision(10);
  bool first = true;
  for (const auto& [i, e] : entries_) {
    os << (first ? "" : ",") << e.index << ':' << e.modulation_order << ':' << e.code_rate;
    first = false;
  }
  return os.str();
}

}  // namespace nrx::phy

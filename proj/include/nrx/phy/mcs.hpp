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
#include <string>
#include <string_view>
#include <vector>

namespace nrx::phy {

struct McsEntry {
  int index = 0;
  int modulation_order = 2;
  double code_rate = 0.5;
};

/// MCS index -> (modulation order, code rate).
class McsTable {
 public:
  /// 64-QAM PUSCH/PDSCH table (indices 0-28), rates as R x 1024 / 1024.
  static McsTable nr_default();
  /// Parses "index:order:rate" entries separated by commas.
  static McsTable parse(std::string_view text);

  void set(const McsEntry& e);
  const McsEntry& at(int index) const;
  bool contains(int index) const { return entries_.count(index) != 0; }
  std::vector<McsEntry> entries() const;
  std::string to_string() const;

 private:
  std::map<int, McsEntry> entries_;
};

}  // namespace nrx::phy

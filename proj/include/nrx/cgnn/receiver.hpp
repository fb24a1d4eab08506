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

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nrx/cgnn/config.hpp"
#include "nrx/phy/slot.hpp"

namespace nrx::cgnn {

struct NrxUeOutput {
  int ue = 0;
  int modulation = 0;
  Eigen::VectorXd llrs;  // data-RE mapping order, m per RE
  CMatrix chest;         // (S*T) x B refined stream channel
};

/// LS estimate -> StateInit -> depth iterations -> readouts for one slot.
/// Masking models keep the label prefix of each UE's modulation.
std::vector<NrxUeOutput> nrx_forward(const NrxConfig& cfg, const Weights& w, const phy::SlotConfig& slot,
                                     const CMatrix& y, std::span<const phy::PilotBook> pilots,
                                     std::span<const phy::McsEntry> mcs, double noise_power, int depth);

/// NRXW checkpoint: magic, version, config block, then named f32 tensors.
void checkpoint_save(const std::string& path, const NrxConfig& cfg, const Weights& w);
std::pair<NrxConfig, Weights> checkpoint_load(const std::string& path);

}  // namespace nrx::cgnn

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
#include <vector>

#include "nrx/cgnn/config.hpp"
#include "nrx/phy/mcs.hpp"
#include "nrx/phy/slot.hpp"
#include "nrx/sim/eval.hpp"
#include "nrx/sim/train.hpp"

namespace nrx::sim {

struct BenchSettings {
  std::vector<int> depths{1, 2, 3, 4, 5, 6, 7, 8};
  int runs = 100;
  int warmup = 10;
};

/// Everything a CLI run needs, read from an INI file with sections
/// [slot], [channel], [mcs], [nrx], [train], [eval] and [bench].
struct RunConfig {
  phy::SlotConfig slot;
  phy::McsTable table = phy::McsTable::nr_default();
  std::string channel = "tdl:tdl-b,tdl-c";
  int covariance_samples = 2000;
  cgnn::NrxConfig nrx;
  TrainConfig train;
  EvalConfig eval;
  std::vector<std::string> receivers{"ls-lmmse", "lmmse-kbest", "nrx"};
  int kbest_k = 16;
  int eval_depth = 0;  // 0: full depth
  int log_every = 100;
  BenchSettings bench;
};

/// Reads \p path (may be empty for defaults) and applies overrides of the
/// form "section.key=value". Unknown keys are rejected.
RunConfig load_config(const std::string& path, std::span<const std::string> overrides = {});

/// "a,b,c" lists; numeric lists also accept "lo:step:hi" ranges.
std::vector<double> parse_number_list(const std::string& text);
std::vector<std::string> split_list(const std::string& text);

}  // namespace nrx::sim

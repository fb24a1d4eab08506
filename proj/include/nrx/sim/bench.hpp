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

#include <iosfwd>
#include <span>
#include <vector>

#include "nrx/cgnn/config.hpp"
#include "nrx/phy/slot.hpp"

namespace nrx::sim {

struct LatencyReport {
  struct Depth {
    int n_it = 0;
    std::vector<double> samples_s;
    double median_s = 0.0, p10_s = 0.0, p90_s = 0.0;
  };
  std::vector<Depth> depths;
  double a = 0.0;  // overhead [s]
  double b = 0.0;  // per-iteration cost [s]
  double r2 = 0.0;
};

/// Single-stream wall-clock time of nrx_forward at each depth, after
/// \p warmup untimed runs, and the least-squares fit median = a + b * depth.
/// On glibc this raises the process-wide malloc mmap and trim thresholds.
LatencyReport latency_bench(const cgnn::NrxConfig& cfg, const cgnn::Weights& w, const phy::SlotConfig& slot,
                            std::span<const int> depths, int runs, int warmup = 10, std::uint64_t seed = 1);

struct AffineFit {
  double a = 0.0, b = 0.0, r2 = 0.0;
};
AffineFit fit_affine(std::span<const double> x, std::span<const double> y);

/// q-quantile with linear interpolation between order statistics.
double quantile(std::vector<double> v, double q);

void write_latency_csv(std::ostream& out, const LatencyReport& report);

}  // namespace nrx::sim

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
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nrx/ad/adam.hpp"
#include "nrx/cgnn/config.hpp"
#include "nrx/channel/channel.hpp"
#include "nrx/phy/mcs.hpp"
#include "nrx/sim/link.hpp"

namespace nrx::sim {

struct TrainConfig {
  int batch_size = 16;
  int steps = 10000;
  double snr_lo_db = -3.0;
  double snr_hi_db = 11.0;
  double gamma = 0.1;  // MSE scale of the channel-estimate readout
  double learning_rate = 1e-3;
  std::vector<int> mcs_indices{14};
  int max_ues = 2;
  /// SNR shift per modulation order, averaged over the active UEs.
  std::map<int, double> mcs_offset_db{{2, 0.0}, {4, 2.0}, {6, 5.0}};
  /// Adds 10 log10(U_A) dB for U_A active UEs.
  bool user_offset = true;
  std::uint64_t seed = 0;
  std::string channel = "tdl:tdl-b,tdl-c";
  bool fine_tune = false;

  void validate() const;
  /// Fine-tuning trains the LLR readout only.
  double effective_gamma() const { return fine_tune ? 0.0 : gamma; }
};

/// P(U_A = u) for u = 1..max_ues, proportional to u.
std::vector<double> active_ue_pmf(int max_ues);

/// Per-sample training SNR after the modulation and user-count shifts.
double training_snr_db(const TrainConfig& cfg, double base_db, std::span<const int> modulations);

struct TrainingSample {
  SlotSample slot;
  double snr_db = 0.0;
};
using TrainingBatch = std::vector<TrainingSample>;

TrainingBatch sample_training_batch(const TrainConfig& cfg, const phy::SlotConfig& slot, const phy::McsTable& table,
                                    const channel::ChannelSource& source, Rng& rng, phy::CodeBook& codes);

struct Model {
  cgnn::NrxConfig cfg;
  cgnn::Weights weights;
  ad::AdamState<float> adam;
};

struct LossBreakdown {
  double total = 0.0;
  std::vector<double> bce;  // per readout iteration
  std::vector<double> mse;
};

/// Gradient of the loss w.r.t. the final LLR readout, and the BCE mask used
/// there (first LLR block).
struct StepDiagnostics {
  ad::Tensor<float> logits_grad;
  ad::Tensor<float> mask;
};

/// One Adam update on the multi-loss sum over every iteration's readouts.
LossBreakdown train_step(Model& model, const TrainingBatch& batch, const TrainConfig& cfg, const phy::SlotConfig& slot,
                         StepDiagnostics* diag = nullptr);

using StepCallback = std::function<void(int step, const LossBreakdown&)>;

/// Runs cfg.steps training steps with batches drawn from cfg.channel.
void train(Model& model, const TrainConfig& cfg, const phy::SlotConfig& slot, const phy::McsTable& table,
           const StepCallback& on_step = {});

struct FineTuneResult {
  bool gamma_overridden = false;
  std::vector<std::pair<int, cgnn::Weights>> snapshots;  // (steps done, weights)
};

/// Continues training on \p source with a fresh optimizer and the MSE term
/// disabled. Weights are snapshotted after each step count in \p milestones
/// (0 included if listed).
FineTuneResult fine_tune(Model& model, TrainConfig cfg, const phy::SlotConfig& slot, const phy::McsTable& table,
                         const channel::ChannelSource& source, int num_steps, std::span<const int> milestones,
                         const StepCallback& on_step = {});

}  // namespace nrx::sim

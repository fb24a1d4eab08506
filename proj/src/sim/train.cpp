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

#include "nrx/sim/train.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "nrx/ad/losses.hpp"
#include "nrx/cgnn/graph.hpp"

namespace nrx::sim {

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("train config: " + msg); };
  if (batch_size < 1) fail("batch_size must be positive");
  if (steps < 0) fail("steps must be non-negative");
  if (!(snr_lo_db < snr_hi_db)) fail("SNR range needs lo < hi");
  if (!(gamma >= 0.0)) fail("gamma must be non-negative");
  if (!(learning_rate > 0.0)) fail("learning rate must be positive");
  if (mcs_indices.empty()) fail("no MCS index");
  if (max_ues < 1) fail("max_ues must be at least 1");
}

std::vector<double> active_ue_pmf(int max_ues) {
  if (max_ues < 1) throw std::invalid_argument("active_ue_pmf: max_ues must be at least 1");
  const double norm = max_ues * (max_ues + 1) / 2.0;
  std::vector<double> p;
  for (int u = 1; u <= max_ues; ++u) p.push_back(u / norm);
  return p;
}

double training_snr_db(const TrainConfig& cfg, double base_db, std::span<const int> modulations) {
  if (modulations.empty()) throw std::invalid_argument("training_snr_db: no active UE");
  double shift = 0.0;
  for (int m : modulations) {
    const auto it = cfg.mcs_offset_db.find(m);
    if (it == cfg.mcs_offset_db.end()) {
      throw std::invalid_argument("training_snr_db: no SNR offset for modulation order " + std::to_string(m));
    }
    shift += it->second;
  }
  shift /= static_cast<double>(modulations.size());
  if (cfg.user_offset) shift += linear_to_db(static_cast<double>(modulations.size()));
  return base_db + shift;
}

TrainingBatch sample_training_batch(const TrainConfig& cfg, const phy::SlotConfig& slot, const phy::McsTable& table,
                                    const channel::ChannelSource& source, Rng& rng, phy::CodeBook& codes) {
  cfg.validate();
  if (cfg.max_ues > slot.max_ues) {
    throw std::invalid_argument("train config: max_ues " + std::to_string(cfg.max_ues) + " exceeds the slot's " +
                                std::to_string(slot.max_ues));
  }
  const auto pmf = active_ue_pmf(cfg.max_ues);
  TrainingBatch batch;
  for (int i = 0; i < cfg.batch_size; ++i) {
    const double x = rng.uniform();
    int active = cfg.max_ues;
    double acc = 0.0;
    for (std::size_t u = 0; u < pmf.size(); ++u) {
      acc += pmf[u];
      if (x < acc) {
        active = static_cast<int>(u) + 1;
        break;
      }
    }
    std::vector<phy::McsEntry> mcs;
    std::vector<int> mods;
    for (int u = 0; u < active; ++u) {
      const int idx = cfg.mcs_indices[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(cfg.mcs_indices.size()) - 1))];
      mcs.push_back(table.at(idx));
      mods.push_back(mcs.back().modulation_order);
    }
    TrainingSample s;
    s.snr_db = training_snr_db(cfg, rng.uniform(cfg.snr_lo_db, cfg.snr_hi_db), mods);
    s.slot = simulate_slot(slot, mcs, source, noise_power_from_snr_db(s.snr_db), rng, codes);
    batch.push_back(std::move(s));
  }
  return batch;
}

namespace {

struct ImageRef {
  std::size_t sample;
  std::size_t ue;
};

struct BlockTargets {
  ad::Tensor<float> bits, mask;
  double weight = 0.0;  // share of all labelled LLRs
};

std::vector<BlockTargets> llr_targets(const std::vector<cgnn::LlrBlock<float>>& blocks,
                                      const std::vector<ImageRef>& images, const TrainingBatch& batch,
                                      const phy::SlotConfig& slot) {
  const auto positions = phy::data_positions(slot);
  std::vector<BlockTargets> out;
  double total = 0.0;
  for (const auto& blk : blocks) {
    const auto& shape = blk.logits.shape();
    const auto width = shape.back();
    BlockTargets t{ad::Tensor<float>(shape), ad::Tensor<float>(shape), 0.0};
    for (std::size_t j = 0; j < blk.rows.size(); ++j) {
      const auto ref = images[static_cast<std::size_t>(blk.rows[j])];
      const auto& ue = batch[ref.sample].slot.ues[ref.ue];
      const int m = ue.mcs.modulation_order;
      for (std::size_t p = 0; p < positions.size(); ++p) {
        const auto [s, tt] = positions[p];
        const auto base = ((static_cast<std::int64_t>(j) * slot.num_subcarriers + s) * slot.num_symbols + tt) * width;
        for (int k = 0; k < m; ++k) {
          t.bits[base + k] = ue.coded_bits[p * static_cast<std::size_t>(m) + static_cast<std::size_t>(k)];
          t.mask[base + k] = 1.0f;
        }
      }
    }
    t.weight = t.mask.values().template cast<double>().sum();
    total += t.weight;
    out.push_back(std::move(t));
  }
  for (auto& t : out) t.weight /= total;
  return out;
}

}  // namespace

LossBreakdown train_step(Model& model, const TrainingBatch& batch, const TrainConfig& cfg, const phy::SlotConfig& slot,
                         StepDiagnostics* diag) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  const auto& nc = model.cfg;
  cgnn::BatchBuilder<float> builder(nc, slot.num_subcarriers, slot.num_symbols);
  std::vector<float> chest;
  std::vector<ImageRef> images;
  std::vector<bool> present(7, false);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& s = batch[i].slot;
    for (std::size_t u = 0; u < s.ues.size(); ++u) {
      const auto& ue = s.ues[u];
      if (!nc.supports_mcs(ue.mcs.index)) {
        throw std::invalid_argument("train_step: MCS " + std::to_string(ue.mcs.index) + " not supported by the model");
      }
      builder.add(s.y, rx::ls_estimate(s.y, ue.pilots, slot), cgnn::positional_encoding(slot, ue.ue, nc.freq_position),
                  s.noise_power, static_cast<int>(i), ue.mcs.modulation_order);
      cgnn::append_channel_planes(chest, s.channels[u]);
      images.push_back({i, u});
      present[static_cast<std::size_t>(ue.mcs.modulation_order)] = true;
    }
  }
  const auto in = builder.finish();
  const auto g = in.images();
  const ad::Tensor<float> chest_target({g, slot.num_subcarriers, slot.num_symbols, 2 * nc.bs_antennas},
                                       Eigen::Map<const ad::Tensor<float>::Array>(chest.data(), static_cast<Eigen::Index>(chest.size())));

  ad::Tape<float> tape;
  const auto params = cgnn::bind(tape, model.weights, true);
  const auto readouts = cgnn::forward(nc, params, in, nc.n_it, true);
  const auto targets = llr_targets(readouts.front().llrs, images, batch, slot);
  const auto target = tape.constant(chest_target);
  const double gamma = cfg.effective_gamma();

  LossBreakdown lb;
  ad::Var<float> total;
  for (const auto& r : readouts) {
    ad::Var<float> bce;
    for (std::size_t b = 0; b < r.llrs.size(); ++b) {
      const auto term = ad::scale(ad::bce_with_logits(r.llrs[b].logits, targets[b].bits, &targets[b].mask),
                                  static_cast<float>(targets[b].weight));
      bce = bce.valid() ? ad::add(bce, term) : term;
    }
    const auto mse = ad::mse(r.chest, target);
    lb.bce.push_back(bce.value()[0]);
    lb.mse.push_back(mse.value()[0]);
    auto step_loss = gamma > 0.0 ? ad::add(bce, ad::scale(mse, static_cast<float>(gamma))) : bce;
    total = total.valid() ? ad::add(total, step_loss) : step_loss;
  }
  lb.total = total.value()[0];
  if (!std::isfinite(lb.total)) {
    std::ostringstream os;
    os << "train_step: non-finite loss (bce";
    for (double v : lb.bce) os << ' ' << v;
    os << ", mse";
    for (double v : lb.mse) os << ' ' << v;
    os << ')';
    throw std::runtime_error(os.str());
  }
  tape.backward(total);

  cgnn::Weights grads;
  for (const auto& [name, var] : params) {
    if (nc.variant == cgnn::Variant::var_io) {
      // IO layers of modulations absent from the batch keep their optimizer state
      bool idle = false;
      for (int m : nc.modulations) {
        const auto sfx = cgnn::io_suffix(nc, m) + ".";
        const bool io = name.rfind("state_init" + sfx, 0) == 0 || name.rfind("readout_llr" + sfx, 0) == 0;
        idle = idle || (io && !present[static_cast<std::size_t>(m)]);
      }
      if (idle) continue;
    }
    grads.emplace(name, tape.grad(var));
  }
  if (diag) {
    const auto& blk = readouts.back().llrs.front();
    diag->logits_grad = tape.grad(blk.logits);
    diag->mask = targets.front().mask;
  }
  model.adam.hyper.lr = cfg.learning_rate;
  ad::adam_step(model.weights, grads, model.adam);
  return lb;
}

void train(Model& model, const TrainConfig& cfg, const phy::SlotConfig& slot, const phy::McsTable& table,
           const StepCallback& on_step) {
  cfg.validate();
  const auto source = channel::make_source(cfg.channel);
  phy::CodeBook codes;
  for (int step = 0; step < cfg.steps; ++step) {
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(step)));
    const auto batch = sample_training_batch(cfg, slot, table, *source, rng, codes);
    const auto lb = train_step(model, batch, cfg, slot);
    if (on_step) on_step(step + 1, lb);
  }
}

FineTuneResult fine_tune(Model& model, TrainConfig cfg, const phy::SlotConfig& slot, const phy::McsTable& table,
                         const channel::ChannelSource& source, int num_steps, std::span<const int> milestones,
                         const StepCallback& on_step) {
  if (num_steps < 0) throw std::invalid_argument("fine_tune: negative step count");
  for (int m : milestones) {
    if (m < 0 || m > num_steps) {
      throw std::invalid_argument("fine_tune: milestone " + std::to_string(m) + " outside [0, " +
                                  std::to_string(num_steps) + "]");
    }
  }
  FineTuneResult res;
  cfg.fine_tune = true;
  if (cfg.gamma > 0.0) {
    res.gamma_overridden = true;
    std::clog << "warning: fine-tuning ignores gamma = " << cfg.gamma << " and trains without the MSE term\n";
  }
  cfg.validate();
  model.adam = ad::AdamState<float>{};
  auto snapshot = [&](int done) {
    if (std::find(milestones.begin(), milestones.end(), done) != milestones.end()) {
      res.snapshots.emplace_back(done, model.weights);
    }
  };
  snapshot(0);
  phy::CodeBook codes;
  for (int step = 0; step < num_steps; ++step) {
    Rng rng(mix_seed(cfg.seed ^ 0xF17E7u, static_cast<std::uint64_t>(step)));
    const auto batch = sample_training_batch(cfg, slot, table, source, rng, codes);
    const auto lb = train_step(model, batch, cfg, slot);
    if (on_step) on_step(step + 1, lb);
    snapshot(step + 1);
  }
  return res;
}

}  // namespace nrx::sim

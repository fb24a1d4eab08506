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
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nrx/cgnn/config.hpp"
#include "nrx/channel/channel.hpp"
#include "nrx/phy/slot.hpp"
#include "nrx/rx/classical.hpp"

namespace nrx::sim {

/// One transmitted and received slot. UE u of the slot carries UE id u.
struct SlotSample {
  std::vector<phy::UeSlot> ues;
  std::vector<CMatrix> channels;  // effective per UE, (S*T) x B
  CMatrix y;                      // (S*T) x B
  double noise_power = 0.0;
};

/// Draws payloads, assembles the slot, applies a fresh channel and noise.
SlotSample simulate_slot(const phy::SlotConfig& cfg, std::span<const phy::McsEntry> mcs,
                         const channel::ChannelSource& source, double noise_power, Rng& rng, phy::CodeBook& codes);

rx::SlotObservation observation(const phy::SlotConfig& cfg, const SlotSample& s);

/// Slot-level receiver. Implementations must be safe to call concurrently.
class Receiver {
 public:
  virtual ~Receiver() = default;
  virtual std::string name() const = 0;
  /// Per-UE LLRs in data-RE mapping order.
  virtual rx::SlotLlrs receive(const phy::SlotConfig& cfg, const SlotSample& s) const = 0;
};

class LsLmmseReceiver final : public Receiver {
 public:
  std::string name() const override { return "ls-lmmse"; }
  rx::SlotLlrs receive(const phy::SlotConfig& cfg, const SlotSample& s) const override;
};

class KBestReceiver final : public Receiver {
 public:
  /// \p cov holds one covariance model per UE id.
  KBestReceiver(std::vector<channel::CovarianceModel> cov, int k);
  std::string name() const override { return "lmmse-kbest"; }
  rx::SlotLlrs receive(const phy::SlotConfig& cfg, const SlotSample& s) const override;

 private:
  std::vector<channel::CovarianceModel> cov_;
  int k_;
};

class PerfectMlReceiver final : public Receiver {
 public:
  std::string name() const override { return "perfect-ml"; }
  rx::SlotLlrs receive(const phy::SlotConfig& cfg, const SlotSample& s) const override;
};

class NrxReceiver final : public Receiver {
 public:
  NrxReceiver(cgnn::NrxConfig cfg, std::shared_ptr<const cgnn::Weights> w, int depth, std::string label = "nrx");
  std::string name() const override { return label_; }
  rx::SlotLlrs receive(const phy::SlotConfig& cfg, const SlotSample& s) const override;

 private:
  cgnn::NrxConfig cfg_;
  std::shared_ptr<const cgnn::Weights> w_;
  int depth_;
  std::string label_;
};

/// Outputs independent random-sign LLRs; a sanity ceiling for the counters.
class RandomSignReceiver final : public Receiver {
 public:
  explicit RandomSignReceiver(std::uint64_t seed) : seed_(seed) {}
  std::string name() const override { return "random"; }
  rx::SlotLlrs receive(const phy::SlotConfig& cfg, const SlotSample& s) const override;

 private:
  std::uint64_t seed_;
};

/// LMMSE+K-Best receiver with one covariance model per UE id, estimated
/// from \p num_samples draws of \p source.
std::unique_ptr<Receiver> make_kbest_receiver(const phy::SlotConfig& cfg, const channel::ChannelSource& source, int k,
                                              std::size_t num_samples, std::uint64_t seed);

struct BlockResult {
  bool block_error = false;
  int bit_errors = 0;
  int bits = 0;
};

/// LDPC-decodes every UE's LLRs; a block is in error when any payload bit is.
std::vector<BlockResult> decode_blocks(const SlotSample& s, const rx::SlotLlrs& llrs, phy::CodeBook& codes);

}  // namespace nrx::sim

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

#include "nrx/sim/link.hpp"

#include <bit>
#include <stdexcept>

#include "nrx/cgnn/receiver.hpp"

namespace nrx::sim {

SlotSample simulate_slot(const phy::SlotConfig& cfg, std::span<const phy::McsEntry> mcs,
                         const channel::ChannelSource& source, double noise_power, Rng& rng, phy::CodeBook& codes) {
  if (mcs.empty() || static_cast<int>(mcs.size()) > cfg.max_ues) {
    throw std::invalid_argument("simulate_slot: " + std::to_string(mcs.size()) + " UEs requested, slot supports 1.." +
                                std::to_string(cfg.max_ues));
  }
  std::vector<phy::UeAssignment> assign;
  std::vector<std::vector<std::uint8_t>> payloads;
  for (std::size_t u = 0; u < mcs.size(); ++u) {
    assign.push_back({static_cast<int>(u), mcs[u]});
    std::vector<std::uint8_t> p(static_cast<std::size_t>(phy::payload_length(cfg, mcs[u], codes)));
    for (auto& b : p) b = static_cast<std::uint8_t>(rng.bit());
    payloads.push_back(std::move(p));
  }
  SlotSample out;
  out.ues = phy::assemble_slot(cfg, assign, payloads, codes, rng.next_u64());
  out.noise_power = noise_power;
  const auto ch = source.sample(cfg, static_cast<int>(mcs.size()), noise_power, rng);
  std::vector<CMatrix> tx;
  for (const auto& u : out.ues) {
    tx.push_back(channel::precode(u.grid, cfg.beam(u.ue)));
    out.channels.push_back(ch.effective(u.ue, cfg.beam(u.ue)));
  }
  out.y = channel::apply_channel(tx, ch, rng);
  return out;
}

rx::SlotObservation observation(const phy::SlotConfig& cfg, const SlotSample& s) {
  rx::SlotObservation obs;
  obs.cfg = &cfg;
  obs.y = s.y;
  obs.noise_power = s.noise_power;
  for (const auto& u : s.ues) {
    obs.pilots.push_back(u.pilots);
    obs.constellations.push_back(&phy::Constellation::standard(u.mcs.modulation_order));
  }
  return obs;
}

rx::SlotLlrs LsLmmseReceiver::receive(const phy::SlotConfig& cfg, const SlotSample& s) const {
  return rx::receive_ls_lmmse(observation(cfg, s));
}

KBestReceiver::KBestReceiver(std::vector<channel::CovarianceModel> cov, int k) : cov_(std::move(cov)), k_(k) {
  if (k < 1) throw std::invalid_argument("KBestReceiver: list size must be positive");
}

rx::SlotLlrs KBestReceiver::receive(const phy::SlotConfig& cfg, const SlotSample& s) const {
  return rx::receive_lmmse_kbest(observation(cfg, s), cov_, k_);
}

std::unique_ptr<Receiver> make_kbest_receiver(const phy::SlotConfig& cfg, const channel::ChannelSource& source, int k,
                                              std::size_t num_samples, std::uint64_t seed) {
  std::vector<channel::CovarianceModel> cov;
  for (int u = 0; u < cfg.max_ues; ++u) {
    cov.push_back(channel::estimate_covariance(source, cfg, num_samples, u, mix_seed(seed, static_cast<std::uint64_t>(u))));
  }
  return std::make_unique<KBestReceiver>(std::move(cov), k);
}

rx::SlotLlrs PerfectMlReceiver::receive(const phy::SlotConfig& cfg, const SlotSample& s) const {
  return rx::receive_perfect_ml(observation(cfg, s), s.channels);
}

NrxReceiver::NrxReceiver(cgnn::NrxConfig cfg, std::shared_ptr<const cgnn::Weights> w, int depth, std::string label)
    : cfg_(std::move(cfg)), w_(std::move(w)), depth_(depth), label_(std::move(label)) {
  if (!w_) throw std::invalid_argument("NrxReceiver: no weights");
  if (depth_ < 1 || depth_ > cfg_.n_it) throw std::invalid_argument("NrxReceiver: depth outside [1, N_it]");
}

rx::SlotLlrs NrxReceiver::receive(const phy::SlotConfig& cfg, const SlotSample& s) const {
  std::vector<phy::PilotBook> pilots;
  std::vector<phy::McsEntry> mcs;
  for (const auto& u : s.ues) {
    pilots.push_back(u.pilots);
    mcs.push_back(u.mcs);
  }
  rx::SlotLlrs out;
  for (auto& u : cgnn::nrx_forward(cfg_, *w_, cfg, s.y, pilots, mcs, s.noise_power, depth_)) {
    out.push_back(std::move(u.llrs));
  }
  return out;
}

rx::SlotLlrs RandomSignReceiver::receive(const phy::SlotConfig&, const SlotSample& s) const {
  // seeded from the observation so that concurrent calls stay deterministic
  Rng rng(mix_seed(seed_, std::bit_cast<std::uint64_t>(s.y(0, 0).real())));
  rx::SlotLlrs out;
  for (const auto& u : s.ues) {
    Eigen::VectorXd l(static_cast<Eigen::Index>(u.coded_bits.size()));
    for (Eigen::Index i = 0; i < l.size(); ++i) l(i) = rng.bit() ? 1.0 : -1.0;
    out.push_back(std::move(l));
  }
  return out;
}

std::vector<BlockResult> decode_blocks(const SlotSample& s, const rx::SlotLlrs& llrs, phy::CodeBook& codes) {
  if (llrs.size() != s.ues.size()) throw std::invalid_argument("decode_blocks: LLR count does not match the UEs");
  std::vector<BlockResult> out;
  for (std::size_t u = 0; u < s.ues.size(); ++u) {
    const auto& ue = s.ues[u];
    if (static_cast<std::size_t>(llrs[u].size()) != ue.coded_bits.size()) {
      throw std::invalid_argument("decode_blocks: UE " + std::to_string(u) + " has " + std::to_string(llrs[u].size()) +
                                  " LLRs, expected " + std::to_string(ue.coded_bits.size()));
    }
    const auto code = codes.get(static_cast<int>(ue.coded_bits.size()), ue.mcs.code_rate);
    const auto dec = code->decode(std::span<const double>(llrs[u].data(), static_cast<std::size_t>(llrs[u].size())));
    BlockResult r;
    r.bits = static_cast<int>(ue.payload.size());
    for (std::size_t i = 0; i < ue.payload.size(); ++i) r.bit_errors += dec.info[i] != ue.payload[i];
    r.block_error = r.bit_errors > 0;
    out.push_back(r);
  }
  return out;
}

}  // namespace nrx::sim

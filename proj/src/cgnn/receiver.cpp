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

#include "nrx/cgnn/receiver.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "nrx/cgnn/graph.hpp"
#include "nrx/rx/classical.hpp"

namespace nrx::cgnn {

std::vector<NrxUeOutput> nrx_forward(const NrxConfig& cfg, const Weights& w, const phy::SlotConfig& slot,
                                     const CMatrix& y, std::span<const phy::PilotBook> pilots,
                                     std::span<const phy::McsEntry> mcs, double noise_power, int depth) {
  if (pilots.size() != mcs.size()) throw std::invalid_argument("nrx_forward: one MCS per pilot book required");
  if (pilots.empty()) throw std::invalid_argument("nrx_forward: no active UE");
  for (const auto& e : mcs) {
    if (!cfg.supports_mcs(e.index)) throw std::invalid_argument("nrx_forward: MCS " + std::to_string(e.index) + " not supported by the model");
  }
  BatchBuilder<float> builder(cfg, slot.num_subcarriers, slot.num_symbols);
  for (std::size_t u = 0; u < pilots.size(); ++u) {
    builder.add(y, rx::ls_estimate(y, pilots[u], slot), positional_encoding(slot, pilots[u].ue, cfg.freq_position),
                noise_power, 0, mcs[u].modulation_order);
  }
  const auto in = builder.finish();
  ad::Tape<float> tape;
  const auto params = bind(tape, w, false);
  const auto readouts = forward(cfg, params, in, depth, false);
  const auto& r = readouts.back();

  const auto positions = phy::data_positions(slot);
  const std::int64_t st = static_cast<std::int64_t>(slot.num_subcarriers) * slot.num_symbols;
  std::vector<NrxUeOutput> out(pilots.size());
  const auto& chest = r.chest.value();
  for (std::size_t u = 0; u < pilots.size(); ++u) {
    auto& o = out[u];
    o.ue = pilots[u].ue;
    o.modulation = mcs[u].modulation_order;
    o.chest.resize(st, cfg.bs_antennas);
    for (std::int64_t i = 0; i < st; ++i) {
      for (int b = 0; b < cfg.bs_antennas; ++b) {
        const auto base = (static_cast<std::int64_t>(u) * st + i) * 2 * cfg.bs_antennas;
        o.chest(i, b) = cd(chest[base + b], chest[base + cfg.bs_antennas + b]);
      }
    }
  }
  for (const auto& block : r.llrs) {
    const auto& v = block.logits.value();
    const auto width = v.dim(-1);
    for (std::size_t j = 0; j < block.rows.size(); ++j) {
      const auto u = static_cast<std::size_t>(block.rows[j]);
      const int m = out[u].modulation;
      auto& l = out[u].llrs;
      l.resize(static_cast<Eigen::Index>(positions.size()) * m);
      for (std::size_t p = 0; p < positions.size(); ++p) {
        const auto [s, t] = positions[p];
        const auto base = ((static_cast<std::int64_t>(j) * slot.num_subcarriers + s) * slot.num_symbols + t) * width;
        for (int k = 0; k < m; ++k) l(static_cast<Eigen::Index>(p) * m + k) = v[base + k];
      }
    }
  }
  return out;
}

namespace {

constexpr char kMagic[4] = {'N', 'R', 'X', 'W'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  const std::string& str() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string buf, std::string path) : buf_(std::move(buf)), path_(std::move(path)) {}
  void need(std::size_t n) {
    if (pos_ + n > buf_.size()) throw std::runtime_error("checkpoint '" + path_ + "' is truncated at byte " + std::to_string(pos_));
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf_[pos_++]) << (8 * i));
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf_[pos_++])) << (8 * i);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == buf_.size(); }
  const std::string& path() const { return path_; }

 private:
  std::string buf_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void checkpoint_save(const std::string& path, const NrxConfig& cfg, const Weights& w) {
  const auto shapes = parameter_shapes(cfg);
  for (const auto& [name, shape] : shapes) {
    auto it = w.find(name);
    if (it == w.end()) throw std::invalid_argument("checkpoint_save: missing tensor '" + name + "'");
    if (it->second.shape() != shape) {
      throw std::invalid_argument("checkpoint_save: tensor '" + name + "' has shape " + ad::to_string(it->second.shape()) +
                                  ", config implies " + ad::to_string(shape));
    }
  }
  if (w.size() != shapes.size()) throw std::invalid_argument("checkpoint_save: weights contain tensors the config does not define");
  Writer out;
  out.bytes(kMagic, 4);
  out.u32(kVersion);
  std::uint32_t flags = (cfg.log_n0_plane ? 1u : 0u) | (cfg.freq_position ? 2u : 0u);
  for (int m : cfg.modulations) flags |= 1u << (7 + m / 2);
  std::uint32_t mcs_bits = 0;
  for (int i : cfg.mcs_indices) {
    if (i < 0 || i > 31) throw std::invalid_argument("checkpoint_save: MCS index outside 0..31");
    mcs_bits |= 1u << i;
  }
  for (std::uint32_t v : {static_cast<std::uint32_t>(cfg.d_s), static_cast<std::uint32_t>(cfg.n_it),
                          static_cast<std::uint32_t>(cfg.variant), static_cast<std::uint32_t>(cfg.m_max()), flags,
                          mcs_bits}) {
    out.u32(v);
  }
  out.u32(static_cast<std::uint32_t>(w.size()));
  for (const auto& [name, t] : w) {
    out.u16(static_cast<std::uint16_t>(name.size()));
    out.bytes(name.data(), name.size());
    out.u8(static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) out.u32(static_cast<std::uint32_t>(d));
    for (std::int64_t i = 0; i < t.size(); ++i) out.u32(std::bit_cast<std::uint32_t>(t[i]));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f.write(out.str().data(), static_cast<std::streamsize>(out.str().size()));
  if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

std::pair<NrxConfig, Weights> checkpoint_load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  Reader in(std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>()), path);
  if (in.str(4) != std::string(kMagic, 4)) throw std::runtime_error("checkpoint '" + path + "': bad magic");
  if (const auto v = in.u32(); v != kVersion) {
    throw std::runtime_error("checkpoint '" + path + "': unsupported version " + std::to_string(v));
  }
  NrxConfig cfg;
  cfg.d_s = static_cast<int>(in.u32());
  cfg.n_it = static_cast<int>(in.u32());
  const auto variant = in.u32();
  if (variant > 2) throw std::runtime_error("checkpoint '" + path + "': unknown variant id " + std::to_string(variant));
  cfg.variant = static_cast<Variant>(variant);
  const int m_max = static_cast<int>(in.u32());
  const auto flags = in.u32();
  const auto mcs_bits = in.u32();
  cfg.log_n0_plane = flags & 1u;
  cfg.freq_position = flags & 2u;
  cfg.modulations.clear();
  for (int m : {2, 4, 6}) {
    if (flags & (1u << (7 + m / 2))) cfg.modulations.push_back(m);
  }
  cfg.mcs_indices.clear();
  for (int i = 0; i < 32; ++i) {
    if (mcs_bits & (1u << i)) cfg.mcs_indices.push_back(i);
  }
  if (cfg.m_max() != m_max) throw std::runtime_error("checkpoint '" + path + "': m_max does not match the modulation set");

  Weights w;
  const auto count = in.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name = in.str(in.u16());
    const auto rank = in.u8();
    ad::Shape shape;
    for (int r = 0; r < rank; ++r) shape.push_back(in.u32());
    ad::Tensor<float> t(shape);
    in.need(static_cast<std::size_t>(t.size()) * 4);
    for (std::int64_t k = 0; k < t.size(); ++k) t[k] = std::bit_cast<float>(in.u32());
    if (!w.emplace(name, std::move(t)).second) throw std::runtime_error("checkpoint '" + path + "': duplicate tensor '" + name + "'");
  }
  if (!in.done()) throw std::runtime_error("checkpoint '" + path + "': trailing bytes after the last tensor");

  // B, kernel size, layer count and MLP width are implied by tensor shapes
  const auto chest = w.find("readout_chest.dense2.weight");
  const auto upd = w.find("iteration.update.conv1.kernel");
  if (chest == w.end() || upd == w.end() || chest->second.rank() != 2 || upd->second.rank() != 4) {
    throw std::runtime_error("checkpoint '" + path + "': missing readout_chest.dense2.weight or iteration.update.conv1.kernel");
  }
  cfg.bs_antennas = static_cast<int>(chest->second.dim(1) / 2);
  cfg.kernel = static_cast<int>(upd->second.dim(0));
  cfg.layers = 0;
  while (w.count("iteration.update.conv" + std::to_string(cfg.layers + 1) + ".kernel")) ++cfg.layers;
  if (const auto msg = w.find("iteration.message.dense1.weight"); msg != w.end() && msg->second.rank() == 2) {
    cfg.mlp_hidden = msg->second.dim(1) == cfg.d_s ? 0 : static_cast<int>(msg->second.dim(1));
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error("checkpoint '" + path + "': invalid config: " + e.what());
  }
  const auto shapes = parameter_shapes(cfg);
  for (const auto& [name, shape] : shapes) {
    auto it = w.find(name);
    if (it == w.end()) throw std::runtime_error("checkpoint '" + path + "': missing tensor '" + name + "'");
    if (it->second.shape() != shape) {
      throw std::runtime_error("checkpoint '" + path + "': tensor '" + name + "' has shape " +
                               ad::to_string(it->second.shape()) + ", config implies " + ad::to_string(shape));
    }
  }
  for (const auto& [name, t] : w) {
    if (!shapes.count(name)) throw std::runtime_error("checkpoint '" + path + "': unexpected tensor '" + name + "'");
  }
  return {cfg, w};
}

}  // namespace nrx::cgnn

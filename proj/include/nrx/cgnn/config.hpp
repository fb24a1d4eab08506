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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <span>
#include <string>
#include <vector>

#include "nrx/ad/tensor.hpp"
#include "nrx/common.hpp"
#include "nrx/phy/mcs.hpp"
#include "nrx/phy/slot.hpp"

namespace nrx::cgnn {

enum class Variant : std::uint32_t { single = 0, masking = 1, var_io = 2 };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

/// Hyperparameters of the CGNN receiver.
struct NrxConfig {
  int d_s = 16;          // state feature depth, also the MLP hidden width
  int n_it = 4;          // unrolled iterations
  int kernel = 3;        // conv kernel size (square, odd)
  int layers = 2;        // conv layers per StateInit / update block
  int mlp_hidden = 0;    // hidden width of the MLPs; 0 means d_s
  int bs_antennas = 4;   // B; sets the input and channel-estimate widths
  Variant variant = Variant::single;
  std::vector<int> mcs_indices{14};
  /// Distinct modulation orders of the supported MCS set, ascending. Filled by resolve().
  std::vector<int> modulations;
  bool log_n0_plane = true;
  bool freq_position = true;

  /// Derives the modulation set from an MCS table and validates.
  void resolve(const phy::McsTable& table);
  void validate() const;
  int hidden() const { return mlp_hidden > 0 ? mlp_hidden : d_s; }
  int m_max() const { return modulations.empty() ? 0 : modulations.back(); }
  /// y, LS estimate (re/im per antenna), two position planes and log N0.
  int input_channels() const { return 4 * bs_antennas + 2 + 1; }
  int llr_width(int m) const { return variant == Variant::var_io ? m : m_max(); }
  bool supports_mcs(int index) const;
  bool supports_modulation(int m) const;
};

using Weights = ad::NamedTensors<float>;

/// Names and shapes of every parameter; fully determined by the config.
std::map<std::string, ad::Shape> parameter_shapes(const NrxConfig& cfg);

/// Glorot-uniform kernels and matrices, zero biases.
Weights init_weights(const NrxConfig& cfg, std::uint64_t seed);

std::int64_t parameter_count(const Weights& w);
/// Weights touched by one inference for UEs of modulation order m.
std::int64_t active_parameter_count(const NrxConfig& cfg, const Weights& w, int m);

/// Name prefix of the modulation-specific IO layers ("" unless var_io).
std::string io_suffix(const NrxConfig& cfg, int m);

/// Per-RE distances to the nearest pilot symbol (column 0, normalized by T)
/// and to the nearest pilot subcarrier of the UE's comb (column 1,
/// normalized by S). Rows s * T + t.
using PosEncoding = Eigen::Array<double, Eigen::Dynamic, 2, Eigen::RowMajor>;
PosEncoding positional_encoding(const phy::SlotConfig& cfg, int ue, bool freq_position = true);

/// Images of all active (sample, UE) pairs of a batch.
template <typename Scalar>
struct BatchInput {
  ad::Tensor<Scalar> features;  // [G, S, T, C_in]
  ad::Tensor<Scalar> position;  // [G, S, T, 2]
  std::vector<int> group;       // sample id of every image
  std::vector<int> modulation;  // modulation order of every image
  int num_subcarriers = 0, num_symbols = 0;
  std::int64_t images() const { return static_cast<std::int64_t>(group.size()); }
};

/// Collects per-UE input planes and packs them into a BatchInput.
template <typename Scalar>
class BatchBuilder {
 public:
  BatchBuilder(const NrxConfig& cfg, int num_subcarriers, int num_symbols)
      : cin_(cfg.input_channels()), s_(num_subcarriers), t_(num_symbols), log_n0_(cfg.log_n0_plane),
        b_(cfg.bs_antennas) {}

  /// y and ls are (S*T) x B with rows s * T + t.
  void add(const CMatrix& y, const CMatrix& ls, const PosEncoding& pos, double noise_power, int group,
           int modulation) {
    if (y.cols() != b_ || ls.cols() != b_ || y.rows() != static_cast<Eigen::Index>(s_) * t_ || ls.rows() != y.rows() ||
        pos.rows() != y.rows()) {
      throw std::invalid_argument("BatchBuilder::add: input planes do not match the grid");
    }
    const Scalar ln0 = log_n0_ ? static_cast<Scalar>(std::log(std::max(noise_power, 1e-12))) : Scalar(0);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      for (int b = 0; b < b_; ++b) feat_.push_back(static_cast<Scalar>(y(r, b).real()));
      for (int b = 0; b < b_; ++b) feat_.push_back(static_cast<Scalar>(y(r, b).imag()));
      for (int b = 0; b < b_; ++b) feat_.push_back(static_cast<Scalar>(ls(r, b).real()));
      for (int b = 0; b < b_; ++b) feat_.push_back(static_cast<Scalar>(ls(r, b).imag()));
      feat_.push_back(static_cast<Scalar>(pos(r, 0)));
      feat_.push_back(static_cast<Scalar>(pos(r, 1)));
      feat_.push_back(ln0);
      pos_.push_back(static_cast<Scalar>(pos(r, 0)));
      pos_.push_back(static_cast<Scalar>(pos(r, 1)));
    }
    group_.push_back(group);
    mod_.push_back(modulation);
  }

  BatchInput<Scalar> finish() {
    BatchInput<Scalar> in;
    const auto g = static_cast<std::int64_t>(group_.size());
    in.features = ad::Tensor<Scalar>({g, s_, t_, cin_}, Eigen::Map<const typename ad::Tensor<Scalar>::Array>(
                                                            feat_.data(), static_cast<Eigen::Index>(feat_.size())));
    in.position = ad::Tensor<Scalar>({g, s_, t_, 2}, Eigen::Map<const typename ad::Tensor<Scalar>::Array>(
                                                         pos_.data(), static_cast<Eigen::Index>(pos_.size())));
    in.group = std::move(group_);
    in.modulation = std::move(mod_);
    in.num_subcarriers = s_;
    in.num_symbols = t_;
    feat_.clear();
    pos_.clear();
    return in;
  }

 private:
  std::int64_t cin_, s_, t_;
  bool log_n0_;
  int b_;
  std::vector<Scalar> feat_, pos_;
  std::vector<int> group_, mod_;
};

/// Stream channel H v as real planes [re_0..re_{B-1}, im_0..im_{B-1}] per RE.
template <typename Scalar>
void append_channel_planes(std::vector<Scalar>& out, const CMatrix& h) {
  for (Eigen::Index r = 0; r < h.rows(); ++r) {
    for (Eigen::Index b = 0; b < h.cols(); ++b) out.push_back(static_cast<Scalar>(h(r, b).real()));
    for (Eigen::Index b = 0; b < h.cols(); ++b) out.push_back(static_cast<Scalar>(h(r, b).imag()));
  }
}

/// Keeps the first m LLRs of every RE (label prefix of the order-m
/// constellation). llrs holds `width` values per RE.
Eigen::VectorXd mask_llrs(const Eigen::VectorXd& llrs, int width, int m);

}  // namespace nrx::cgnn

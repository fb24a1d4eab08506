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
#include <vector>

#include "nrx/channel/channel.hpp"
#include "nrx/common.hpp"
#include "nrx/phy/constellation.hpp"
#include "nrx/phy/slot.hpp"

namespace nrx::rx {

/// LLRs fed to the decoder are clipped to +-kLlrClip.
inline constexpr double kLlrClip = 20.0;

/// Least-squares estimate of one UE's stream channel: pilot division,
/// linear interpolation across the comb (nearest-pilot hold at the band
/// edges) and nearest-pilot-symbol hold in time. Rows s * T + t, columns B.
CMatrix ls_estimate(const CMatrix& y, const phy::PilotBook& pilots, const phy::SlotConfig& cfg);

/// Separable LMMSE smoothing of the pilot observations: frequency Wiener
/// filter on every pilot symbol, then a time Wiener filter per subcarrier.
CMatrix lmmse_estimate(const CMatrix& y, const phy::PilotBook& pilots, const phy::SlotConfig& cfg,
                       const channel::CovarianceModel& cov, double noise_power);

struct Equalized {
  CVector x;      // (H^H H + N0 I)^-1 H^H y
  Eigen::VectorXd gain;  // diagonal of (H^H H + N0 I)^-1 H^H H
  /// Unbiased estimate x_k / gain_k and its error variance (1 - gain_k) / gain_k.
  CVector unbiased() const { return x.cwiseQuotient(gain.cast<cd>()); }
  Eigen::VectorXd noise_var() const;
};

/// Per-RE LMMSE equalizer; columns of h are the streams.
Equalized lmmse_equalize(const CVector& y, const CMatrix& h, double noise_power);

enum class DemapMode { exact, maxlog };

/// Per-bit LLRs ln P(b=1)/P(b=0) of z = x + CN(0, noise_var).
Eigen::VectorXd app_demap(cd z, const phy::Constellation& c, double noise_var, DemapMode mode = DemapMode::exact);

/// Demaps with the order-m_high constellation and keeps the first m_low
/// LLRs, which belong to the order-m_low label prefix.
Eigen::VectorXd masked_demap(cd z, const phy::Constellation& high, int m_low, double noise_var,
                             DemapMode mode = DemapMode::exact);

/// True when every label prefix of length `low.bits_per_symbol()` of `high`
/// lies in the decision region of the matching `low` point.
bool is_label_recursive(const phy::Constellation& high, const phy::Constellation& low);

struct Detection {
  std::vector<int> labels;           // per stream
  double metric = 0.0;               // ||y - H x||^2 of the decision
  std::vector<Eigen::VectorXd> llrs; // per stream, max-log from the list
};

/// Breadth-first K-Best tree search on a sorted QR of h (strongest stream
/// detected first). LLRs whose counter-hypothesis is absent from the list are
/// clipped to +-clip.
Detection kbest_detect(const CVector& y, const CMatrix& h, double noise_power,
                       std::span<const phy::Constellation* const> constellations, int k, double clip = kLlrClip);

/// Exhaustive argmin of ||y - H x||^2 (search space up to 2^20 tuples).
Detection ml_detect_exhaustive(const CVector& y, const CMatrix& h,
                               std::span<const phy::Constellation* const> constellations);

/// Inputs shared by the baseline receivers for one slot.
struct SlotObservation {
  const phy::SlotConfig* cfg = nullptr;
  CMatrix y;                              // rows s * T + t, columns B
  std::vector<phy::PilotBook> pilots;     // per active UE
  std::vector<const phy::Constellation*> constellations;  // per active UE
  double noise_power = 0.0;
};

/// Per-UE LLRs in data-RE mapping order (m per RE), clipped.
using SlotLlrs = std::vector<Eigen::VectorXd>;

/// LS estimation, LMMSE equalization, exact APP demapping.
SlotLlrs receive_ls_lmmse(const SlotObservation& obs);
/// LMMSE estimation (per-UE covariance), K-Best detection.
SlotLlrs receive_lmmse_kbest(const SlotObservation& obs, std::span<const channel::CovarianceModel> cov, int k);
/// Perfect-CSI exhaustive ML with max-log LLRs (per-RE exact channel).
SlotLlrs receive_perfect_ml(const SlotObservation& obs, std::span<const CMatrix> true_channels);

}  // namespace nrx::rx

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

#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nrx/common.hpp"
#include "nrx/phy/slot.hpp"

namespace nrx::channel {

/// Power-delay profile with Rayleigh-faded taps.
struct TdlProfile {
  std::string name;
  std::vector<double> delays_s;  // ascending
  std::vector<double> powers;    // linear, sum to one
  double doppler_hz = 0.0;
  /// When below doppler_hz, every draw picks f_D ~ U[doppler_min_hz, doppler_hz].
  double doppler_min_hz = -1.0;
  double delay_spread_s = 0.0;

  void validate() const;
  double max_delay_s() const { return delays_s.empty() ? 0.0 : delays_s.back(); }

  /// Builds a profile from normalized delays and powers in dB; powers are
  /// renormalized to unit sum.
  static TdlProfile from_normalized(std::string name, std::span<const double> normalized_delays,
                                    std::span<const double> powers_db, double delay_spread_s, double doppler_hz);
  /// Five-tap TDL-B approximation, 100 ns delay spread, 400 Hz Doppler.
  static TdlProfile tdl_b();
  /// Five-tap TDL-C approximation, 300 ns delay spread, 100 Hz Doppler.
  static TdlProfile tdl_c();
  /// Five-tap TDL-A approximation (strong early taps), 30 ns, 10 Hz.
  static TdlProfile tdl_a();
  /// Parses "name[:delay_spread_ns[:doppler_hz | lo..hi]]", e.g. "tdl-c:600:0..200".
  static TdlProfile parse(const std::string& spec);
};

/// Per-RE MIMO channels H[u](s, t) in C^{B x N_u} plus the noise power.
class ChannelRealization {
 public:
  ChannelRealization() = default;
  ChannelRealization(int num_ues, int num_subcarriers, int num_symbols, int bs_antennas, int ue_antennas,
                     double noise_power);

  int num_ues() const { return ues_; }
  int num_subcarriers() const { return s_; }
  int num_symbols() const { return t_; }
  int bs_antennas() const { return b_; }
  int ue_antennas() const { return nu_; }
  double noise_power() const { return n0_; }
  void set_noise_power(double n0) { n0_ = n0; }

  Eigen::Map<CMatrix> h(int u, int s, int t) { return {data_.data() + offset(u, s, t), b_, nu_}; }
  Eigen::Map<const CMatrix> h(int u, int s, int t) const { return {data_.data() + offset(u, s, t), b_, nu_}; }

  /// Stream channel H v per RE, rows ordered s * T + t.
  CMatrix effective(int u, const CVector& beam) const;

  bool all_finite() const;
  std::span<cd> raw() { return data_; }
  std::span<const cd> raw() const { return data_; }

 private:
  std::size_t offset(int u, int s, int t) const {
    return ((static_cast<std::size_t>(u) * s_ + s) * t_ + t) * static_cast<std::size_t>(b_ * nu_);
  }

  int ues_ = 0, s_ = 0, t_ = 0, b_ = 0, nu_ = 0;
  double n0_ = 0.0;
  std::vector<cd> data_;
};

/// Tap gains of one antenna pair, taps x symbols.
using TapProcess = Eigen::MatrixXcd;

/// Sum-of-sinusoids Rayleigh process for every tap, evaluated once per OFDM
/// symbol. Random arrival angles give a J0 autocorrelation in expectation.
TapProcess sample_taps(const TdlProfile& profile, double doppler_hz, int num_symbols, double symbol_duration_s,
                       Rng& rng, int sinusoids = 32);

/// H[s] = sum_k a_k exp(-j 2 pi s df tau_k). Throws when a delay exceeds the
/// cyclic prefix.
CVector cir_to_freq(std::span<const cd> gains, std::span<const double> delays_s, double subcarrier_spacing_hz,
                    int num_subcarriers, double cyclic_prefix_s);

/// Draws one UE's channel into `out` (all antenna pairs independent).
void sample_tdl(const TdlProfile& profile, const phy::SlotConfig& cfg, int ue, Rng& rng, ChannelRealization& out);

/// Antenna-domain transmit grid of one UE, rows s * T + t, columns N_u.
CMatrix precode(const phy::ResourceGrid& grid, const CVector& beam);

/// y = sum_u H_u x_u + n with n ~ CN(0, N0 I); rows s * T + t, columns B.
CMatrix apply_channel(std::span<const CMatrix> tx, const ChannelRealization& h, Rng& rng);

/// Generator interface for slot channels.
class ChannelSource {
 public:
  virtual ~ChannelSource() = default;
  /// Draws channels for UEs 0..num_ues-1. UE u uses the sub-seed
  /// mix_seed(base, u) with base taken from rng, so a UE's draw depends only
  /// on its own profile and the caller's rng state.
  virtual ChannelRealization sample(const phy::SlotConfig& cfg, int num_ues, double noise_power, Rng& rng) const = 0;
  virtual std::string describe() const = 0;
};

/// Independent TDL per UE; UE u uses profiles[u % size]. Two profiles give
/// the DoubleTDL model.
class TdlSource final : public ChannelSource {
 public:
  explicit TdlSource(std::vector<TdlProfile> profiles);
  ChannelRealization sample(const phy::SlotConfig& cfg, int num_ues, double noise_power, Rng& rng) const override;
  std::string describe() const override;
  const std::vector<TdlProfile>& profiles() const { return profiles_; }

 private:
  std::vector<TdlProfile> profiles_;
};

/// i.i.d. CN(0, 1) entries at every RE.
class IidSource final : public ChannelSource {
 public:
  ChannelRealization sample(const phy::SlotConfig& cfg, int num_ues, double noise_power, Rng& rng) const override;
  std::string describe() const override { return "iid"; }
};

/// Frequency responses stored in a CIRD file: header dims, then complex
/// float samples in (sample, u, rx, tx, s, t) order.
struct CirDataset {
  static constexpr std::uint32_t version = 1;
  int num_subcarriers = 0, num_symbols = 0, bs_antennas = 0, ue_antennas = 0, num_ues = 0;
  std::vector<std::complex<float>> values;

  std::size_t sample_size() const {
    return static_cast<std::size_t>(num_ues) * bs_antennas * ue_antennas * num_subcarriers * num_symbols;
  }
  std::size_t num_samples() const { return sample_size() == 0 ? 0 : values.size() / sample_size(); }
  void append(const ChannelRealization& h);
  ChannelRealization realization(std::size_t index, double noise_power) const;
};

void dataset_write(const std::string& path, const CirDataset& data);
CirDataset dataset_read(const std::string& path);

/// Uniform draws (with replacement) from the first `limit` samples.
class DatasetSource final : public ChannelSource {
 public:
  DatasetSource(std::shared_ptr<const CirDataset> data, std::size_t limit = 0);
  ChannelRealization sample(const phy::SlotConfig& cfg, int num_ues, double noise_power, Rng& rng) const override;
  std::string describe() const override;
  std::size_t size() const { return limit_; }

 private:
  std::shared_ptr<const CirDataset> data_;
  std::size_t limit_;
};

/// "tdl:<profile>[,<profile>...]", "iid" or "dataset:<path>[:<limit>]".
std::unique_ptr<ChannelSource> make_source(const std::string& spec);

/// Separable second-order statistics of a channel source.
struct CovarianceModel {
  CMatrix time;       // T x T
  CMatrix frequency;  // S x S
  std::size_t samples = 0;
};

/// Sample covariance over time (averaged over subcarriers and antenna pairs)
/// and over frequency (averaged over symbols). ue < 0 pools all UEs.
CovarianceModel estimate_covariance(const ChannelSource& source, const phy::SlotConfig& cfg, std::size_t num_samples,
                                    int ue, std::uint64_t seed);

}  // namespace nrx::channel

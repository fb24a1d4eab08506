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

#include "nrx/channel/channel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace nrx::channel {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string fmt_dims(int s, int t, int b, int nu) {
  std::ostringstream os;
  os << "S=" << s << " T=" << t << " B=" << b << " N_u=" << nu;
  return os.str();
}

}  // namespace

void TdlProfile::validate() const {
  if (delays_s.empty() || delays_s.size() != powers.size()) {
    throw std::invalid_argument("TDL profile '" + name + "': need matching non-empty delay and power lists");
  }
  for (std::size_t k = 0; k < delays_s.size(); ++k) {
    if (!(delays_s[k] >= 0.0) || (k > 0 && delays_s[k] < delays_s[k - 1])) {
      throw std::invalid_argument("TDL profile '" + name + "': delays must be non-negative and ascending");
    }
    if (!(powers[k] >= 0.0)) throw std::invalid_argument("TDL profile '" + name + "': negative tap power");
  }
  const double total = std::accumulate(powers.begin(), powers.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("TDL profile '" + name + "': tap powers sum to " + std::to_string(total));
  }
  if (!(doppler_hz >= 0.0)) throw std::invalid_argument("TDL profile '" + name + "': negative Doppler");
}

TdlProfile TdlProfile::from_normalized(std::string name, std::span<const double> normalized_delays,
                                       std::span<const double> powers_db, double delay_spread_s, double doppler_hz) {
  TdlProfile p;
  p.name = std::move(name);
  p.delay_spread_s = delay_spread_s;
  p.doppler_hz = doppler_hz;
  for (double d : normalized_delays) p.delays_s.push_back(d * delay_spread_s);
  for (double db : powers_db) p.powers.push_back(db_to_linear(db));
  const double total = std::accumulate(p.powers.begin(), p.powers.end(), 0.0);
  for (double& x : p.powers) x /= total;
  p.validate();
  return p;
}

TdlProfile TdlProfile::tdl_a() {
  static constexpr double d[] = {0.0, 0.3819, 0.5868, 1.3, 2.5};
  static constexpr double p[] = {-13.4, 0.0, -2.2, -6.0, -12.0};
  return from_normalized("tdl-a", d, p, 30e-9, 10.0);
}

TdlProfile TdlProfile::tdl_b() {
  static constexpr double d[] = {0.0, 0.2155, 0.3752, 0.7, 1.5};
  static constexpr double p[] = {0.0, -4.0, -3.4, -6.0, -10.0};
  return from_normalized("tdl-b", d, p, 100e-9, 400.0);
}

TdlProfile TdlProfile::tdl_c() {
  static constexpr double d[] = {0.0, 0.2099, 0.6, 1.5, 3.5};
  static constexpr double p[] = {-4.4, -1.2, -3.5, -6.0, -10.0};
  return from_normalized("tdl-c", d, p, 300e-9, 100.0);
}

TdlProfile TdlProfile::parse(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
  if (parts.empty() || parts.size() > 3) throw std::invalid_argument("bad TDL profile spec '" + spec + "'");
  TdlProfile base;
  if (parts[0] == "tdl-a") {
    base = tdl_a();
  } else if (parts[0] == "tdl-b") {
    base = tdl_b();
  } else if (parts[0] == "tdl-c") {
    base = tdl_c();
  } else {
    throw std::invalid_argument("unknown TDL profile '" + parts[0] + "' (known: tdl-a, tdl-b, tdl-c)");
  }
  try {
    if (parts.size() >= 2 && !parts[1].empty()) {
      const double ds = std::stod(parts[1]) * 1e-9;
      if (!(ds > 0.0)) throw std::invalid_argument("delay spread must be positive");
      const double scale = ds / base.delay_spread_s;
      for (double& d : base.delays_s) d *= scale;
      base.delay_spread_s = ds;
    }
    if (parts.size() == 3) {
      const auto dots = parts[2].find("..");
      if (dots == std::string::npos) {
        base.doppler_hz = std::stod(parts[2]);
        base.doppler_min_hz = -1.0;
      } else {
        base.doppler_min_hz = std::stod(parts[2].substr(0, dots));
        base.doppler_hz = std::stod(parts[2].substr(dots + 2));
        if (base.doppler_min_hz < 0.0 || base.doppler_min_hz > base.doppler_hz) {
          throw std::invalid_argument("Doppler range must satisfy 0 <= lo <= hi");
        }
      }
    }
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("bad TDL profile spec '" + spec + "': " + e.what());
  }
  base.name = spec;
  base.validate();
  return base;
}

ChannelRealization::ChannelRealization(int num_ues, int num_subcarriers, int num_symbols, int bs_antennas,
                                       int ue_antennas, double noise_power)
    : ues_(num_ues), s_(num_subcarriers), t_(num_symbols), b_(bs_antennas), nu_(ue_antennas), n0_(noise_power) {
  if (num_ues < 0 || num_subcarriers <= 0 || num_symbols <= 0 || bs_antennas <= 0 || ue_antennas <= 0) {
    throw std::invalid_argument("ChannelRealization: bad dimensions " +
                                fmt_dims(num_subcarriers, num_symbols, bs_antennas, ue_antennas));
  }
  data_.assign(static_cast<std::size_t>(num_ues) * s_ * t_ * b_ * nu_, cd(0.0, 0.0));
}

CMatrix ChannelRealization::effective(int u, const CVector& beam) const {
  if (beam.size() != nu_) throw std::invalid_argument("beam length does not match N_u");
  CMatrix out(static_cast<Eigen::Index>(s_) * t_, b_);
  for (int s = 0; s < s_; ++s) {
    for (int t = 0; t < t_; ++t) out.row(s * t_ + t) = (h(u, s, t) * beam).transpose();
  }
  return out;
}

bool ChannelRealization::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](const cd& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

TapProcess sample_taps(const TdlProfile& profile, double doppler_hz, int num_symbols, double symbol_duration_s,
                       Rng& rng, int sinusoids) {
  const auto taps = static_cast<Eigen::Index>(profile.powers.size());
  TapProcess out = TapProcess::Zero(taps, num_symbols);
  for (Eigen::Index k = 0; k < taps; ++k) {
    const double amp = std::sqrt(profile.powers[static_cast<std::size_t>(k)] / sinusoids);
    for (int m = 0; m < sinusoids; ++m) {
      const double alpha = rng.uniform(0.0, kTwoPi);
      const double phi = rng.uniform(0.0, kTwoPi);
      const cd step = std::polar(1.0, kTwoPi * doppler_hz * std::cos(alpha) * symbol_duration_s);
      cd z = std::polar(amp, phi);
      for (int t = 0; t < num_symbols; ++t) {
        out(k, t) += z;
        z *= step;
      }
    }
  }
  return out;
}

namespace {

void check_cp(std::span<const double> delays_s, double cyclic_prefix_s) {
  for (double d : delays_s) {
    if (d > cyclic_prefix_s) {
      throw std::invalid_argument("tap delay " + std::to_string(d * 1e9) + " ns exceeds the cyclic prefix (" +
                                  std::to_string(cyclic_prefix_s * 1e9) + " ns)");
    }
  }
}

CMatrix steering(std::span<const double> delays_s, double df, int num_subcarriers) {
  CMatrix e(num_subcarriers, static_cast<Eigen::Index>(delays_s.size()));
  for (int s = 0; s < num_subcarriers; ++s) {
    for (std::size_t k = 0; k < delays_s.size(); ++k) {
      e(s, static_cast<Eigen::Index>(k)) = std::polar(1.0, -kTwoPi * s * df * delays_s[k]);
    }
  }
  return e;
}

}  // namespace

CVector cir_to_freq(std::span<const cd> gains, std::span<const double> delays_s, double subcarrier_spacing_hz,
                    int num_subcarriers, double cyclic_prefix_s) {
  if (gains.size() != delays_s.size()) throw std::invalid_argument("cir_to_freq: gains and delays differ in length");
  check_cp(delays_s, cyclic_prefix_s);
  const Eigen::Map<const CVector> a(gains.data(), static_cast<Eigen::Index>(gains.size()));
  return steering(delays_s, subcarrier_spacing_hz, num_subcarriers) * a;
}

void sample_tdl(const TdlProfile& profile, const phy::SlotConfig& cfg, int ue, Rng& rng, ChannelRealization& out) {
  check_cp(profile.delays_s, cfg.cyclic_prefix_s());
  const CMatrix e = steering(profile.delays_s, cfg.subcarrier_spacing_hz, cfg.num_subcarriers);
  double fd = profile.doppler_hz;
  if (profile.doppler_min_hz >= 0.0 && profile.doppler_min_hz < profile.doppler_hz) {
    fd = rng.uniform(profile.doppler_min_hz, profile.doppler_hz);
  }
  for (int n = 0; n < cfg.ue_antennas; ++n) {
    for (int b = 0; b < cfg.bs_antennas; ++b) {
      const CMatrix freq = e * sample_taps(profile, fd, cfg.num_symbols, cfg.symbol_duration_s(), rng);
      for (int s = 0; s < cfg.num_subcarriers; ++s) {
        for (int t = 0; t < cfg.num_symbols; ++t) out.h(ue, s, t)(b, n) = freq(s, t);
      }
    }
  }
}

CMatrix precode(const phy::ResourceGrid& grid, const CVector& beam) {
  const auto s = grid.symbols.rows();
  const auto t = grid.symbols.cols();
  CMatrix x(s * t, beam.size());
  for (Eigen::Index i = 0; i < s; ++i) {
    for (Eigen::Index j = 0; j < t; ++j) x.row(i * t + j) = grid.symbols(i, j) * beam.transpose();
  }
  return x;
}

CMatrix apply_channel(std::span<const CMatrix> tx, const ChannelRealization& h, Rng& rng) {
  const int s_n = h.num_subcarriers();
  const int t_n = h.num_symbols();
  if (static_cast<int>(tx.size()) > h.num_ues()) throw std::invalid_argument("apply_channel: more UEs than channels");
  for (const auto& x : tx) {
    if (x.rows() != static_cast<Eigen::Index>(s_n) * t_n || x.cols() != h.ue_antennas()) {
      throw std::invalid_argument("apply_channel: transmit grid is " + std::to_string(x.rows()) + "x" +
                                  std::to_string(x.cols()) + ", channel expects " +
                                  std::to_string(s_n * t_n) + "x" + std::to_string(h.ue_antennas()));
    }
  }
  CMatrix y = CMatrix::Zero(static_cast<Eigen::Index>(s_n) * t_n, h.bs_antennas());
  for (std::size_t u = 0; u < tx.size(); ++u) {
    for (int s = 0; s < s_n; ++s) {
      for (int t = 0; t < t_n; ++t) {
        const auto r = s * t_n + t;
        y.row(r) += (h.h(static_cast<int>(u), s, t) * tx[u].row(r).transpose()).transpose();
      }
    }
  }
  if (h.noise_power() > 0.0) {
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] += rng.complex_normal(h.noise_power());
  }
  return y;
}

TdlSource::TdlSource(std::vector<TdlProfile> profiles) : profiles_(std::move(profiles)) {
  if (profiles_.empty()) throw std::invalid_argument("TdlSource needs at least one profile");
  for (const auto& p : profiles_) p.validate();
}

ChannelRealization TdlSource::sample(const phy::SlotConfig& cfg, int num_ues, double noise_power, Rng& rng) const {
  ChannelRealization h(num_ues, cfg.num_subcarriers, cfg.num_symbols, cfg.bs_antennas, cfg.ue_antennas, noise_power);
  const std::uint64_t base = rng.next_u64();
  for (int u = 0; u < num_ues; ++u) {
    Rng ue_rng(mix_seed(base, static_cast<std::uint64_t>(u)));
    sample_tdl(profiles_[static_cast<std::size_t>(u) % profiles_.size()], cfg, u, ue_rng, h);
  }
  return h;
}

std::string TdlSource::describe() const {
  std::string out = "tdl:";
  for (std::size_t i = 0; i < profiles_.size(); ++i) out += (i ? "," : "") + profiles_[i].name;
  return out;
}

ChannelRealization IidSource::sample(const phy::SlotConfig& cfg, int num_ues, double noise_power, Rng& rng) const {
  ChannelRealization h(num_ues, cfg.num_subcarriers, cfg.num_symbols, cfg.bs_antennas, cfg.ue_antennas, noise_power);
  for (auto& z : h.raw()) z = rng.complex_normal(1.0);
  return h;
}

void CirDataset::append(const ChannelRealization& h) {
  if (values.empty() && num_samples() == 0) {
    num_subcarriers = h.num_subcarriers();
    num_symbols = h.num_symbols();
    bs_antennas = h.bs_antennas();
    ue_antennas = h.ue_antennas();
    num_ues = h.num_ues();
  }
  if (h.num_subcarriers() != num_subcarriers || h.num_symbols() != num_symbols || h.bs_antennas() != bs_antennas ||
      h.ue_antennas() != ue_antennas || h.num_ues() != num_ues) {
    throw std::invalid_argument("CirDataset::append: realization dims differ from the dataset");
  }
  values.reserve(values.size() + sample_size());
  for (int u = 0; u < num_ues; ++u)
    for (int b = 0; b < bs_antennas; ++b)
      for (int n = 0; n < ue_antennas; ++n)
        for (int s = 0; s < num_subcarriers; ++s)
          for (int t = 0; t < num_symbols; ++t) {
            const cd z = h.h(u, s, t)(b, n);
            values.emplace_back(static_cast<float>(z.real()), static_cast<float>(z.imag()));
          }
}

ChannelRealization CirDataset::realization(std::size_t index, double noise_power) const {
  if (index >= num_samples()) throw std::out_of_range("CirDataset: sample index out of range");
  ChannelRealization h(num_ues, num_subcarriers, num_symbols, bs_antennas, ue_antennas, noise_power);
  auto it = values.begin() + static_cast<std::ptrdiff_t>(index * sample_size());
  for (int u = 0; u < num_ues; ++u)
    for (int b = 0; b < bs_antennas; ++b)
      for (int n = 0; n < ue_antennas; ++n)
        for (int s = 0; s < num_subcarriers; ++s)
          for (int t = 0; t < num_symbols; ++t, ++it) h.h(u, s, t)(b, n) = cd(it->real(), it->imag());
  return h;
}

namespace {

constexpr char kMagic[4] = {'C', 'I', 'R', 'D'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 6 * 4;

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& buf, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
  return v;
}

}  // namespace

void dataset_write(const std::string& path, const CirDataset& data) {
  if (data.sample_size() != 0 && data.values.size() % data.sample_size() != 0) {
    throw std::invalid_argument("dataset_write: payload is not a whole number of samples");
  }
  std::string buf(kMagic, 4);
  put_u32(buf, CirDataset::version);
  for (std::uint32_t v : {static_cast<std::uint32_t>(data.num_samples()), static_cast<std::uint32_t>(data.num_subcarriers),
                          static_cast<std::uint32_t>(data.num_symbols), static_cast<std::uint32_t>(data.bs_antennas),
                          static_cast<std::uint32_t>(data.ue_antennas), static_cast<std::uint32_t>(data.num_ues)}) {
    put_u32(buf, v);
  }
  buf.reserve(buf.size() + data.values.size() * 8);
  for (const auto& z : data.values) {
    put_u32(buf, std::bit_cast<std::uint32_t>(z.real()));
    put_u32(buf, std::bit_cast<std::uint32_t>(z.imag()));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

CirDataset dataset_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open CIR dataset '" + path + "'");
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < kHeaderBytes) {
    throw std::runtime_error("CIR dataset '" + path + "': file too short for header (" + std::to_string(buf.size()) +
                             " bytes)");
  }
  if (!std::equal(kMagic, kMagic + 4, buf.begin())) throw std::runtime_error("CIR dataset '" + path + "': bad magic");
  if (const auto v = get_u32(buf, 4); v != CirDataset::version) {
    throw std::runtime_error("CIR dataset '" + path + "': unsupported version " + std::to_string(v));
  }
  CirDataset d;
  const std::uint64_t n = get_u32(buf, 8);
  d.num_subcarriers = static_cast<int>(get_u32(buf, 12));
  d.num_symbols = static_cast<int>(get_u32(buf, 16));
  d.bs_antennas = static_cast<int>(get_u32(buf, 20));
  d.ue_antennas = static_cast<int>(get_u32(buf, 24));
  d.num_ues = static_cast<int>(get_u32(buf, 28));
  const std::uint64_t expected = kHeaderBytes + n * d.sample_size() * 8;
  if (buf.size() != expected) {
    throw std::runtime_error("CIR dataset '" + path + "': header declares " + std::to_string(n) + " samples (" +
                             std::to_string(expected) + " bytes) but file has " + std::to_string(buf.size()) +
                             " bytes");
  }
  d.values.resize(n * d.sample_size());
  std::size_t pos = kHeaderBytes;
  for (auto& z : d.values) {
    z = {std::bit_cast<float>(get_u32(buf, pos)), std::bit_cast<float>(get_u32(buf, pos + 4))};
    pos += 8;
  }
  return d;
}

DatasetSource::DatasetSource(std::shared_ptr<const CirDataset> data, std::size_t limit)
    : data_(std::move(data)), limit_(limit) {
  if (!data_ || data_->num_samples() == 0) throw std::invalid_argument("DatasetSource: empty dataset");
  if (limit_ == 0 || limit_ > data_->num_samples()) limit_ = data_->num_samples();
}

ChannelRealization DatasetSource::sample(const phy::SlotConfig& cfg, int num_ues, double noise_power,
                                         Rng& rng) const {
  if (cfg.num_subcarriers != data_->num_subcarriers || cfg.num_symbols != data_->num_symbols ||
      cfg.bs_antennas != data_->bs_antennas || cfg.ue_antennas != data_->ue_antennas) {
    throw std::invalid_argument("DatasetSource: dataset dims " +
                                fmt_dims(data_->num_subcarriers, data_->num_symbols, data_->bs_antennas,
                                         data_->ue_antennas) +
                                " do not match the slot " +
                                fmt_dims(cfg.num_subcarriers, cfg.num_symbols, cfg.bs_antennas, cfg.ue_antennas));
  }
  if (num_ues > data_->num_ues) throw std::invalid_argument("DatasetSource: dataset holds fewer UEs than requested");
  const auto idx = static_cast<std::size_t>(rng.next_u64() % limit_);
  ChannelRealization full = data_->realization(idx, noise_power);
  if (num_ues == full.num_ues()) return full;
  ChannelRealization h(num_ues, cfg.num_subcarriers, cfg.num_symbols, cfg.bs_antennas, cfg.ue_antennas, noise_power);
  std::copy_n(full.raw().begin(), h.raw().size(), h.raw().begin());
  return h;
}

std::string DatasetSource::describe() const { return "dataset(" + std::to_string(limit_) + " samples)"; }

std::unique_ptr<ChannelSource> make_source(const std::string& spec) {
  if (spec == "iid") return std::make_unique<IidSource>();
  if (spec.rfind("tdl:", 0) == 0) {
    std::vector<TdlProfile> profiles;
    std::stringstream ss(spec.substr(4));
    for (std::string item; std::getline(ss, item, ',');) profiles.push_back(TdlProfile::parse(item));
    return std::make_unique<TdlSource>(std::move(profiles));
  }
  if (spec.rfind("dataset:", 0) == 0) {
    std::string path = spec.substr(8);
    std::size_t limit = 0;
    if (const auto colon = path.rfind(':'); colon != std::string::npos &&
        path.find_first_not_of("0123456789", colon + 1) == std::string::npos && colon + 1 < path.size()) {
      limit = std::stoul(path.substr(colon + 1));
      path.resize(colon);
    }
    return std::make_unique<DatasetSource>(std::make_shared<const CirDataset>(dataset_read(path)), limit);
  }
  throw std::invalid_argument("unknown channel source '" + spec + "' (expected tdl:..., iid or dataset:...)");
}

CovarianceModel estimate_covariance(const ChannelSource& source, const phy::SlotConfig& cfg, std::size_t num_samples,
                                    int ue, std::uint64_t seed) {
  if (num_samples < 100) {
    throw std::invalid_argument("estimate_covariance: need at least 100 samples, got " + std::to_string(num_samples));
  }
  const int num_ues = ue < 0 ? cfg.max_ues : ue + 1;
  CovarianceModel cov;
  cov.frequency = CMatrix::Zero(cfg.num_subcarriers, cfg.num_subcarriers);
  cov.time = CMatrix::Zero(cfg.num_symbols, cfg.num_symbols);
  CMatrix g(cfg.num_subcarriers, cfg.num_symbols);
  std::size_t count = 0;
  for (std::size_t i = 0; i < num_samples; ++i) {
    Rng rng(mix_seed(seed, i));
    const auto h = source.sample(cfg, num_ues, 0.0, rng);
    for (int u = ue < 0 ? 0 : ue; u < num_ues; ++u) {
      for (int b = 0; b < cfg.bs_antennas; ++b) {
        for (int n = 0; n < cfg.ue_antennas; ++n) {
          for (int s = 0; s < cfg.num_subcarriers; ++s)
            for (int t = 0; t < cfg.num_symbols; ++t) g(s, t) = h.h(u, s, t)(b, n);
          cov.frequency.noalias() += g * g.adjoint();
          cov.time.noalias() += g.transpose() * g.conjugate();
          ++count;
        }
      }
    }
  }
  cov.frequency /= static_cast<double>(count) * cfg.num_symbols;
  cov.time /= static_cast<double>(count) * cfg.num_subcarriers;
  cov.frequency = (0.5 * (cov.frequency + cov.frequency.adjoint())).eval();
  cov.time = (0.5 * (cov.time + cov.time.adjoint())).eval();
  cov.samples = num_samples;
  return cov;
}

}  // namespace nrx::channel

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

#include "nrx/rx/classical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace nrx::rx {

namespace {

constexpr double kNoiseFloor = 1e-12;

/// Pilot subcarriers per pilot symbol, both ascending.
struct PilotLayout {
  std::vector<int> symbols;
  std::vector<int> subcarriers;
};

PilotLayout layout_of(const phy::PilotBook& pilots) {
  if (pilots.positions.empty()) throw std::invalid_argument("channel estimation: empty pilot set");
  std::map<int, std::vector<int>> by_symbol;
  for (const auto& [s, t] : pilots.positions) by_symbol[t].push_back(s);
  PilotLayout l;
  for (auto& [t, subs] : by_symbol) {
    std::sort(subs.begin(), subs.end());
    if (l.symbols.empty()) {
      l.subcarriers = subs;
    } else if (subs != l.subcarriers) {
      throw std::invalid_argument("channel estimation: pilot symbols use different subcarrier sets");
    }
    l.symbols.push_back(t);
  }
  return l;
}

/// Pilot-division estimates, |pilot subcarriers| x |pilot symbols| per antenna.
std::vector<CMatrix> pilot_observations(const CMatrix& y, const phy::PilotBook& pilots, const PilotLayout& l,
                                        int num_symbols) {
  const auto b_n = y.cols();
  std::vector<CMatrix> obs(static_cast<std::size_t>(b_n),
                           CMatrix(static_cast<Eigen::Index>(l.subcarriers.size()),
                                   static_cast<Eigen::Index>(l.symbols.size())));
  for (std::size_t j = 0; j < l.symbols.size(); ++j) {
    for (std::size_t i = 0; i < l.subcarriers.size(); ++i) {
      const int s = l.subcarriers[i];
      const int t = l.symbols[j];
      const cd p = pilots.values(s, t);
      const cd w = std::conj(p) / std::norm(p);
      for (Eigen::Index b = 0; b < b_n; ++b) {
        obs[static_cast<std::size_t>(b)](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            y(s * num_symbols + t, b) * w;
      }
    }
  }
  return obs;
}

int nearest_index(const std::vector<int>& sorted, int x) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(sorted.size()); ++i) {
    if (std::abs(sorted[static_cast<std::size_t>(i)] - x) < std::abs(sorted[static_cast<std::size_t>(best)] - x)) {
      best = i;
    }
  }
  return best;
}

/// Wiener filter R[:, idx] (R[idx, idx] + noise I)^-1.
CMatrix wiener(const CMatrix& r, const std::vector<int>& idx, double noise) {
  const auto n = static_cast<Eigen::Index>(idx.size());
  CMatrix cross(r.rows(), n);
  CMatrix auto_(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    cross.col(j) = r.col(idx[static_cast<std::size_t>(j)]);
    for (Eigen::Index i = 0; i < n; ++i) auto_(i, j) = r(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  auto_.diagonal().array() += noise;
  // (A^H)^-1 = A^-H with A Hermitian, so W = (A^-1 cross^H)^H.
  return auto_.ldlt().solve(cross.adjoint()).adjoint();
}

}  // namespace

CMatrix ls_estimate(const CMatrix& y, const phy::PilotBook& pilots, const phy::SlotConfig& cfg) {
  const auto l = layout_of(pilots);
  const auto obs = pilot_observations(y, pilots, l, cfg.num_symbols);
  const int s_n = cfg.num_subcarriers;
  const auto& ps = l.subcarriers;
  CMatrix out(static_cast<Eigen::Index>(s_n) * cfg.num_symbols, y.cols());
  // frequency interpolation on each pilot symbol
  std::vector<CMatrix> freq(l.symbols.size(), CMatrix(s_n, y.cols()));
  for (std::size_t j = 0; j < l.symbols.size(); ++j) {
    for (int s = 0; s < s_n; ++s) {
      const auto hi = std::lower_bound(ps.begin(), ps.end(), s);
      for (Eigen::Index b = 0; b < y.cols(); ++b) {
        const auto& o = obs[static_cast<std::size_t>(b)];
        const auto jj = static_cast<Eigen::Index>(j);
        cd v;
        if (hi == ps.begin()) {
          v = o(0, jj);
        } else if (hi == ps.end()) {
          v = o(static_cast<Eigen::Index>(ps.size()) - 1, jj);
        } else {
          const auto i1 = hi - ps.begin();
          if (*hi == s) {
            v = o(i1, jj);
          } else {
            const double w = static_cast<double>(s - ps[static_cast<std::size_t>(i1 - 1)]) /
                             (*hi - ps[static_cast<std::size_t>(i1 - 1)]);
            v = (1.0 - w) * o(i1 - 1, jj) + w * o(i1, jj);
          }
        }
        freq[j](s, b) = v;
      }
    }
  }
  for (int t = 0; t < cfg.num_symbols; ++t) {
    const auto& f = freq[static_cast<std::size_t>(nearest_index(l.symbols, t))];
    for (int s = 0; s < s_n; ++s) out.row(s * cfg.num_symbols + t) = f.row(s);
  }
  return out;
}

CMatrix lmmse_estimate(const CMatrix& y, const phy::PilotBook& pilots, const phy::SlotConfig& cfg,
                       const channel::CovarianceModel& cov, double noise_power) {
  const int s_n = cfg.num_subcarriers;
  const int t_n = cfg.num_symbols;
  if (cov.frequency.rows() != s_n || cov.time.rows() != t_n) {
    throw std::invalid_argument("lmmse_estimate: covariance is " + std::to_string(cov.frequency.rows()) + "x" +
                                std::to_string(cov.time.rows()) + ", grid is " + std::to_string(s_n) + "x" +
                                std::to_string(t_n));
  }
  const double n0 = std::max(noise_power, kNoiseFloor);
  const auto l = layout_of(pilots);
  const auto obs = pilot_observations(y, pilots, l, t_n);

  const CMatrix& rf = cov.frequency;
  const CMatrix wf = wiener(rf, l.subcarriers, n0);
  CMatrix rf_cols(static_cast<Eigen::Index>(l.subcarriers.size()), s_n);
  for (std::size_t i = 0; i < l.subcarriers.size(); ++i) rf_cols.row(static_cast<Eigen::Index>(i)) = rf.row(l.subcarriers[i]);
  const double power = rf.diagonal().real().mean();
  // error left after the frequency stage, per subcarrier; it is the
  // observation noise of the time stage
  const Eigen::VectorXd err_f = (rf.diagonal() - (wf * rf_cols).diagonal()).real().cwiseMax(0.0);
  const CMatrix rho = cov.time / cov.time.diagonal().real().mean();

  CMatrix out(static_cast<Eigen::Index>(s_n) * t_n, y.cols());
  std::vector<CMatrix> hf;
  for (Eigen::Index b = 0; b < y.cols(); ++b) hf.push_back(wf * obs[static_cast<std::size_t>(b)]);
  for (int s = 0; s < s_n; ++s) {
    const CMatrix wt = wiener(rho, l.symbols, std::max(err_f(s) / power, kNoiseFloor));  // T x |pilot symbols|
    for (Eigen::Index b = 0; b < y.cols(); ++b) {
      const CVector h = wt * hf[static_cast<std::size_t>(b)].row(s).transpose();
      for (int t = 0; t < t_n; ++t) out(s * t_n + t, b) = h(t);
    }
  }
  return out;
}

Eigen::VectorXd Equalized::noise_var() const {
  return ((1.0 - gain.array()) / gain.array()).max(kNoiseFloor).matrix();
}

Equalized lmmse_equalize(const CVector& y, const CMatrix& h, double noise_power) {
  const auto u = h.cols();
  CMatrix g = h.adjoint() * h;
  CMatrix a = g;
  a.diagonal().array() += std::max(noise_power, 0.0);
  const auto ldlt = a.ldlt();
  Equalized e;
  e.x = ldlt.solve(h.adjoint() * y);
  e.gain = ldlt.solve(g).diagonal().real();
  for (Eigen::Index k = 0; k < u; ++k) e.gain(k) = std::clamp(e.gain(k), kNoiseFloor, 1.0);
  return e;
}

Eigen::VectorXd app_demap(cd z, const phy::Constellation& c, double noise_var, DemapMode mode) {
  if (!(noise_var > 0.0)) throw std::invalid_argument("app_demap: noise variance must be positive");
  const int m = c.bits_per_symbol();
  const int n = c.size();
  double metric[64];
  double best = -std::numeric_limits<double>::infinity();
  for (int x = 0; x < n; ++x) {
    metric[x] = -std::norm(z - c.point(x)) / noise_var;
    best = std::max(best, metric[x]);
  }
  Eigen::VectorXd llr(m);
  for (int k = 0; k < m; ++k) {
    double lse[2] = {0.0, 0.0};
    double mx[2] = {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (int x = 0; x < n; ++x) {
      const int b = c.bit(x, k);
      mx[b] = std::max(mx[b], metric[x]);
      lse[b] += std::exp(metric[x] - best);
    }
    if (mode == DemapMode::maxlog) {
      llr(k) = mx[1] - mx[0];
    } else {
      llr(k) = std::log(lse[1]) - std::log(lse[0]);
      // far from the points every term underflows; fall back to max-log
      if (!std::isfinite(llr(k))) llr(k) = mx[1] - mx[0];
    }
  }
  return llr;
}

bool is_label_recursive(const phy::Constellation& high, const phy::Constellation& low) {
  const int mh = high.bits_per_symbol();
  const int ml = low.bits_per_symbol();
  if (ml >= mh || ml % 2 != 0) return false;
  const double to_low = (low.scale() / high.scale()) * (1 << (ml / 2)) / (1 << (mh / 2));
  for (int label = 0; label < high.size(); ++label) {
    if (low.nearest(high.point(label) * to_low) != (label >> (mh - ml))) return false;
  }
  return true;
}

Eigen::VectorXd masked_demap(cd z, const phy::Constellation& high, int m_low, double noise_var, DemapMode mode) {
  if (m_low >= high.bits_per_symbol()) throw std::invalid_argument("masked_demap: m_low must be below m_high");
  if (!is_label_recursive(high, phy::Constellation::qam(m_low))) {
    throw std::invalid_argument("masked_demap: constellation labels are not quadrant-recursive");
  }
  return app_demap(z, high, noise_var, mode).head(m_low);
}

namespace {

struct Candidate {
  double metric;
  std::vector<int> labels;  // by layer of the sorted QR
};

void check_streams(const CMatrix& h, std::span<const phy::Constellation* const> cs) {
  if (static_cast<Eigen::Index>(cs.size()) != h.cols()) {
    throw std::invalid_argument("detector: " + std::to_string(cs.size()) + " constellations for " +
                                std::to_string(h.cols()) + " streams");
  }
}

/// Max-log LLRs from a list of (metric, per-stream labels).
std::vector<Eigen::VectorXd> list_llrs(const std::vector<std::pair<double, std::vector<int>>>& list,
                                       std::span<const phy::Constellation* const> cs, double noise_power,
                                       double clip) {
  const double n0 = std::max(noise_power, kNoiseFloor);
  std::vector<Eigen::VectorXd> out;
  for (std::size_t u = 0; u < cs.size(); ++u) {
    const int m = cs[u]->bits_per_symbol();
    Eigen::VectorXd llr(m);
    for (int k = 0; k < m; ++k) {
      double best[2] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
      for (const auto& [d, labels] : list) {
        const int b = cs[u]->bit(labels[u], k);
        best[b] = std::min(best[b], d);
      }
      double l;
      if (!std::isfinite(best[0])) {
        l = clip;
      } else if (!std::isfinite(best[1])) {
        l = -clip;
      } else {
        l = (best[0] - best[1]) / n0;
      }
      llr(k) = std::clamp(l, -clip, clip);
    }
    out.push_back(std::move(llr));
  }
  return out;
}

double residual(const CVector& y, const CMatrix& h, std::span<const phy::Constellation* const> cs,
                const std::vector<int>& labels) {
  CVector x(h.cols());
  for (Eigen::Index u = 0; u < h.cols(); ++u) x(u) = cs[static_cast<std::size_t>(u)]->point(labels[static_cast<std::size_t>(u)]);
  return (y - h * x).squaredNorm();
}

}  // namespace

Detection kbest_detect(const CVector& y, const CMatrix& h, double noise_power,
                       std::span<const phy::Constellation* const> constellations, int k, double clip) {
  check_streams(h, constellations);
  if (k < 1) throw std::invalid_argument("kbest_detect: k must be >= 1");
  const auto u_n = h.cols();
  // weakest column first, so the strongest stream sits in the last layer,
  // which the search visits first
  std::vector<int> order(static_cast<std::size_t>(u_n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return h.col(a).squaredNorm() < h.col(b).squaredNorm(); });
  CMatrix hp(h.rows(), u_n);
  for (Eigen::Index j = 0; j < u_n; ++j) hp.col(j) = h.col(order[static_cast<std::size_t>(j)]);
  Eigen::HouseholderQR<CMatrix> qr(hp);
  const CMatrix r = qr.matrixQR().topRows(u_n).triangularView<Eigen::Upper>();
  const CVector yt = (qr.householderQ().adjoint() * y).head(u_n);

  std::vector<Candidate> list{{0.0, std::vector<int>(static_cast<std::size_t>(u_n), -1)}};
  std::vector<Candidate> next;
  for (Eigen::Index layer = u_n - 1; layer >= 0; --layer) {
    const auto& c = *constellations[static_cast<std::size_t>(order[static_cast<std::size_t>(layer)])];
    next.clear();
    for (const auto& cand : list) {
      cd interference = 0.0;
      for (Eigen::Index j = layer + 1; j < u_n; ++j) {
        const auto& cj = *constellations[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])];
        interference += r(layer, j) * cj.point(cand.labels[static_cast<std::size_t>(j)]);
      }
      const cd target = yt(layer) - interference;
      for (int x = 0; x < c.size(); ++x) {
        Candidate n = cand;
        n.metric += std::norm(target - r(layer, layer) * c.point(x));
        n.labels[static_cast<std::size_t>(layer)] = x;
        next.push_back(std::move(n));
      }
    }
    std::stable_sort(next.begin(), next.end(), [](const Candidate& a, const Candidate& b) { return a.metric < b.metric; });
    if (static_cast<int>(next.size()) > k) next.resize(static_cast<std::size_t>(k));
    list.swap(next);
  }

  std::vector<std::pair<double, std::vector<int>>> full;
  full.reserve(list.size());
  for (const auto& cand : list) {
    std::vector<int> labels(static_cast<std::size_t>(u_n));
    for (Eigen::Index j = 0; j < u_n; ++j) labels[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])] = cand.labels[static_cast<std::size_t>(j)];
    full.emplace_back(cand.metric, std::move(labels));
  }
  Detection d;
  d.labels = full.front().second;
  d.metric = residual(y, h, constellations, d.labels);
  d.llrs = list_llrs(full, constellations, noise_power, clip);
  return d;
}

Detection ml_detect_exhaustive(const CVector& y, const CMatrix& h,
                               std::span<const phy::Constellation* const> constellations) {
  check_streams(h, constellations);
  double space = 1.0;
  for (const auto* c : constellations) space *= c->size();
  if (space > static_cast<double>(1 << 20)) throw std::invalid_argument("ml_detect_exhaustive: search space too large");
  const auto u_n = constellations.size();
  std::vector<int> labels(u_n, 0);
  Detection d;
  d.metric = std::numeric_limits<double>::infinity();
  for (;;) {
    const double m = residual(y, h, constellations, labels);
    if (m < d.metric) {
      d.metric = m;
      d.labels = labels;
    }
    std::size_t i = 0;
    while (i < u_n && ++labels[i] == constellations[i]->size()) labels[i++] = 0;
    if (i == u_n) break;
  }
  return d;
}

namespace {

void check_obs(const SlotObservation& obs) {
  if (obs.cfg == nullptr) throw std::invalid_argument("receiver: missing slot config");
  if (obs.pilots.size() != obs.constellations.size()) {
    throw std::invalid_argument("receiver: pilot books and constellations differ in count");
  }
}

Eigen::VectorXd clipped(const Eigen::VectorXd& l) { return l.cwiseMax(-kLlrClip).cwiseMin(kLlrClip); }

template <typename PerRe>
SlotLlrs per_re(const SlotObservation& obs, const std::vector<CMatrix>& channels, PerRe&& detect) {
  const auto& cfg = *obs.cfg;
  const auto positions = phy::data_positions(cfg);
  const auto u_n = obs.constellations.size();
  SlotLlrs out(u_n);
  for (std::size_t u = 0; u < u_n; ++u) {
    out[u].resize(static_cast<Eigen::Index>(positions.size()) * obs.constellations[u]->bits_per_symbol());
  }
  CMatrix h(obs.y.cols(), static_cast<Eigen::Index>(u_n));
  for (std::size_t j = 0; j < positions.size(); ++j) {
    const auto [s, t] = positions[j];
    const auto row = s * cfg.num_symbols + t;
    for (std::size_t u = 0; u < u_n; ++u) h.col(static_cast<Eigen::Index>(u)) = channels[u].row(row).transpose();
    const CVector y = obs.y.row(row).transpose();
    const auto llrs = detect(y, h);
    for (std::size_t u = 0; u < u_n; ++u) {
      const auto m = obs.constellations[u]->bits_per_symbol();
      out[u].segment(static_cast<Eigen::Index>(j) * m, m) = clipped(llrs[u]);
    }
  }
  return out;
}

}  // namespace

SlotLlrs receive_ls_lmmse(const SlotObservation& obs) {
  check_obs(obs);
  std::vector<CMatrix> est;
  for (const auto& p : obs.pilots) est.push_back(ls_estimate(obs.y, p, *obs.cfg));
  return per_re(obs, est, [&](const CVector& y, const CMatrix& h) {
    const auto e = lmmse_equalize(y, h, obs.noise_power);
    const CVector z = e.unbiased();
    const Eigen::VectorXd var = e.noise_var();
    std::vector<Eigen::VectorXd> l;
    for (std::size_t u = 0; u < obs.constellations.size(); ++u) {
      const auto i = static_cast<Eigen::Index>(u);
      l.push_back(app_demap(z(i), *obs.constellations[u], var(i)));
    }
    return l;
  });
}

SlotLlrs receive_lmmse_kbest(const SlotObservation& obs, std::span<const channel::CovarianceModel> cov, int k) {
  check_obs(obs);
  if (cov.size() < obs.pilots.size()) throw std::invalid_argument("receiver: missing covariance for a UE");
  std::vector<CMatrix> est;
  for (std::size_t u = 0; u < obs.pilots.size(); ++u) {
    est.push_back(lmmse_estimate(obs.y, obs.pilots[u], *obs.cfg, cov[u], obs.noise_power));
  }
  return per_re(obs, est, [&](const CVector& y, const CMatrix& h) {
    return kbest_detect(y, h, obs.noise_power, obs.constellations, k).llrs;
  });
}

SlotLlrs receive_perfect_ml(const SlotObservation& obs, std::span<const CMatrix> true_channels) {
  check_obs(obs);
  const std::vector<CMatrix> ch(true_channels.begin(), true_channels.end());
  return per_re(obs, ch, [&](const CVector& y, const CMatrix& h) {
    double space = 1.0;
    for (const auto* c : obs.constellations) space *= c->size();
    return kbest_detect(y, h, obs.noise_power, obs.constellations, static_cast<int>(space)).llrs;
  });
}

}  // namespace nrx::rx

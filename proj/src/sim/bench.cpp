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

#include "nrx/sim/bench.hpp"

#include <algorithm>
#include <chrono>
#include <ostream>
#include <stdexcept>

#include "nrx/cgnn/receiver.hpp"
#include "nrx/channel/channel.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace nrx::sim {

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile: no samples");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

AffineFit fit_affine(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_affine: need two or more (x, y) pairs");
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd a(n, 2);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, 0) = 1.0;
    a(i, 1) = x[static_cast<std::size_t>(i)];
    rhs(i) = y[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector2d c = a.colPivHouseholderQr().solve(rhs);
  const double ss_res = (rhs - a * c).squaredNorm();
  const double ss_tot = (rhs.array() - rhs.mean()).square().sum();
  AffineFit f{c(0), c(1), ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0};
  return f;
}

LatencyReport latency_bench(const cgnn::NrxConfig& cfg, const cgnn::Weights& w, const phy::SlotConfig& slot,
                            std::span<const int> depths, int runs, int warmup, std::uint64_t seed) {
  if (depths.size() < 2) throw std::invalid_argument("latency_bench: need at least two depths for the fit");
  if (runs < 1 || warmup < 0) throw std::invalid_argument("latency_bench: runs must be positive");
#if defined(__GLIBC__)
  // Keep large buffers on the heap. Otherwise each call maps and unmaps them, and the
  // page-fault cost depends on what the process allocated before.
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  const auto table = phy::McsTable::nr_default();
  Rng rng(seed);
  // one fixed received slot; the content does not affect the work done
  const int ues = slot.max_ues;
  const CMatrix y = CMatrix::NullaryExpr(slot.num_res(), slot.bs_antennas, [&] { return rng.complex_normal(); });
  std::vector<phy::PilotBook> pilots;
  std::vector<phy::McsEntry> mcs;
  for (int u = 0; u < ues; ++u) {
    pilots.push_back(phy::make_pilots(slot, u, seed));
    mcs.push_back(table.at(cfg.mcs_indices[static_cast<std::size_t>(u) % cfg.mcs_indices.size()]));
  }
  auto run = [&](int depth) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto out = cgnn::nrx_forward(cfg, w, slot, y, pilots, mcs, 0.1, depth);
    const auto t1 = std::chrono::steady_clock::now();
    if (out.empty()) throw std::logic_error("latency_bench: empty output");
    return std::chrono::duration<double>(t1 - t0).count();
  };
  LatencyReport rep;
  for (int i = 0; i < warmup; ++i) {
    for (int d : depths) run(d);
  }
  for (int d : depths) rep.depths.push_back({.n_it = d});
  // round-robin over depths so slow drifts of the machine hit every depth alike
  for (int i = 0; i < runs; ++i) {
    for (auto& e : rep.depths) e.samples_s.push_back(run(e.n_it));
  }
  for (auto& e : rep.depths) {
    e.median_s = quantile(e.samples_s, 0.5);
    e.p10_s = quantile(e.samples_s, 0.1);
    e.p90_s = quantile(e.samples_s, 0.9);
  }
  std::vector<double> x, y_med;
  for (const auto& e : rep.depths) {
    x.push_back(e.n_it);
    y_med.push_back(e.median_s);
  }
  const auto f = fit_affine(x, y_med);
  rep.a = f.a;
  rep.b = f.b;
  rep.r2 = f.r2;
  return rep;
}

void write_latency_csv(std::ostream& out, const LatencyReport& report) {
  out << "n_it,median_s,p10_s,p90_s\n";
  const auto old = out.precision(9);
  for (const auto& e : report.depths) out << e.n_it << ',' << e.median_s << ',' << e.p10_s << ',' << e.p90_s << '\n';
  out << "# fit a=" << report.a << ",b=" << report.b << ",r2=" << report.r2 << '\n';
  out.precision(old);
}

}  // namespace nrx::sim

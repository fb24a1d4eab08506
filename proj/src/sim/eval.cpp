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

#include "nrx/sim/eval.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace nrx::sim {

void EvalConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("eval config: " + msg); };
  if (snr_db.empty()) fail("empty SNR grid");
  if (min_block_errors < 1 || max_blocks < 1) fail("stop rule needs positive block counts");
  if (mcs_indices.empty()) fail("no UE configured");
  if (threads < 1 || chunk < 1) fail("threads and chunk must be positive");
  if (skip_below_tbler < 0.0 || skip_below_tbler >= 1.0) fail("skip_below_tbler must lie in [0, 1)");
}

namespace {

/// Runs fn(k) for k in [0, n) on up to `threads` workers.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (int k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (int w = 0; w < std::min(threads, n); ++w) {
    pool.emplace_back([&] {
      for (int k = next++; k < n && !failed; k = next++) {
        try {
          fn(k);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::vector<MetricsRecord> evaluate_tbler(const EvalConfig& cfg, const phy::SlotConfig& slot,
                                          const phy::McsTable& table, const channel::ChannelSource& source,
                                          std::span<const Receiver* const> receivers) {
  cfg.validate();
  if (receivers.empty()) throw std::invalid_argument("evaluate_tbler: no receiver");
  std::vector<phy::McsEntry> mcs;
  for (int i : cfg.mcs_indices) mcs.push_back(table.at(i));
  phy::CodeBook codes;
  const auto nr = receivers.size();
  std::vector<bool> skipped(nr, false);
  std::vector<std::vector<MetricsRecord>> per_rx(nr);

  for (std::size_t p = 0; p < cfg.snr_db.size(); ++p) {
    const double n0 = noise_power_from_snr_db(cfg.snr_db[p]);
    std::vector<MetricsRecord> rec(nr);
    std::vector<bool> done(nr);
    for (std::size_t r = 0; r < nr; ++r) {
      rec[r].receiver = receivers[r]->name();
      rec[r].snr_db = cfg.snr_db[p];
      done[r] = skipped[r];
    }
    const auto point_seed = mix_seed(cfg.seed, p);
    std::uint64_t next = 0;
    while (std::find(done.begin(), done.end(), false) != done.end()) {
      // results[k][r]: blocks of slot next + k for receiver r
      std::vector<std::vector<std::vector<BlockResult>>> results(static_cast<std::size_t>(cfg.chunk),
                                                                 std::vector<std::vector<BlockResult>>(nr));
      parallel_for(cfg.chunk, cfg.threads, [&](int k) {
        Rng rng(mix_seed(point_seed, next + static_cast<std::uint64_t>(k)));
        const auto sample = simulate_slot(slot, mcs, source, n0, rng, codes);
        for (std::size_t r = 0; r < nr; ++r) {
          if (done[r]) continue;
          results[static_cast<std::size_t>(k)][r] = decode_blocks(sample, receivers[r]->receive(slot, sample), codes);
        }
      });
      for (const auto& slot_results : results) {
        for (std::size_t r = 0; r < nr; ++r) {
          if (done[r]) continue;
          for (const auto& b : slot_results[r]) {
            ++rec[r].blocks;
            rec[r].block_errors += b.block_error;
            rec[r].bit_errors += b.bit_errors;
            rec[r].bits += b.bits;
          }
          done[r] = rec[r].block_errors >= cfg.min_block_errors || rec[r].blocks >= cfg.max_blocks;
        }
      }
      next += static_cast<std::uint64_t>(cfg.chunk);
    }
    for (std::size_t r = 0; r < nr; ++r) {
      if (skipped[r]) continue;
      per_rx[r].push_back(rec[r]);
      skipped[r] = rec[r].tbler() < cfg.skip_below_tbler;
    }
  }
  std::vector<MetricsRecord> out;
  for (auto& v : per_rx) out.insert(out.end(), v.begin(), v.end());
  return out;
}

SnrAtTarget snr_at_tbler(std::span<const MetricsRecord> curve, double target) {
  if (!(target > 0.0 && target < 1.0)) throw std::invalid_argument("snr_at_tbler: target must lie in (0, 1)");
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (!(curve[i].snr_db > curve[i - 1].snr_db)) throw std::invalid_argument("snr_at_tbler: SNRs must increase");
  }
  for (const auto& r : curve) {
    if (r.blocks <= 0) throw std::invalid_argument("snr_at_tbler: point without blocks");
  }
  // log10 TBLER and its delta-method variance
  auto point = [](const MetricsRecord& r) {
    const double n = static_cast<double>(r.blocks);
    const double p = r.block_errors > 0 ? r.tbler() : 0.5 / n;
    const double var = (1.0 - p) / (n * p) / (std::log(10.0) * std::log(10.0));
    return std::pair{std::log10(p), var};
  };
  const double lt = std::log10(target);
  for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
    const auto [l1, v1] = point(curve[i]);
    const auto [l2, v2] = point(curve[i + 1]);
    if (l1 >= lt && l2 <= lt && l1 > l2) {
      const double dx = curve[i + 1].snr_db - curve[i].snr_db;
      const double d = l1 - l2;
      const double a = l1 - lt;
      const double x = curve[i].snr_db + dx * a / d;
      const double var = dx * dx * ((lt - l2) * (lt - l2) * v1 + a * a * v2) / (d * d * d * d);
      return {x, std::sqrt(var)};
    }
  }
  if (curve.size() == 1 && point(curve[0]).first == lt) return {curve[0].snr_db, 0.0};
  std::ostringstream os;
  os << "snr_at_tbler: target " << target << " not bracketed by the curve (";
  for (std::size_t i = 0; i < curve.size(); ++i) os << (i ? ", " : "") << curve[i].snr_db << " dB: " << curve[i].tbler();
  os << ')';
  throw std::runtime_error(os.str());
}

std::vector<MetricsRecord> curve_of(std::span<const MetricsRecord> records, const std::string& receiver) {
  std::vector<MetricsRecord> out;
  for (const auto& r : records) {
    if (r.receiver == receiver) out.push_back(r);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.snr_db < b.snr_db; });
  return out;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRecord> records) {
  out << "receiver,snr_db,blocks,block_errors,bit_errors,bits,tbler,ber\n";
  const auto old = out.precision(10);
  for (const auto& r : records) {
    out << r.receiver << ',' << r.snr_db << ',' << r.blocks << ',' << r.block_errors << ',' << r.bit_errors << ','
        << r.bits << ',' << r.tbler() << ',' << r.ber() << '\n';
  }
  out.precision(old);
}

}  // namespace nrx::sim

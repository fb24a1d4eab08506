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

#include "nrx/phy/ldpc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>
#include <string>

namespace nrx::phy {

namespace {

using Words = std::vector<std::uint64_t>;

inline bool get_bit(const Words& w, int i) { return (w[static_cast<std::size_t>(i >> 6)] >> (i & 63)) & 1u; }
inline void set_bit(Words& w, int i) { w[static_cast<std::size_t>(i >> 6)] |= std::uint64_t{1} << (i & 63); }

/// Evenly spread selection of \p count items out of \p pool.
std::vector<int> spread(const std::vector<int>& pool, int count) {
  std::vector<int> out;
  const auto size = static_cast<long long>(pool.size());
  for (long long i = 0; i < count; ++i) out.push_back(pool[static_cast<std::size_t>((i * size) / count)]);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

LdpcCode::LdpcCode(int n, std::vector<std::vector<int>> checks) : n_(n), checks_(std::move(checks)) {
  if (n_ <= 0 || checks_.empty() || static_cast<int>(checks_.size()) >= n_) {
    throw std::invalid_argument("LDPC code needs 0 < checks < n");
  }
  for (auto& row : checks_) {
    std::sort(row.begin(), row.end());
    if (row.empty() || row.front() < 0 || row.back() >= n_ || std::adjacent_find(row.begin(), row.end()) != row.end()) {
      throw std::invalid_argument("LDPC check with invalid or repeated variable index");
    }
  }
  build_encoder();
  adjust(0, 0);
  check_offset_.push_back(0);
  for (const auto& row : checks_) {
    edge_var_.insert(edge_var_.end(), row.begin(), row.end());
    check_offset_.push_back(static_cast<int>(edge_var_.size()));
  }
}

void LdpcCode::build_encoder() {
  // Reduced row echelon form of H over GF(2). Pivots are searched from the
  // last column backwards so that parity positions gather at the end.
  const int m = num_checks();
  const std::size_t words = static_cast<std::size_t>((n_ + 63) / 64);
  std::vector<Words> rows(static_cast<std::size_t>(m), Words(words, 0));
  for (int r = 0; r < m; ++r) {
    for (int v : checks_[static_cast<std::size_t>(r)]) set_bit(rows[static_cast<std::size_t>(r)], v);
  }
  int rank = 0;
  std::vector<int> pivots;
  for (int col = n_ - 1; col >= 0 && rank < m; --col) {
    int sel = -1;
    for (int r = rank; r < m; ++r) {
      if (get_bit(rows[static_cast<std::size_t>(r)], col)) {
        sel = r;
        break;
      }
    }
    if (sel < 0) continue;
    std::swap(rows[static_cast<std::size_t>(sel)], rows[static_cast<std::size_t>(rank)]);
    const auto& piv = rows[static_cast<std::size_t>(rank)];
    for (int r = 0; r < m; ++r) {
      if (r == rank || !get_bit(rows[static_cast<std::size_t>(r)], col)) continue;
      auto& row = rows[static_cast<std::size_t>(r)];
      for (std::size_t w = 0; w < words; ++w) row[w] ^= piv[w];
    }
    pivots.push_back(col);
    ++rank;
  }
  std::vector<char> is_pivot(static_cast<std::size_t>(n_), 0);
  for (int p : pivots) is_pivot[static_cast<std::size_t>(p)] = 1;
  info_columns_.clear();
  for (int c = 0; c < n_; ++c) {
    if (!is_pivot[static_cast<std::size_t>(c)]) info_columns_.push_back(c);
  }
  // Row r of the RREF reads: x[pivot r] = sum over info columns j of R[r][j] x[j].
  const std::size_t info_words = (info_columns_.size() + 63) / 64;
  pivot_columns_ = pivots;
  parity_rows_.assign(pivots.size(), Words(info_words, 0));
  for (std::size_t r = 0; r < pivots.size(); ++r) {
    for (std::size_t j = 0; j < info_columns_.size(); ++j) {
      if (get_bit(rows[r], info_columns_[j])) set_bit(parity_rows_[r], static_cast<int>(j));
    }
  }
}

void LdpcCode::adjust(int num_punctured, int num_shortened) {
  std::vector<int> parity = pivot_columns_;
  std::sort(parity.begin(), parity.end());
  if (num_punctured < 0 || num_punctured > static_cast<int>(parity.size()) || num_shortened < 0 ||
      num_shortened >= static_cast<int>(info_columns_.size())) {
    throw std::invalid_argument("LDPC rate adjustment out of range");
  }
  punctured_ = spread(parity, num_punctured);
  shortened_ = spread(info_columns_, num_shortened);
  payload_positions_.clear();
  for (int c : info_columns_) {
    if (!std::binary_search(shortened_.begin(), shortened_.end(), c)) payload_positions_.push_back(c);
  }
  transmitted_positions_.clear();
  for (int c = 0; c < n_; ++c) {
    if (!std::binary_search(punctured_.begin(), punctured_.end(), c) &&
        !std::binary_search(shortened_.begin(), shortened_.end(), c)) {
      transmitted_positions_.push_back(c);
    }
  }
}

std::vector<std::uint8_t> LdpcCode::encode_full(std::span<const std::uint8_t> payload) const {
  if (static_cast<int>(payload.size()) != k()) {
    throw std::invalid_argument("LDPC encode: payload has " + std::to_string(payload.size()) + " bits, code expects " +
                                std::to_string(k()));
  }
  std::vector<std::uint8_t> cw(static_cast<std::size_t>(n_), 0);
  for (std::size_t i = 0; i < payload.size(); ++i) cw[static_cast<std::size_t>(payload_positions_[i])] = payload[i] & 1;
  Words info((info_columns_.size() + 63) / 64, 0);
  for (std::size_t j = 0; j < info_columns_.size(); ++j) {
    if (cw[static_cast<std::size_t>(info_columns_[j])]) set_bit(info, static_cast<int>(j));
  }
  for (std::size_t r = 0; r < pivot_columns_.size(); ++r) {
    int parity = 0;
    for (std::size_t w = 0; w < info.size(); ++w) parity ^= std::popcount(parity_rows_[r][w] & info[w]) & 1;
    cw[static_cast<std::size_t>(pivot_columns_[r])] = static_cast<std::uint8_t>(parity);
  }
  return cw;
}

std::vector<std::uint8_t> LdpcCode::encode(std::span<const std::uint8_t> payload) const {
  const auto cw = encode_full(payload);
  std::vector<std::uint8_t> out;
  out.reserve(transmitted_positions_.size());
  for (int p : transmitted_positions_) out.push_back(cw[static_cast<std::size_t>(p)]);
  return out;
}

bool LdpcCode::satisfies_parity(std::span<const std::uint8_t> codeword) const {
  if (static_cast<int>(codeword.size()) != n_) throw std::invalid_argument("parity check: wrong codeword length");
  for (const auto& row : checks_) {
    int acc = 0;
    for (int v : row) acc ^= codeword[static_cast<std::size_t>(v)] & 1;
    if (acc) return false;
  }
  return true;
}

DecodeResult LdpcCode::decode(std::span<const double> llrs, int max_iterations, double scaling) const {
  if (static_cast<int>(llrs.size()) != transmitted_length()) {
    throw std::invalid_argument("LDPC decode: got " + std::to_string(llrs.size()) + " LLRs, expected " +
                                std::to_string(transmitted_length()));
  }
  // Internally lambda = ln(P(0)/P(1)) = -llr.
  constexpr double kKnown = 1e3;
  std::vector<double> channel(static_cast<std::size_t>(n_), 0.0);
  for (std::size_t i = 0; i < llrs.size(); ++i) channel[static_cast<std::size_t>(transmitted_positions_[i])] = -llrs[i];
  for (int s : shortened_) channel[static_cast<std::size_t>(s)] = kKnown;

  const std::size_t edges = edge_var_.size();
  std::vector<double> c2v(edges, 0.0), v2c(edges, 0.0);
  std::vector<double> posterior = channel;
  std::vector<std::uint8_t> hard(static_cast<std::size_t>(n_), 0);
  DecodeResult res;
  auto syndrome_ok = [&] {
    for (std::size_t c = 0; c + 1 < check_offset_.size(); ++c) {
      int acc = 0;
      for (int e = check_offset_[c]; e < check_offset_[c + 1]; ++e) acc ^= hard[static_cast<std::size_t>(edge_var_[static_cast<std::size_t>(e)])];
      if (acc) return false;
    }
    return true;
  };
  for (std::size_t v = 0; v < hard.size(); ++v) hard[v] = posterior[v] < 0.0;
  res.success = syndrome_ok();
  for (int it = 0; it < max_iterations && !res.success; ++it) {
    res.iterations = it + 1;
    for (std::size_t e = 0; e < edges; ++e) v2c[e] = posterior[static_cast<std::size_t>(edge_var_[e])] - c2v[e];
    for (std::size_t c = 0; c + 1 < check_offset_.size(); ++c) {
      const int b = check_offset_[c], end = check_offset_[c + 1];
      double min1 = std::numeric_limits<double>::infinity(), min2 = min1;
      int arg = -1, sign = 0;
      for (int e = b; e < end; ++e) {
        const double q = v2c[static_cast<std::size_t>(e)];
        sign ^= q < 0.0;
        const double a = std::abs(q);
        if (a < min1) {
          min2 = min1;
          min1 = a;
          arg = e;
        } else if (a < min2) {
          min2 = a;
        }
      }
      for (int e = b; e < end; ++e) {
        const double q = v2c[static_cast<std::size_t>(e)];
        const int s = sign ^ (q < 0.0);
        const double mag = scaling * (e == arg ? min2 : min1);
        c2v[static_cast<std::size_t>(e)] = s ? -mag : mag;
      }
    }
    posterior = channel;
    for (std::size_t e = 0; e < edges; ++e) posterior[static_cast<std::size_t>(edge_var_[e])] += c2v[e];
    for (std::size_t v = 0; v < hard.size(); ++v) hard[v] = posterior[v] < 0.0;
    res.success = syndrome_ok();
  }
  res.info.reserve(payload_positions_.size());
  for (int p : payload_positions_) res.info.push_back(hard[static_cast<std::size_t>(p)]);
  return res;
}

LdpcCode LdpcCode::from_alist(std::istream& in) {
  int n = 0, m = 0, max_col = 0, max_row = 0;
  if (!(in >> n >> m >> max_col >> max_row) || n <= 0 || m <= 0) throw std::runtime_error("alist: malformed header");
  std::vector<int> col_deg(static_cast<std::size_t>(n)), row_deg(static_cast<std::size_t>(m));
  for (auto& d : col_deg) {
    if (!(in >> d)) throw std::runtime_error("alist: truncated column degrees");
  }
  for (auto& d : row_deg) {
    if (!(in >> d)) throw std::runtime_error("alist: truncated row degrees");
  }
  std::vector<std::set<int>> from_cols(static_cast<std::size_t>(m));
  for (int c = 0; c < n; ++c) {
    for (int j = 0; j < max_col; ++j) {
      int r = 0;
      if (!(in >> r)) throw std::runtime_error("alist: truncated column lists");
      if (r == 0) continue;  // zero padding
      if (r < 1 || r > m) throw std::runtime_error("alist: row index out of range");
      from_cols[static_cast<std::size_t>(r - 1)].insert(c);
    }
  }
  std::vector<std::vector<int>> checks(static_cast<std::size_t>(m));
  for (int r = 0; r < m; ++r) {
    for (int j = 0; j < max_row; ++j) {
      int c = 0;
      if (!(in >> c)) throw std::runtime_error("alist: truncated row lists");
      if (c == 0) continue;
      if (c < 1 || c > n) throw std::runtime_error("alist: column index out of range");
      checks[static_cast<std::size_t>(r)].push_back(c - 1);
    }
    std::set<int> rows_view(checks[static_cast<std::size_t>(r)].begin(), checks[static_cast<std::size_t>(r)].end());
    if (rows_view != from_cols[static_cast<std::size_t>(r)] ||
        static_cast<int>(rows_view.size()) != row_deg[static_cast<std::size_t>(r)]) {
      throw std::runtime_error("alist: row and column lists disagree at check " + std::to_string(r + 1));
    }
  }
  return LdpcCode(n, std::move(checks));
}

void LdpcCode::write_alist(std::ostream& out) const {
  const int m = num_checks();
  std::vector<std::vector<int>> cols(static_cast<std::size_t>(n_));
  std::size_t max_row = 0;
  for (int r = 0; r < m; ++r) {
    for (int v : checks_[static_cast<std::size_t>(r)]) cols[static_cast<std::size_t>(v)].push_back(r);
    max_row = std::max(max_row, checks_[static_cast<std::size_t>(r)].size());
  }
  std::size_t max_col = 0;
  for (const auto& c : cols) max_col = std::max(max_col, c.size());
  out << n_ << ' ' << m << '\n' << max_col << ' ' << max_row << '\n';
  for (int c = 0; c < n_; ++c) out << cols[static_cast<std::size_t>(c)].size() << (c + 1 < n_ ? ' ' : '\n');
  for (int r = 0; r < m; ++r) out << checks_[static_cast<std::size_t>(r)].size() << (r + 1 < m ? ' ' : '\n');
  for (const auto& c : cols) {
    for (std::size_t j = 0; j < max_col; ++j) out << (j < c.size() ? c[j] + 1 : 0) << (j + 1 < max_col ? ' ' : '\n');
  }
  for (const auto& row : checks_) {
    for (std::size_t j = 0; j < max_row; ++j) out << (j < row.size() ? row[j] + 1 : 0) << (j + 1 < max_row ? ' ' : '\n');
  }
}

LdpcCode LdpcCode::regular(int n, int num_checks, int column_weight, std::uint64_t seed) {
  if (column_weight < 2 || column_weight > num_checks || num_checks >= n) {
    throw std::invalid_argument("regular LDPC: invalid dimensions");
  }
  std::mt19937_64 engine(seed);
  std::vector<std::vector<int>> checks(static_cast<std::size_t>(num_checks));
  std::vector<std::vector<int>> cols(static_cast<std::size_t>(n));
  std::vector<int> degree(static_cast<std::size_t>(num_checks), 0);
  std::vector<double> key(static_cast<std::size_t>(num_checks));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<int> chosen;
  std::vector<char> blocked(static_cast<std::size_t>(num_checks));
  for (int v = 0; v < n; ++v) {
    chosen.clear();
    std::fill(blocked.begin(), blocked.end(), 0);
    for (auto& k : key) k = u(engine);
    for (int w = 0; w < column_weight; ++w) {
      // Least-loaded row; rows sharing a variable with an already chosen row
      // would close a 4-cycle and are only used as a last resort.
      int best = -1;
      for (int pass = 0; pass < 2 && best < 0; ++pass) {
        for (int r = 0; r < num_checks; ++r) {
          const auto ri = static_cast<std::size_t>(r);
          if (std::find(chosen.begin(), chosen.end(), r) != chosen.end()) continue;
          if (pass == 0 && blocked[ri]) continue;
          if (best < 0 || degree[ri] < degree[static_cast<std::size_t>(best)] ||
              (degree[ri] == degree[static_cast<std::size_t>(best)] && key[ri] < key[static_cast<std::size_t>(best)])) {
            best = r;
          }
        }
        if (pass == 0 && best >= 0) {
          int min_deg = *std::min_element(degree.begin(), degree.end());
          if (degree[static_cast<std::size_t>(best)] > min_deg + 1) best = -1;  // keep row degrees balanced
        }
      }
      chosen.push_back(best);
      // block rows that already share a variable with the chosen row
      for (int other : checks[static_cast<std::size_t>(best)]) {
        for (int r : cols[static_cast<std::size_t>(other)]) blocked[static_cast<std::size_t>(r)] = 1;
      }
    }
    for (int r : chosen) {
      checks[static_cast<std::size_t>(r)].push_back(v);
      cols[static_cast<std::size_t>(v)].push_back(r);
      ++degree[static_cast<std::size_t>(r)];
    }
  }
  return LdpcCode(n, std::move(checks));
}

LdpcCode LdpcCode::default_code() { return regular(648, 324, 3, 0x648); }

LdpcCode LdpcCode::for_block(int coded_bits, double rate, std::uint64_t seed) {
  const int payload = static_cast<int>(std::lround(rate * coded_bits));
  if (payload < 1 || payload >= coded_bits) throw std::invalid_argument("block code: rate yields no usable payload");
  // Rate >= 1/2: mother (2K, K), puncture parity. Rate < 1/2: mother
  // (2(G-K), G-K), shorten G - 2K information bits.
  const int mother_k = 2 * payload >= coded_bits ? payload : coded_bits - payload;
  const int mother_n = 2 * mother_k;
  for (int attempt = 0; attempt < 64; ++attempt) {
    LdpcCode code = regular(mother_n, mother_n - mother_k, 3, seed + static_cast<std::uint64_t>(attempt) * 7919);
    const int dim = mother_n - code.rank();
    const int shortened = dim - payload;
    const int punctured = mother_n - shortened - coded_bits;
    if (shortened < 0 || punctured < 0 || punctured > code.rank()) continue;
    code.adjust(punctured, shortened);
    return code;
  }
  throw std::runtime_error("block code: no valid construction found");
}

std::shared_ptr<const LdpcCode> CodeBook::get(int coded_bits, double rate) {
  const int payload = static_cast<int>(std::lround(rate * coded_bits));
  std::lock_guard lock(mutex_);
  auto& slot = codes_[{coded_bits, payload}];
  if (!slot) slot = std::make_shared<const LdpcCode>(LdpcCode::for_block(coded_bits, rate));
  return slot;
}

}  // namespace nrx::phy

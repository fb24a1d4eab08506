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

#include "nrx/sim/config.hpp"

#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace nrx::sim {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"slot",
       {"subcarriers", "symbols", "pilot_symbols", "comb", "max_ues", "bs_antennas", "ue_antennas",
        "subcarrier_spacing_hz"}},
      {"channel", {"source", "covariance_samples"}},
      {"mcs", {"train", "eval", "offset_qpsk_db", "offset_16qam_db", "offset_64qam_db", "user_offset"}},
      {"nrx", {"d_s", "n_it", "kernel", "layers", "mlp_hidden", "variant", "log_n0_plane", "freq_position"}},
      {"train",
       {"batch_size", "steps", "snr_lo_db", "snr_hi_db", "gamma", "learning_rate", "max_ues", "log_every",
        "fine_tune"}},
      {"eval",
       {"snr_db", "min_block_errors", "max_blocks", "skip_below_tbler", "receivers", "kbest_k", "depth", "threads",
        "chunk"}},
      {"bench", {"depths", "runs", "warmup"}},
  };
  return keys;
}

template <typename T>
T get(const pt::ptree& tree, const std::string& key, T fallback) {
  if (!tree.get_optional<std::string>(key)) return fallback;
  try {
    return tree.get<T>(key);
  } catch (const pt::ptree_bad_data&) {
    throw std::invalid_argument("config: bad value '" + tree.get<std::string>(key) + "' for " + key);
  }
}

std::vector<int> int_list(const std::string& text) {
  std::vector<int> out;
  for (double v : parse_number_list(text)) {
    if (v != std::round(v)) throw std::invalid_argument("config: '" + text + "' is not an integer list");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

}  // namespace

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) {
    try {
      const auto c1 = item.find(':');
      if (c1 == std::string::npos) {
        std::size_t used = 0;
        out.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument("trailing characters");
        continue;
      }
      const auto c2 = item.find(':', c1 + 1);
      if (c2 == std::string::npos) throw std::invalid_argument("range needs lo:step:hi");
      const double lo = std::stod(item.substr(0, c1));
      const double step = std::stod(item.substr(c1 + 1, c2 - c1 - 1));
      const double hi = std::stod(item.substr(c2 + 1));
      if (!(step > 0.0) || hi < lo) throw std::invalid_argument("range needs step > 0 and lo <= hi");
      const auto n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
      for (int i = 0; i <= n; ++i) out.push_back(lo + i * step);
    } catch (const std::logic_error& e) {
      throw std::invalid_argument("config: bad number list item '" + item + "' (" + e.what() + ")");
    }
  }
  return out;
}

RunConfig load_config(const std::string& path, std::span<const std::string> overrides) {
  pt::ptree tree;
  if (!path.empty()) {
    try {
      pt::read_ini(path, tree);
    } catch (const pt::ini_parser_error& e) {
      throw std::runtime_error(std::string("config: ") + e.what());
    }
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw std::invalid_argument("config override '" + o + "' is not of the form section.key=value");
    }
    tree.put(o.substr(0, eq), o.substr(eq + 1));
  }
  for (const auto& [section, body] : tree) {
    const auto it = known_keys().find(section);
    if (it == known_keys().end()) throw std::invalid_argument("config: unknown section [" + section + "]");
    if (!body.data().empty() && body.empty()) throw std::invalid_argument("config: key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) throw std::invalid_argument("config: unknown key " + section + "." + key);
    }
  }

  RunConfig c;
  auto& s = c.slot;
  s.num_subcarriers = get(tree, "slot.subcarriers", s.num_subcarriers);
  s.num_symbols = get(tree, "slot.symbols", s.num_symbols);
  s.pilot_symbols = int_list(get(tree, "slot.pilot_symbols", join(s.pilot_symbols)));
  s.comb_size = get(tree, "slot.comb", s.comb_size);
  s.max_ues = get(tree, "slot.max_ues", s.max_ues);
  s.bs_antennas = get(tree, "slot.bs_antennas", s.bs_antennas);
  s.ue_antennas = get(tree, "slot.ue_antennas", s.ue_antennas);
  s.subcarrier_spacing_hz = get(tree, "slot.subcarrier_spacing_hz", s.subcarrier_spacing_hz);
  s.validate();

  c.channel = get(tree, "channel.source", c.channel);
  c.covariance_samples = get(tree, "channel.covariance_samples", c.covariance_samples);

  const auto train_mcs = int_list(get(tree, "mcs.train", join(c.train.mcs_indices)));
  c.train.mcs_indices = train_mcs;
  c.eval.mcs_indices = int_list(get(tree, "mcs.eval", join(c.eval.mcs_indices)));
  c.train.mcs_offset_db[2] = get(tree, "mcs.offset_qpsk_db", c.train.mcs_offset_db[2]);
  c.train.mcs_offset_db[4] = get(tree, "mcs.offset_16qam_db", c.train.mcs_offset_db[4]);
  c.train.mcs_offset_db[6] = get(tree, "mcs.offset_64qam_db", c.train.mcs_offset_db[6]);
  c.train.user_offset = get(tree, "mcs.user_offset", c.train.user_offset);

  auto& n = c.nrx;
  n.d_s = get(tree, "nrx.d_s", n.d_s);
  n.n_it = get(tree, "nrx.n_it", n.n_it);
  n.kernel = get(tree, "nrx.kernel", n.kernel);
  n.layers = get(tree, "nrx.layers", n.layers);
  n.mlp_hidden = get(tree, "nrx.mlp_hidden", n.mlp_hidden);
  n.variant = cgnn::parse_variant(get<std::string>(tree, "nrx.variant", cgnn::to_string(n.variant)));
  n.log_n0_plane = get(tree, "nrx.log_n0_plane", n.log_n0_plane);
  n.freq_position = get(tree, "nrx.freq_position", n.freq_position);
  n.bs_antennas = s.bs_antennas;
  n.mcs_indices = train_mcs;
  n.resolve(c.table);

  auto& t = c.train;
  t.batch_size = get(tree, "train.batch_size", t.batch_size);
  t.steps = get(tree, "train.steps", t.steps);
  t.snr_lo_db = get(tree, "train.snr_lo_db", t.snr_lo_db);
  t.snr_hi_db = get(tree, "train.snr_hi_db", t.snr_hi_db);
  t.gamma = get(tree, "train.gamma", t.gamma);
  t.learning_rate = get(tree, "train.learning_rate", t.learning_rate);
  t.max_ues = get(tree, "train.max_ues", s.max_ues);
  t.fine_tune = get(tree, "train.fine_tune", t.fine_tune);
  t.channel = c.channel;
  t.validate();
  c.log_every = get(tree, "train.log_every", c.log_every);

  auto& e = c.eval;
  e.snr_db = parse_number_list(get<std::string>(tree, "eval.snr_db", "0:2:20"));
  e.min_block_errors = get(tree, "eval.min_block_errors", e.min_block_errors);
  e.max_blocks = get(tree, "eval.max_blocks", e.max_blocks);
  e.skip_below_tbler = get(tree, "eval.skip_below_tbler", e.skip_below_tbler);
  e.threads = get(tree, "eval.threads", e.threads);
  e.chunk = get(tree, "eval.chunk", e.chunk);
  e.validate();
  c.receivers = split_list(get(tree, "eval.receivers", join(c.receivers)));
  c.kbest_k = get(tree, "eval.kbest_k", c.kbest_k);
  c.eval_depth = get(tree, "eval.depth", c.eval_depth);

  c.bench.depths = int_list(get(tree, "bench.depths", join(c.bench.depths)));
  c.bench.runs = get(tree, "bench.runs", c.bench.runs);
  c.bench.warmup = get(tree, "bench.warmup", c.bench.warmup);
  return c;
}

}  // namespace nrx::sim

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

// nrxsim: train, fine-tune, evaluate and benchmark the neural receiver.

#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nrx/cgnn/receiver.hpp"
#include "nrx/sim/bench.hpp"
#include "nrx/sim/config.hpp"
#include "nrx/sim/eval.hpp"
#include "nrx/sim/link.hpp"
#include "nrx/sim/train.hpp"

using namespace nrx;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::vector<std::string> overrides;
};

sim::RunConfig load(const Common& c) {
  auto cfg = sim::load_config(c.config, c.overrides);
  cfg.train.seed = c.seed;
  cfg.eval.seed = c.seed;
  return cfg;
}

/// Stray "--section.key=value" arguments become config overrides.
std::vector<std::string> take_overrides(const std::vector<std::string>& extras) {
  std::vector<std::string> out;
  for (const auto& e : extras) {
    if (e.rfind("--", 0) != 0 || e.find('=') == std::string::npos) {
      throw CLI::ValidationError("unexpected argument '" + e + "' (overrides look like --section.key=value)");
    }
    out.push_back(e.substr(2));
  }
  return out;
}

std::ostream& open_out(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw std::runtime_error("cannot write " + path);
  return file;
}

sim::StepCallback progress(int every) {
  auto t0 = std::chrono::steady_clock::now();
  return [every, t0](int step, const sim::LossBreakdown& lb) {
    if (every <= 0 || step % every != 0) return;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "step " << step << " loss " << lb.total << " bce " << lb.bce.back() << " mse " << lb.mse.back()
              << " (" << secs << " s)\n";
  };
}

std::vector<std::unique_ptr<sim::Receiver>> make_receivers(const sim::RunConfig& cfg,
                                                           const channel::ChannelSource& source,
                                                           const std::string& checkpoint) {
  std::vector<std::unique_ptr<sim::Receiver>> out;
  for (const auto& name : cfg.receivers) {
    if (name == "ls-lmmse") {
      out.push_back(std::make_unique<sim::LsLmmseReceiver>());
    } else if (name == "lmmse-kbest") {
      out.push_back(sim::make_kbest_receiver(cfg.slot, source, cfg.kbest_k,
                                             static_cast<std::size_t>(cfg.covariance_samples), mix_seed(cfg.eval.seed, 0xC0)));
    } else if (name == "perfect-ml") {
      out.push_back(std::make_unique<sim::PerfectMlReceiver>());
    } else if (name == "nrx") {
      if (checkpoint.empty()) throw std::invalid_argument("receiver 'nrx' needs --checkpoint");
      auto [ncfg, w] = cgnn::checkpoint_load(checkpoint);
      const int depth = cfg.eval_depth > 0 ? cfg.eval_depth : ncfg.n_it;
      out.push_back(std::make_unique<sim::NrxReceiver>(ncfg, std::make_shared<const cgnn::Weights>(std::move(w)), depth));
    } else {
      throw std::invalid_argument("unknown receiver '" + name + "' (known: ls-lmmse, lmmse-kbest, perfect-ml, nrx)");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MU-MIMO OFDM uplink simulator with a CGNN neural receiver"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config, "INI configuration file");
  app.add_option("--seed", common.seed, "Seed of every random draw")->required();
  app.allow_extras();

  auto* train = app.add_subcommand("train", "Train an NRX from scratch");
  std::string train_out;
  train->add_option("--out", train_out, "Checkpoint to write")->required();
  train->allow_extras();

  auto* ft = app.add_subcommand("finetune", "Fine-tune a checkpoint on site-specific channels");
  std::string ft_in, ft_out, ft_dataset, ft_sweep;
  int ft_steps = 1000;
  std::size_t ft_num_td = 0;
  std::vector<int> ft_milestones;
  std::vector<std::string> ft_eval_sets;
  ft->add_option("--checkpoint", ft_in, "Pre-trained checkpoint")->required();
  ft->add_option("--out", ft_out, "Checkpoint path prefix for the snapshots")->required();
  ft->add_option("--dataset", ft_dataset, "CIR dataset; defaults to [channel] source");
  ft->add_option("--num-td", ft_num_td, "Use the first N_TD dataset samples (0 = all)");
  ft->add_option("--steps", ft_steps, "Fine-tuning steps N_FT");
  ft->add_option("--milestones", ft_milestones, "Step counts to snapshot (default: last step)");
  ft->add_option("--eval-set", ft_eval_sets, "name=channel-spec evaluated at every snapshot");
  ft->add_option("--sweep-csv", ft_sweep, "Sweep CSV output");
  ft->allow_extras();

  auto* ev = app.add_subcommand("eval", "TBLER versus SNR of the configured receivers");
  std::string ev_ckpt, ev_out;
  ev->add_option("--checkpoint", ev_ckpt, "NRX checkpoint");
  ev->add_option("--out", ev_out, "Results CSV (default stdout)");
  ev->allow_extras();

  auto* bench = app.add_subcommand("bench", "Single-stream NRX latency per depth");
  std::string bench_ckpt, bench_out;
  bench->add_option("--checkpoint", bench_ckpt, "NRX checkpoint (default: random weights)");
  bench->add_option("--out", bench_out, "Latency CSV (default stdout)");
  bench->allow_extras();

  auto* ds = app.add_subcommand("dataset", "CIR dataset tools");
  auto* gen = ds->add_subcommand("gen", "Sample channels of [channel] source into a dataset file");
  ds->require_subcommand(1);
  std::string gen_out;
  std::size_t gen_count = 1000;
  gen->add_option("--out", gen_out, "Dataset file")->required();
  gen->add_option("--count", gen_count, "Number of samples");
  gen->allow_extras();

  CLI11_PARSE(app, argc, argv);
  try {
    std::vector<std::string> extras = app.remaining();
    for (auto* sub : {train, ft, ev, bench, gen}) {
      const auto r = sub->remaining();
      extras.insert(extras.end(), r.begin(), r.end());
    }
    common.overrides = take_overrides(extras);
    auto cfg = load(common);
    const auto source = channel::make_source(cfg.channel);

    if (*train) {
      sim::Model model{cfg.nrx, cgnn::init_weights(cfg.nrx, mix_seed(common.seed, 0x1417)), {}};
      std::cerr << "training " << cgnn::to_string(cfg.nrx.variant) << " NRX, " << cgnn::parameter_count(model.weights)
                << " weights, " << cfg.train.steps << " steps on " << source->describe() << '\n';
      sim::train(model, cfg.train, cfg.slot, cfg.table, progress(cfg.log_every));
      cgnn::checkpoint_save(train_out, model.cfg, model.weights);
    } else if (*ft) {
      auto [ncfg, w] = cgnn::checkpoint_load(ft_in);
      sim::Model model{ncfg, std::move(w), {}};
      std::unique_ptr<channel::ChannelSource> data;
      if (!ft_dataset.empty()) {
        data = std::make_unique<channel::DatasetSource>(
            std::make_shared<const channel::CirDataset>(channel::dataset_read(ft_dataset)), ft_num_td);
      } else {
        data = channel::make_source(cfg.channel);
      }
      if (ft_milestones.empty()) ft_milestones.push_back(ft_steps);
      cfg.train.mcs_indices = ncfg.mcs_indices;
      const auto res = sim::fine_tune(model, cfg.train, cfg.slot, cfg.table, *data, ft_steps, ft_milestones,
                                      progress(cfg.log_every));
      std::ofstream sweep_file;
      if (!ft_sweep.empty()) {
        sweep_file.open(ft_sweep);
        sweep_file << "num_ft_iter,num_td,snr_at_tbler_target_db,eval_set\n";
      }
      for (const auto& [steps, weights] : res.snapshots) {
        const auto path = ft_out + ".ft" + std::to_string(steps) + ".nrxw";
        cgnn::checkpoint_save(path, ncfg, weights);
        std::cerr << "wrote " << path << '\n';
        for (const auto& set : ft_eval_sets) {
          const auto eq = set.find('=');
          if (eq == std::string::npos) throw std::invalid_argument("--eval-set expects name=channel-spec");
          const auto eval_source = channel::make_source(set.substr(eq + 1));
          sim::NrxReceiver nrx(ncfg, std::make_shared<const cgnn::Weights>(weights), ncfg.n_it);
          const sim::Receiver* list[] = {&nrx};
          const auto rec = sim::evaluate_tbler(cfg.eval, cfg.slot, cfg.table, *eval_source, list);
          const auto snr = sim::snr_at_tbler(rec, 0.1);
          if (sweep_file) {
            sweep_file << steps << ',' << ft_num_td << ',' << snr.snr_db << ',' << set.substr(0, eq) << '\n';
          }
          std::cerr << "N_FT " << steps << " on " << set.substr(0, eq) << ": SNR@10% " << snr.snr_db << " dB (sigma "
                    << snr.sigma_db << ")\n";
        }
      }
    } else if (*ev) {
      const auto receivers = make_receivers(cfg, *source, ev_ckpt);
      std::vector<const sim::Receiver*> list;
      for (const auto& r : receivers) list.push_back(r.get());
      const auto rec = sim::evaluate_tbler(cfg.eval, cfg.slot, cfg.table, *source, list);
      std::ofstream file;
      sim::write_metrics_csv(open_out(ev_out, file), rec);
    } else if (*bench) {
      cgnn::NrxConfig ncfg = cfg.nrx;
      cgnn::Weights w;
      if (bench_ckpt.empty()) {
        ncfg.n_it = std::max(ncfg.n_it, *std::max_element(cfg.bench.depths.begin(), cfg.bench.depths.end()));
        w = cgnn::init_weights(ncfg, mix_seed(common.seed, 0x1417));
      } else {
        std::tie(ncfg, w) = cgnn::checkpoint_load(bench_ckpt);
      }
      const auto rep = sim::latency_bench(ncfg, w, cfg.slot, cfg.bench.depths, cfg.bench.runs, cfg.bench.warmup, common.seed);
      std::ofstream file;
      sim::write_latency_csv(open_out(bench_out, file), rep);
    } else if (*gen) {
      channel::CirDataset data;
      data.num_subcarriers = cfg.slot.num_subcarriers;
      data.num_symbols = cfg.slot.num_symbols;
      data.bs_antennas = cfg.slot.bs_antennas;
      data.ue_antennas = cfg.slot.ue_antennas;
      data.num_ues = cfg.slot.max_ues;
      for (std::size_t i = 0; i < gen_count; ++i) {
        Rng rng(mix_seed(common.seed, i));
        data.append(source->sample(cfg.slot, cfg.slot.max_ues, 0.0, rng));
      }
      channel::dataset_write(gen_out, data);
      std::cerr << "wrote " << gen_count << " samples of " << source->describe() << " to " << gen_out << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

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

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "nrx/channel/channel.hpp"

using namespace nrx;
using namespace nrx::channel;

namespace {

constexpr double kPi = std::numbers::pi;

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("nrx_test_" + name)).string();
}

class ConstantSource final : public ChannelSource {
 public:
  ChannelRealization sample(const phy::SlotConfig& cfg, int num_ues, double n0, Rng&) const override {
    ChannelRealization h(num_ues, cfg.num_subcarriers, cfg.num_symbols, cfg.bs_antennas, cfg.ue_antennas, n0);
    for (auto& z : h.raw()) z = cd(1.0, 0.0);
    return h;
  }
  std::string describe() const override { return "constant"; }
};

}  // namespace

TEST_CASE("shipped TDL profiles") {
  for (const auto& p : {TdlProfile::tdl_a(), TdlProfile::tdl_b(), TdlProfile::tdl_c()}) {
    CAPTURE(p.name);
    p.validate();
    CHECK(p.delays_s.size() == 5u);
    CHECK(p.max_delay_s() < phy::SlotConfig{}.cyclic_prefix_s());
  }
  CHECK(TdlProfile::tdl_b().doppler_hz == 400.0);
  CHECK(TdlProfile::tdl_b().delay_spread_s == 100e-9);
  CHECK(TdlProfile::tdl_c().delay_spread_s == 300e-9);

  const auto p = TdlProfile::parse("tdl-c:600:0..200");
  CHECK(p.delay_spread_s == doctest::Approx(600e-9));
  CHECK(p.max_delay_s() == doctest::Approx(2 * TdlProfile::tdl_c().max_delay_s()));
  CHECK(p.doppler_min_hz == 0.0);
  CHECK(p.doppler_hz == 200.0);
  CHECK_THROWS_AS(TdlProfile::parse("tdl-x"), std::invalid_argument);
  CHECK_THROWS_AS(TdlProfile::parse("tdl-b:abc"), std::invalid_argument);
  CHECK_THROWS_AS(TdlProfile::parse("tdl-b:100:300..200"), std::invalid_argument);

  TdlProfile bad = TdlProfile::tdl_b();
  bad.powers[0] += 0.01;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = TdlProfile::tdl_b();
  std::swap(bad.delays_s[1], bad.delays_s[2]);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("tap processes") {
  const auto prof = TdlProfile::tdl_b();
  const double tsym = phy::SlotConfig{}.symbol_duration_s();
  Rng rng(11);

  SUBCASE("zero Doppler is constant over the slot") {
    const auto taps = sample_taps(prof, 0.0, 14, tsym, rng);
    for (int t = 1; t < 14; ++t) CHECK((taps.col(t) - taps.col(0)).norm() == 0.0);
  }
  SUBCASE("tap powers and J0 autocorrelation over 1e4 draws") {
    // A large Doppler so that the lags cover a good part of J0.
    const double fd = 2000.0;
    const int draws = 10000;
    const int t_n = 14;
    Eigen::ArrayXd power = Eigen::ArrayXd::Zero(5);
    Eigen::ArrayXcd corr = Eigen::ArrayXcd::Zero(t_n);
    for (int i = 0; i < draws; ++i) {
      const auto taps = sample_taps(prof, fd, t_n, tsym, rng);
      power += taps.col(0).array().abs2();
      for (int lag = 0; lag < t_n; ++lag) corr(lag) += taps(0, 0) * std::conj(taps(0, lag));
    }
    power /= draws;
    corr /= draws * prof.powers[0];
    for (int k = 0; k < 5; ++k) {
      CAPTURE(k);
      CHECK(std::abs(power(k) / prof.powers[static_cast<std::size_t>(k)] - 1.0) <= 0.05);
    }
    double worst = 0;
    for (int lag = 0; lag < t_n; ++lag) {
      const double j0 = std::cyl_bessel_j(0.0, 2.0 * kPi * fd * lag * tsym);
      worst = std::max(worst, std::abs(corr(lag) - j0));
    }
    CHECK(worst <= 0.05);
  }
}

TEST_CASE("cir_to_freq") {
  const double df = 30e3;
  const double cp = phy::SlotConfig{}.cyclic_prefix_s();
  const int s_n = 24;
  SUBCASE("single tap at zero delay") {
    const std::vector<cd> a{1.0};
    const std::vector<double> d{0.0};
    const auto h = cir_to_freq(a, d, df, s_n, cp);
    CHECK((h - CVector::Ones(s_n)).norm() == 0.0);
  }
  SUBCASE("single delayed tap has constant magnitude and linear phase") {
    const std::vector<cd> a{cd(0.6, -0.3)};
    const std::vector<double> d{400e-9};
    const auto h = cir_to_freq(a, d, df, s_n, cp);
    for (int s = 0; s < s_n; ++s) {
      CHECK(std::abs(h(s)) == doctest::Approx(std::abs(a[0])).epsilon(1e-12));
      const cd expected = a[0] * std::polar(1.0, -2.0 * kPi * df * 400e-9 * s);
      CHECK(std::abs(h(s) - expected) < 1e-12);
    }
  }
  SUBCASE("two equal taps null at S/2") {
    const std::vector<cd> a{1.0, 1.0};
    const std::vector<double> d{0.0, 1.0 / (s_n * df)};
    const auto h = cir_to_freq(a, d, df, s_n, cp);
    CHECK(std::abs(h(s_n / 2)) < 1e-12);
    CHECK(std::abs(h(0)) == doctest::Approx(2.0));
  }
  SUBCASE("delay beyond the cyclic prefix") {
    const std::vector<cd> a{1.0};
    const std::vector<double> d{cp * 1.01};
    CHECK_THROWS_AS(cir_to_freq(a, d, df, s_n, cp), std::invalid_argument);
    phy::SlotConfig cfg;
    ChannelRealization h(1, cfg.num_subcarriers, cfg.num_symbols, cfg.bs_antennas, cfg.ue_antennas, 0.0);
    Rng rng(1);
    CHECK_THROWS_AS(sample_tdl(TdlProfile::parse("tdl-c:1000"), cfg, 0, rng, h), std::invalid_argument);
  }
}

TEST_CASE("channel sources") {
  phy::SlotConfig cfg;
  SUBCASE("energy normalization of every shipped profile") {
    for (const char* spec : {"tdl:tdl-a", "tdl:tdl-b", "tdl:tdl-c", "iid"}) {
      CAPTURE(spec);
      const auto src = make_source(spec);
      Rng rng(5);
      double e = 0;
      const int draws = 10000;
      for (int i = 0; i < draws; ++i) {
        const auto h = src->sample(cfg, 1, 0.0, rng);
        REQUIRE(h.all_finite());
        e += h.h(0, i % cfg.num_subcarriers, i % cfg.num_symbols).squaredNorm();
      }
      CHECK(std::abs(e / draws / (cfg.bs_antennas * cfg.ue_antennas) - 1.0) <= 0.05);
    }
  }
  SUBCASE("DoubleTDL marginals equal the single-profile draws") {
    const auto dbl = make_source("tdl:tdl-b,tdl-c");
    const auto b = make_source("tdl:tdl-b");
    const auto c = make_source("tdl:tdl-c");
    Rng r1(9), r2(9), r3(9);
    const auto hd = dbl->sample(cfg, 2, 0.1, r1);
    const auto hb = b->sample(cfg, 2, 0.1, r2);
    const auto hc = c->sample(cfg, 2, 0.1, r3);
    for (int s = 0; s < cfg.num_subcarriers; ++s)
      for (int t = 0; t < cfg.num_symbols; ++t) {
        CHECK(hd.h(0, s, t) == hb.h(0, s, t));
        CHECK(hd.h(1, s, t) == hc.h(1, s, t));
      }
    CHECK(dbl->describe() == "tdl:tdl-b,tdl-c");
  }
  SUBCASE("bad specs") {
    CHECK_THROWS_AS(make_source("rayleigh"), std::invalid_argument);
    CHECK_THROWS_AS(make_source("tdl:"), std::invalid_argument);
  }
}

TEST_CASE("apply_channel") {
  Rng rng(3);
  SUBCASE("identity channel without noise") {
    ChannelRealization h(1, 2, 3, 1, 1, 0.0);
    for (auto& z : h.raw()) z = 1.0;
    CMatrix x(6, 1);
    x << cd(1, 2), cd(-1, 0), cd(0.5, 0.5), cd(0, -3), cd(2, 2), cd(0.1, 0);
    CHECK(apply_channel(std::vector<CMatrix>{x}, h, rng) == x);
  }
  SUBCASE("superposition and linearity") {
    phy::SlotConfig cfg;
    const auto h = IidSource().sample(cfg, 2, 0.0, rng);
    const auto r = cfg.num_res();
    const CMatrix x1 = CMatrix::Random(r, 2), x2 = CMatrix::Random(r, 2);
    const CMatrix y = apply_channel(std::vector<CMatrix>{x1, x2}, h, rng);
    for (int s = 0; s < cfg.num_subcarriers; ++s)
      for (int t = 0; t < cfg.num_symbols; ++t) {
        const auto i = s * cfg.num_symbols + t;
        const CVector ref = h.h(0, s, t) * x1.row(i).transpose() + h.h(1, s, t) * x2.row(i).transpose();
        CHECK((y.row(i).transpose() - ref).norm() < 1e-12);
      }
    const cd a(0.3, -1.2);
    const CMatrix ya = apply_channel(std::vector<CMatrix>{CMatrix(a * x1), CMatrix(a * x2)}, h, rng);
    CHECK((ya - a * y).norm() < 1e-12);
    CHECK_THROWS_AS(apply_channel(std::vector<CMatrix>{CMatrix::Zero(5, 2)}, h, rng), std::invalid_argument);
  }
  SUBCASE("noise power over 1e5 REs") {
    const double n0 = 0.37;
    ChannelRealization h(1, 100, 1000, 2, 1, n0);
    const CMatrix y = apply_channel(std::vector<CMatrix>{CMatrix::Zero(100000, 1)}, h, rng);
    for (int b = 0; b < 2; ++b) CHECK(std::abs(y.col(b).squaredNorm() / 1e5 / n0 - 1.0) <= 0.03);
  }
}

TEST_CASE("precode and effective channel") {
  phy::SlotConfig cfg;
  phy::ResourceGrid g{CMatrix::Constant(cfg.num_subcarriers, cfg.num_symbols, cd(0, 1)), {}};
  const CMatrix x = precode(g, cfg.beam(0));
  CHECK(x.rows() == cfg.num_res());
  CHECK(std::abs(x(5, 1) - cd(0, 1) / std::sqrt(2.0)) < 1e-15);
  Rng rng(4);
  const auto h = IidSource().sample(cfg, 1, 0.0, rng);
  const CMatrix y = apply_channel(std::vector<CMatrix>{x}, h, rng);
  const CMatrix heff = h.effective(0, cfg.beam(0));
  CHECK((y - cd(0, 1) * heff).norm() < 1e-12);
}

TEST_CASE("estimate_covariance") {
  phy::SlotConfig cfg;
  SUBCASE("constant channel gives all-ones covariance") {
    const auto cov = estimate_covariance(ConstantSource(), cfg, 100, -1, 1);
    CHECK((cov.frequency - CMatrix::Ones(cfg.num_subcarriers, cfg.num_subcarriers)).norm() < 1e-12);
    CHECK((cov.time - CMatrix::Ones(cfg.num_symbols, cfg.num_symbols)).norm() < 1e-12);
  }
  SUBCASE("iid channel gives identity") {
    const auto cov = estimate_covariance(IidSource(), cfg, 10000, 0, 2);
    CHECK(cov.samples == 10000u);
    for (const CMatrix* r : {&cov.frequency, &cov.time}) {
      const CMatrix off = *r - CMatrix::Identity(r->rows(), r->cols());
      CHECK(off.diagonal().cwiseAbs().maxCoeff() <= 0.05);
      double worst = 0;
      for (Eigen::Index i = 0; i < r->rows(); ++i)
        for (Eigen::Index j = 0; j < r->cols(); ++j)
          if (i != j) worst = std::max(worst, std::abs((*r)(i, j)));
      CHECK(worst <= 0.05);
    }
  }
  SUBCASE("Hermitian and PSD") {
    const auto src = make_source("tdl:tdl-b,tdl-c");
    for (int ue : {-1, 0, 1}) {
      const auto cov = estimate_covariance(*src, cfg, 200, ue, 3);
      for (const CMatrix* r : {&cov.frequency, &cov.time}) {
        CHECK((*r - r->adjoint()).norm() == 0.0);
        Eigen::SelfAdjointEigenSolver<CMatrix> es(*r);
        CHECK(es.eigenvalues().minCoeff() >= -1e-9 * r->trace().real());
      }
    }
  }
  CHECK_THROWS_AS(estimate_covariance(IidSource(), cfg, 99, -1, 1), std::invalid_argument);
}

TEST_CASE("CIR dataset files") {
  phy::SlotConfig cfg;
  cfg.num_subcarriers = 12;
  const auto src = make_source("tdl:tdl-b,tdl-c");
  Rng rng(6);
  CirDataset data;
  for (int i = 0; i < 5; ++i) data.append(src->sample(cfg, 2, 0.0, rng));
  CHECK(data.num_samples() == 5u);
  const auto path = temp_path("round.cird");
  dataset_write(path, data);

  SUBCASE("round trip is bit-identical") {
    const auto back = dataset_read(path);
    CHECK(back.num_samples() == 5u);
    CHECK(back.num_ues == 2);
    CHECK(back.num_subcarriers == 12);
    REQUIRE(back.values.size() == data.values.size());
    CHECK(std::memcmp(back.values.data(), data.values.data(), data.values.size() * sizeof(data.values[0])) == 0);
    const auto h = back.realization(3, 0.5);
    CHECK(h.noise_power() == 0.5);
    DatasetSource ds(std::make_shared<const CirDataset>(back), 2);
    CHECK(ds.size() == 2u);
    const auto d1 = ds.sample(cfg, 1, 0.1, rng);
    CHECK(d1.num_ues() == 1);
    phy::SlotConfig wrong;
    CHECK_THROWS_AS(ds.sample(wrong, 1, 0.1, rng), std::invalid_argument);
    const auto via_spec = make_source("dataset:" + path + ":3");
    CHECK(via_spec->describe() == "dataset(3 samples)");
  }
  SUBCASE("truncated file is rejected") {
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
    CHECK_THROWS_WITH_AS(dataset_read(path), doctest::Contains("bytes"), std::runtime_error);
    std::filesystem::resize_file(path, 10);
    CHECK_THROWS_AS(dataset_read(path), std::runtime_error);
  }
  SUBCASE("bad magic and version") {
    {
      std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
      f.seekp(0);
      f.write("XIRD", 4);
    }
    CHECK_THROWS_WITH_AS(dataset_read(path), doctest::Contains("magic"), std::runtime_error);
    dataset_write(path, data);
    {
      std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
      f.seekp(4);
      f.put(2);
    }
    CHECK_THROWS_WITH_AS(dataset_read(path), doctest::Contains("version"), std::runtime_error);
  }
  SUBCASE("zero samples") {
    CirDataset empty;
    empty.num_subcarriers = 24;
    empty.num_symbols = 14;
    empty.bs_antennas = 4;
    empty.ue_antennas = 2;
    empty.num_ues = 2;
    dataset_write(path, empty);
    const auto back = dataset_read(path);
    CHECK(back.num_samples() == 0u);
    CHECK(back.num_symbols == 14);
    CHECK_THROWS_AS(DatasetSource(std::make_shared<const CirDataset>(back)), std::invalid_argument);
  }
  std::remove(path.c_str());
}

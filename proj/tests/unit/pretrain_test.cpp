// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "fepcross/data/synthetic.hpp"
#include "fepcross/data/windows.hpp"
#include "fepcross/numcore/grad_check.hpp"
#include "fepcross/pretrain/losses.hpp"
#include "fepcross/pretrain/pretrain.hpp"
#include "test_util.hpp"

namespace fp = fepcross::pretrain;
namespace fe = fepcross::encoder;
namespace nc = fepcross::numcore;
namespace sp = fepcross::spectral;
namespace fd = fepcross::data;
using fepcross::testing::random_tensor;

namespace {

sp::TriDomainSample random_sample(std::size_t nodes, std::uint64_t seed) {
  return sp::make_sample(random_tensor<float>({nodes, 16}, seed), {4, 1.0});
}

fe::DomainVars<double> as_vars(const sp::TriDomainSample& s) {
  fe::DomainVars<double> out;
  for (auto d : sp::kAllDomains) out.push_back(nc::constant(s.patches_of(d).cast<double>()));
  return out;
}

const std::vector<sp::Domain> kDomains(sp::kAllDomains.begin(), sp::kAllDomains.end());

/// Literal triple loop over domains, nodes and patches.
double naive_reconstruction(const fe::DomainVars<double>& rec, const sp::TriDomainSample& s) {
  double total = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& truth = s.patches_of(kDomains[k]);
    const auto& grid = s.mask(kDomains[k]);
    double sq = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < truth.dim(0); ++i)
      for (std::size_t p = 0; p < truth.dim(1); ++p) {
        if (!grid.masked(i, p)) continue;
        for (std::size_t c = 0; c < truth.dim(2); ++c) {
          sq += std::pow(rec[k].value().at({i, p, c}) - truth.at({i, p, c}), 2);
          ++count;
        }
      }
    if (count) total += sq / static_cast<double>(count);
  }
  return total;
}

double naive_ntxent(const nc::TensorD& a, const nc::TensorD& b, const fp::NegativeSets& neg) {
  const std::size_t n = a.dim(0), d = a.dim(1);
  auto cosine = [&](std::size_t i, std::size_t j) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t c = 0; c < d; ++c) {
      dot += a.at({i, c}) * b.at({j, c});
      na += a.at({i, c}) * a.at({i, c});
      nb += b.at({j, c}) * b.at({j, c});
    }
    return dot / std::sqrt(na * nb);
  };
  double loss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = std::exp(cosine(i, i));
    double denom = pos;
    for (std::size_t j : neg[i]) denom += std::exp(cosine(i, j));
    loss -= std::log(pos / denom);
  }
  return loss / static_cast<double>(n);
}

fd::TrafficCity tiny_city() {
  fd::SyntheticCitySpec spec;
  spec.n_nodes = 4;
  return fd::generate_synthetic_city(spec, 3);
}

fp::PretrainConfig tiny_pretrain() {
  fp::PretrainConfig c;
  c.encoder.history_steps = 48;
  c.encoder.patches = 4;
  c.encoder.d_model = 8;
  c.encoder.heads = 2;
  c.encoder.ff_multiplier = 2;
  c.window_stride = 288;
  c.epochs = 2;
  c.batch_size = 2;
  c.learning_rate = 1e-3;
  return c;
}

}  // namespace

TEST(ReconstructionLoss, PerfectReconstructionIsZero) {
  auto s = sp::apply_mask(random_sample(3, 1), 0.5, 2);
  EXPECT_EQ(fp::reconstruction_loss(as_vars(s), s, kDomains).item(), 0.0);
}

TEST(ReconstructionLoss, SingleMaskedPatchConstantResidual) {
  auto s = random_sample(2, 3);
  s.mask(sp::Domain::kTime).set(1, 2, true);
  auto rec = as_vars(s);
  auto shifted = s.time.cast<double>();
  for (double& v : shifted.data()) v += 2.0;
  rec[0] = nc::constant(shifted);
  EXPECT_DOUBLE_EQ(fp::reconstruction_loss(rec, s, kDomains).item(), 4.0);
}

TEST(ReconstructionLoss, MatchesNaiveLoops) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto s = sp::apply_mask(random_sample(4, 10 + seed), 0.75, seed);
    fe::DomainVars<double> rec;
    for (auto d : sp::kAllDomains) rec.push_back(nc::constant(random_tensor(s.patches_of(d).shape(), 20 + seed)));
    EXPECT_NEAR(fp::reconstruction_loss(rec, s, kDomains).item(), naive_reconstruction(rec, s), 1e-12);
  }
}

TEST(ReconstructionLoss, UnmaskedPositionsDoNotMatter) {
  auto s = sp::apply_mask(random_sample(3, 4), 0.5, 5);
  fe::DomainVars<double> rec;
  for (auto d : sp::kAllDomains) rec.push_back(nc::constant(random_tensor(s.patches_of(d).shape(), 6)));
  const double base = fp::reconstruction_loss(rec, s, kDomains).item();
  for (std::size_t k = 0; k < 3; ++k) {
    auto v = rec[k].value();
    const std::size_t width = v.dim(2);
    for (std::size_t i = 0; i < v.dim(0); ++i)
      for (std::size_t p = 0; p < v.dim(1); ++p)
        if (!s.mask(kDomains[k]).masked(i, p))
          for (std::size_t c = 0; c < width; ++c) v.at({i, p, c}) += 100.0;
    rec[k] = nc::constant(v);
  }
  EXPECT_EQ(fp::reconstruction_loss(rec, s, kDomains).item(), base);
}

TEST(ReconstructionLoss, NoMasksGivesZero) {
  auto s = random_sample(2, 7);
  fe::DomainVars<double> rec;
  for (auto d : sp::kAllDomains) rec.push_back(nc::constant(random_tensor(s.patches_of(d).shape(), 8)));
  EXPECT_EQ(fp::reconstruction_loss(rec, s, kDomains).item(), 0.0);
}

TEST(Negatives, CountsAndExclusion) {
  EXPECT_EQ(fp::negative_count(8, 0.1), 1u);
  EXPECT_EQ(fp::negative_count(325, 0.1), 33u);
  EXPECT_EQ(fp::negative_count(2, 1.0), 1u);
  const auto neg = fp::sample_negatives(50, 0.1, 3);
  ASSERT_EQ(neg.size(), 50u);
  for (std::size_t i = 0; i < 50; ++i) {
    ASSERT_EQ(neg[i].size(), 5u);
    std::set<std::size_t> unique(neg[i].begin(), neg[i].end());
    EXPECT_EQ(unique.size(), 5u);
    EXPECT_EQ(unique.count(i), 0u);
  }
  EXPECT_THROW(fp::sample_negatives(1, 0.1, 1), std::invalid_argument);
}

TEST(ContrastiveLoss, ClosedFormSinglePair) {
  // Two nodes so node 0 has node 1 as its only (orthogonal) negative.
  nc::TensorD a({2, 2}, std::vector<double>{1, 0, 0, 1});
  const fp::NegativeSets neg = {{1}, {0}};
  const double loss = fp::contrastive_loss(nc::constant(a), nc::constant(a), neg).item();
  EXPECT_NEAR(loss, -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0)), 1e-12);
  EXPECT_NEAR(loss, 0.3133, 1e-4);
}

TEST(ContrastiveLoss, MatchesNaiveLoops) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto a = random_tensor({9, 6}, 30 + seed);
    auto b = random_tensor({9, 6}, 40 + seed);
    const auto neg = fp::sample_negatives(9, 0.3, seed);
    EXPECT_NEAR(fp::contrastive_loss(nc::constant(a), nc::constant(b), neg).item(), naive_ntxent(a, b, neg), 1e-12);
    EXPECT_GT(fp::contrastive_loss(nc::constant(a), nc::constant(b), neg).item(), 0.0);
  }
}

TEST(ContrastiveLoss, DecreasesAsPositiveAligns) {
  // Only node 0's positive moves; every negative pair stays fixed.
  const fp::NegativeSets neg = {{2}, {2}, {1}};
  nc::TensorD a({3, 2}, std::vector<double>{1, 0, 0, 1, 0.6, 0.8});
  double prev = 1e9;
  for (double theta = 3.0; theta >= 0.0; theta -= 0.25) {
    nc::TensorD b({3, 2}, std::vector<double>{std::cos(theta), std::sin(theta), 0.3, 1, -1, 0.2});
    const double loss = fp::contrastive_loss(nc::constant(a), nc::constant(b), neg).item();
    EXPECT_LT(loss, prev);
    prev = loss;
  }
}

TEST(ContrastiveLoss, GradientCheck) {
  const auto neg = fp::sample_negatives(5, 0.4, 2);
  const double err = nc::grad_check(
      [&](std::span<const nc::Var<double>> in) { return fp::contrastive_loss(in[0], in[1], neg); },
      {random_tensor({5, 4}, 50), random_tensor({5, 4}, 51)});
  EXPECT_LT(err, 1e-5);
}

TEST(ContrastiveLoss, ZeroNormIsError) {
  nc::TensorD a({2, 2}, std::vector<double>{0, 0, 1, 1});
  EXPECT_THROW(fp::contrastive_loss(nc::constant(a), nc::constant(a), {{1}, {0}}), nc::DomainError);
}

TEST(PretrainConfig, ValidationAndJson) {
  auto c = tiny_pretrain();
  const nlohmann::json j = c;
  EXPECT_EQ(nlohmann::json(j.get<fp::PretrainConfig>()), j);
  c.mask_ratio = 1.0;
  EXPECT_THROW(c.validate(), sp::ConfigError);
  c = tiny_pretrain();
  c.encoder.use_frequency = false;
  EXPECT_THROW(c.validate(), sp::ConfigError);
  c.use_contrastive = false;
  EXPECT_NO_THROW(c.validate());
}

TEST(PretrainStep, AlphaZeroGivesReconstructionOnly) {
  auto c = tiny_pretrain();
  c.alpha = 0.0;
  fe::EncoderModel<float> model(c.encoder, 1);
  const auto city = tiny_city();
  std::vector<nc::TensorF> batch = {random_tensor<float>({4, 48}, 2), random_tensor<float>({4, 48}, 3)};
  const auto adj = fd::normalize_adjacency(city.adjacency);
  const auto l = fp::batch_losses(batch, adj, model, c, 9, false);
  EXPECT_EQ(l.total, l.reconstruction);
  EXPECT_GT(l.contrastive, 0.0);
  c.alpha = 1.0;
  const auto l1 = fp::batch_losses(batch, adj, model, c, 9, false);
  EXPECT_NEAR(l1.total, l1.reconstruction + l1.contrastive, 1e-6);
}

TEST(PretrainStep, BothBranchesReceiveGradients) {
  auto c = tiny_pretrain();
  c.mask_ratio = 0.5;
  fe::EncoderModel<float> model(c.encoder, 1);
  std::vector<nc::TensorF> batch = {random_tensor<float>({4, 48}, 4)};
  const auto adj = fd::normalize_adjacency(tiny_city().adjacency);
  model.params().zero_grad();
  fp::batch_losses(batch, adj, model, c, 3, true);
  double pool_grad = 0;
  for (float g : model.param("pool/weight").grad().data()) pool_grad += std::abs(g);
  EXPECT_GT(pool_grad, 0.0);
}

TEST(PretrainRun, DeterministicAcrossRuns) {
  auto c = tiny_pretrain();
  c.epochs = 3;
  const auto city = tiny_city();
  const auto a = fp::pretrain_run(city, c);
  const auto b = fp::pretrain_run(city, c);
  ASSERT_EQ(a.log.size(), 3u);
  for (std::size_t e = 0; e < 3; ++e) {
    EXPECT_EQ(a.log[e].loss_total, b.log[e].loss_total);
    EXPECT_EQ(a.log[e].loss_re, b.log[e].loss_re);
    EXPECT_EQ(a.log[e].loss_con, b.log[e].loss_con);
    EXPECT_TRUE(std::isfinite(a.log[e].loss_total));
  }
  for (const auto& name : a.model.params().names()) EXPECT_EQ(a.model.param(name).value(), b.model.param(name).value());
}

TEST(PretrainRun, ZeroEpochsKeepsInitialization) {
  auto c = tiny_pretrain();
  c.epochs = 0;
  const auto r = fp::pretrain_run(tiny_city(), c);
  EXPECT_TRUE(r.log.empty());
  const auto fresh = fp::pretrain_run(tiny_city(), c);
  for (const auto& name : r.model.params().names()) EXPECT_EQ(r.model.param(name).value(), fresh.model.param(name).value());
}

TEST(PretrainRun, OutputsLogAndCheckpoint) {
  auto c = tiny_pretrain();
  c.epochs = 2;
  const auto r = fp::pretrain_run(tiny_city(), c);
  const auto dir = std::filesystem::temp_directory_path() / "fepcross_pretrain_out";
  std::filesystem::remove_all(dir);
  fp::write_pretrain_outputs(dir, r, c);
  std::ifstream log(dir / "pretrain_log.ndjson");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(log, line)) {
    const auto rec = nlohmann::json::parse(line);
    for (const char* key : {"epoch", "loss_total", "loss_re", "loss_con", "wall_ms"}) EXPECT_TRUE(rec.contains(key));
    ++lines;
  }
  EXPECT_EQ(lines, 2u);
  const auto back = fe::load_encoder(dir);
  for (const auto& name : r.model.params().names()) EXPECT_EQ(back.param(name).value(), r.model.param(name).value());
}

TEST(PretrainRun, LossDecreasesOnTinyModel) {
  auto c = tiny_pretrain();
  c.epochs = 30;
  c.use_contrastive = false;
  const auto r = fp::pretrain_run(tiny_city(), c);
  EXPECT_LT(r.log.back().loss_re, r.log.front().loss_re);
}

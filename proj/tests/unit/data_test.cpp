// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <random>

#include "fepcross/data/city.hpp"
#include "fepcross/data/synthetic.hpp"
#include "fepcross/data/windows.hpp"
#include "fepcross/spectral/tri_domain.hpp"

namespace fd = fepcross::data;
namespace nc = fepcross::numcore;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("fepcross_data_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

/// Writes a city fixture by hand, independently of save_city.
void write_fixture(const fs::path& dir, std::size_t n, std::size_t steps, float value, std::size_t blob_floats) {
  nlohmann::json meta = {{"name", "fixture"}, {"interval_minutes", 5}, {"num_nodes", n}, {"num_steps", steps}, {"channels", 1}};
  std::ofstream(dir / "meta.json") << meta.dump();
  std::ofstream adj(dir / "adjacency.csv");
  adj << "src,dst,weight\n";
  for (std::size_t i = 0; i + 1 < n; ++i) adj << i << ',' << i + 1 << ",1.0\n";
  std::vector<float> blob(blob_floats, value);
  std::ofstream(dir / "readings.f32", std::ios::binary)
      .write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size() * sizeof(float)));
}

fd::SyntheticCitySpec small_spec() {
  fd::SyntheticCitySpec s;
  s.n_nodes = 6;
  s.days = 7;
  return s;
}

}  // namespace

TEST(LoadCity, FixtureWithPemsBayNodeCount) {
  const auto dir = scratch("pemsbay");
  write_fixture(dir, 325, 4, 61.7768f, 325 * 4);
  const auto city = fd::load_city(dir);
  EXPECT_EQ(city.node_count(), 325u);
  EXPECT_EQ(city.steps(), 4u);
  EXPECT_EQ(city.interval_minutes, 5);
  EXPECT_FLOAT_EQ(city.adjacency.at({3, 4}), 1.0f);
  const auto stats = fd::compute_stats(city, {0, city.steps()});
  EXPECT_NEAR(stats.mean, 61.7768, 1e-5);
  EXPECT_NEAR(stats.std, 0.0, 1e-6);
}

TEST(LoadCity, WrongBlobLengthIsShapeError) {
  const auto dir = scratch("short");
  write_fixture(dir, 5, 10, 1.0f, 49);
  EXPECT_THROW(fd::load_city(dir), fd::DataError);
}

TEST(LoadCity, MissingFileAndNonFinite) {
  const auto dir = scratch("missing");
  write_fixture(dir, 4, 3, 1.0f, 12);
  fs::remove(dir / "adjacency.csv");
  EXPECT_THROW(fd::load_city(dir), fd::DataError);
  const auto bad = scratch("nan");
  write_fixture(bad, 4, 3, std::nanf(""), 12);
  EXPECT_THROW(fd::load_city(bad), fd::DataError);
}

TEST(SaveCity, RoundTrip) {
  const auto city = fd::generate_synthetic_city(small_spec(), 3);
  const auto dir = scratch("roundtrip");
  fd::save_city(dir, city);
  const auto back = fd::load_city(dir);
  EXPECT_EQ(back.readings, city.readings);
  EXPECT_EQ(back.adjacency, city.adjacency);
  EXPECT_EQ(back.nodes, city.nodes);
  EXPECT_EQ(back.name, city.name);
}

TEST(Synthetic, DeterministicInSeed) {
  const auto a = fd::generate_synthetic_city(small_spec(), 7);
  const auto b = fd::generate_synthetic_city(small_spec(), 7);
  const auto c = fd::generate_synthetic_city(small_spec(), 8);
  EXPECT_EQ(a.readings, b.readings);
  EXPECT_EQ(a.adjacency, b.adjacency);
  EXPECT_NE(a.readings, c.readings);
  EXPECT_NO_THROW(fd::validate_city(a));
  EXPECT_EQ(a.steps(), 7u * 288u);
}

TEST(Synthetic, PreconditionsEnforced) {
  auto s = small_spec();
  s.n_nodes = 3;
  EXPECT_THROW(fd::generate_synthetic_city(s, 1), fd::DataError);
  s = small_spec();
  s.days = 6;
  EXPECT_THROW(fd::generate_synthetic_city(s, 1), fd::DataError);
}

TEST(Synthetic, NoiselessDailyHarmonicConcentratesAtDailyBin) {
  auto s = small_spec();
  s.noise_std = 0.0;
  s.congestion_rate = 0.0;
  s.shared_harmonics = {{24.0, 5.0, 0.0}};
  const auto city = fd::generate_synthetic_city(s, 2);
  // A one-day window: the daily harmonic sits at bin 1.
  for (std::size_t node = 0; node < city.node_count(); ++node) {
    std::vector<double> x(288);
    double mean = 0;
    for (std::size_t t = 0; t < 288; ++t) mean += city.reading(t, node) / 288.0;
    for (std::size_t t = 0; t < 288; ++t) x[t] = city.reading(t, node) - mean;
    const auto tri = fepcross::spectral::to_tri_domain(x);
    std::size_t best = 0;
    for (std::size_t k = 1; k < 144; ++k) {
      if (tri.amplitude[k] > tri.amplitude[best]) best = k;
    }
    EXPECT_EQ(best, 1u);
    double rest = 0;
    for (std::size_t k = 2; k < 144; ++k) rest += tri.amplitude[k];
    EXPECT_LT(rest, 1e-3 * tri.amplitude[1]);
  }
}

TEST(Synthetic, SpecJsonRoundTrip) {
  auto s = small_spec();
  s.congestion_rate = 1.5;
  s.shared_harmonics.push_back({6.0, 1.0, 0.5});
  const nlohmann::json j = s;
  const auto back = j.get<fd::SyntheticCitySpec>();
  EXPECT_EQ(nlohmann::json(back), j);
  const auto partial = nlohmann::json{{"n_nodes", 12}}.get<fd::SyntheticCitySpec>();
  EXPECT_EQ(partial.n_nodes, 12u);
  EXPECT_EQ(partial.days, 7u);
}

TEST(Synthetic, CongestionLowersSpeeds) {
  auto s = small_spec();
  const auto calm = fd::generate_synthetic_city(s, 5);
  s.congestion_rate = 4.0;
  const auto busy = fd::generate_synthetic_city(s, 5);
  EXPECT_LT(fd::compute_stats(busy, {0, busy.steps()}).mean, fd::compute_stats(calm, {0, calm.steps()}).mean);
}

TEST(NormalizeAdjacency, ExamplesAndStochasticRows) {
  nc::TensorF row({3, 3});
  row.at({0, 1}) = 2;
  row.at({0, 2}) = 2;
  const auto a = fd::normalize_adjacency(row);
  EXPECT_NEAR(a.at({0, 0}), 0.2f, 1e-7);
  EXPECT_NEAR(a.at({0, 1}), 0.4f, 1e-7);
  EXPECT_NEAR(a.at({0, 2}), 0.4f, 1e-7);
  EXPECT_FLOAT_EQ(a.at({1, 1}), 1.0f);

  nc::TensorF eye({4, 4});
  for (std::size_t i = 0; i < 4; ++i) eye.at({i, i}) = 1;
  const auto e = fd::normalize_adjacency(eye);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_FLOAT_EQ(e.at({i, i}), 1.0f);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(0.0f, 5.0f);
  nc::TensorF r({9, 9});
  for (float& v : r.data()) v = u(rng);
  const auto n = fd::normalize_adjacency(r);
  for (std::size_t i = 0; i < 9; ++i) {
    double total = 0;
    for (std::size_t j = 0; j < 9; ++j) {
      EXPECT_GE(n.at({i, j}), 0.0f);
      total += n.at({i, j});
    }
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

TEST(FewShotSplit, FiveAndTenMinuteIntervals) {
  auto s = small_spec();
  const auto five = fd::generate_synthetic_city(s, 1);
  const auto split = fd::few_shot_split(five);
  EXPECT_EQ(split.finetune, (fd::StepRange{0, 576}));
  EXPECT_EQ(split.test, (fd::StepRange{576, five.steps()}));
  s.interval_minutes = 10;
  const auto ten = fd::generate_synthetic_city(s, 1);
  const auto split10 = fd::few_shot_split(ten);
  EXPECT_EQ(split10.finetune.length(), 288u);
  EXPECT_EQ(split10.test.end, ten.steps());
}

TEST(FewShotSplit, StatsComeFromFinetuneRangeOnly) {
  const auto city = fd::generate_synthetic_city(small_spec(), 4);
  const auto split = fd::few_shot_split(city);
  double sum = 0, sq = 0;
  const std::size_t n = city.node_count();
  for (std::size_t t = 0; t < 576; ++t) {
    for (std::size_t i = 0; i < n; ++i) sum += city.reading(t, i);
  }
  const double mean = sum / (576.0 * n);
  for (std::size_t t = 0; t < 576; ++t) {
    for (std::size_t i = 0; i < n; ++i) sq += std::pow(city.reading(t, i) - mean, 2);
  }
  EXPECT_NEAR(split.stats.mean, mean, 1e-9);
  EXPECT_NEAR(split.stats.std, std::sqrt(sq / (576.0 * n)), 1e-9);
}

TEST(FewShotSplit, InsufficientData) {
  auto s = small_spec();
  const auto city = fd::generate_synthetic_city(s, 1);
  EXPECT_THROW(fd::few_shot_split(city, 7), fd::DataError);
}

TEST(Windows, SpanAndBoundary) {
  const auto city = fd::generate_synthetic_city(small_spec(), 6);
  const auto stats = fd::stats_for(city, {0, city.steps()});
  const auto ws = fd::sample_windows(city, 288, 12, {100, 400}, 5, 1, stats);
  for (const auto& w : ws) {
    EXPECT_EQ(w.start, 100u);
    EXPECT_EQ(w.history.shape(), (nc::Shape{6, 288}));
    EXPECT_EQ(w.future.shape(), (nc::Shape{6, 12, 1}));
    EXPECT_FLOAT_EQ(w.history.at({2, 5}), stats.normalize(city.reading(105, 2)));
    EXPECT_FLOAT_EQ(w.future_raw.at({3, 11, 0}), city.reading(100 + 288 + 11, 3));
    EXPECT_FLOAT_EQ(w.future.at({3, 11, 0}), stats.normalize(city.reading(399, 3)));
  }
}

TEST(Windows, TooShortRangeNamesLengths) {
  const auto city = fd::generate_synthetic_city(small_spec(), 6);
  try {
    fd::sample_windows(city, 288, 12, {0, 299}, 1, 1, {});
    FAIL() << "expected DataError";
  } catch (const fd::DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("300"), std::string::npos);
    EXPECT_NE(msg.find("299"), std::string::npos);
  }
}

TEST(Windows, NormalizedHistoryIsCentered) {
  const auto city = fd::generate_synthetic_city(small_spec(), 9);
  const auto split = fd::few_shot_split(city);
  // Windows drawn inside the split range itself are centered by its stats.
  const auto ws = fd::sample_windows(city, 288, 12, split.finetune, 1000, 2, split.stats);
  double total = 0;
  std::size_t count = 0;
  for (const auto& w : ws) {
    for (float v : w.history.data()) {
      total += v;
      ++count;
    }
  }
  EXPECT_NEAR(total / static_cast<double>(count), 0.0, 0.1);
}

TEST(Windows, StartsAtStride) {
  const auto starts = fd::window_starts({0, 576}, 288, 12, 100);
  EXPECT_EQ(starts, (std::vector<std::size_t>{0, 100, 200}));
}

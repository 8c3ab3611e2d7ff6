// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fepcross/data/synthetic.hpp"
#include "fepcross/eval/attention.hpp"
#include "fepcross/eval/metrics.hpp"
#include "fepcross/eval/similarity.hpp"
#include "fepcross/finetune/finetune.hpp"
#include "fepcross/pretrain/pretrain.hpp"

namespace fepcross::eval {

/// Carries the failing stage name in what().
class ExperimentError : public std::runtime_error {
 public:
  ExperimentError(const std::string& stage, const std::string& cause)
      : std::runtime_error("stage '" + stage + "' failed: " + cause), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// A city on disk or a synthetic spec. Without an explicit seed the synthetic
/// city is seeded from the experiment's root seed.
struct CitySource {
  std::filesystem::path path;
  std::optional<data::SyntheticCitySpec> synthetic;
  std::optional<std::uint64_t> seed;

  data::TrafficCity materialize(std::uint64_t fallback_seed) const;
};

struct EvalSettings {
  std::vector<std::size_t> horizons = default_horizons();
  std::size_t stride = 12;
};

/// Component ladder: pretrain_base is time-only masked reconstruction with a
/// plain backbone; _f, _fd, _fds add the frequency domains, the cross-domain
/// aggregators and the cross-space aggregator. no_* drop one component from
/// the full pipeline.
inline const std::vector<std::string> kAblationVariants = {
    "pretrain_base", "pretrain_base_f", "pretrain_base_fd", "pretrain_base_fds",
    "no_contrastive", "no_momentum", "no_enrichment"};

struct ExperimentConfig {
  std::uint64_t seed = 7;
  CitySource source;
  CitySource target;
  pretrain::PretrainConfig pretrain;
  finetune::FinetuneConfig finetune;
  EvalSettings eval;
  SimilarityOptions similarity;
  std::size_t few_shot_days = 2;
  std::vector<std::string> ablation_variants;

  void validate() const;
};

void to_json(nlohmann::json& j, const CitySource& c);
void to_json(nlohmann::json& j, const ExperimentConfig& c);
/// Relative city paths resolve against `base_dir`.
ExperimentConfig experiment_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& file);

/// Applies a named ladder variant to the full-pipeline configs.
void apply_variant(const std::string& variant, pretrain::PretrainConfig& pretrain, finetune::FinetuneConfig& finetune);

/// Scores a fine-tuned model and the historical average on the test range.
MetricReport evaluate_model(const finetune::FinetunedModel& model, const data::TrafficCity& city,
                            const data::FewShotSplit& split, const EvalSettings& settings);
MetricReport evaluate_historical_average(const data::TrafficCity& city, const data::FewShotSplit& split,
                                         std::size_t history_steps, std::size_t future_steps,
                                         const EvalSettings& settings);

struct ExperimentResult {
  /// "fepcross", "historical_average", then one per ablation variant.
  std::vector<MetricReport> reports;
  SimilarityReport similarity;
  std::optional<AttentionMap> attention;

  const MetricReport& report(const std::string& method) const;
};

/// generate/load -> similarity -> pretrain -> finetune -> evaluate -> attention
/// -> ablation variants. Writes everything under `out_dir`.
ExperimentResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

}  // namespace fepcross::eval

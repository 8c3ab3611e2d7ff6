// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include "fepcross/eval/experiment.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <functional>

#include "fepcross/common/rng.hpp"

namespace fepcross::eval {

using nlohmann::json;

namespace {

enum SeedTag : std::uint64_t { kSourceCity = 21, kTargetCity = 22, kPretrain = 23, kFinetune = 24, kSimilarity = 25 };

template <typename F>
auto stage(const std::string& name, F&& body) -> decltype(body()) {
  spdlog::info("stage {}", name);
  try {
    return body();
  } catch (const ExperimentError&) {
    throw;
  } catch (const std::exception& e) {
    throw ExperimentError(name, e.what());
  }
}

CitySource city_from_json(const json& j, const std::filesystem::path& base_dir) {
  CitySource c;
  if (j.is_string()) {
    c.path = j.get<std::string>();
  } else if (j.contains("path")) {
    c.path = j.at("path").get<std::string>();
  } else if (j.contains("synthetic")) {
    c.synthetic = j.at("synthetic").get<data::SyntheticCitySpec>();
  } else {
    throw spectral::ConfigError("city entry needs 'path' or 'synthetic'");
  }
  if (!c.path.empty() && c.path.is_relative() && !base_dir.empty()) c.path = base_dir / c.path;
  if (j.is_object() && j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

data::TrafficCity CitySource::materialize(std::uint64_t fallback_seed) const {
  if (synthetic) return data::generate_synthetic_city(*synthetic, seed.value_or(fallback_seed));
  return data::load_city(path);
}

void to_json(json& j, const CitySource& c) {
  if (c.synthetic) {
    j = json{{"synthetic", *c.synthetic}};
  } else {
    j = json{{"path", c.path.string()}};
  }
  if (c.seed) j["seed"] = *c.seed;
}

void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"seed", c.seed},
           {"source_city", c.source},
           {"target_city", c.target},
           {"pretrain", c.pretrain},
           {"finetune", c.finetune},
           {"eval", {{"horizons", c.eval.horizons}, {"stride", c.eval.stride}}},
           {"similarity",
            {{"window_days", c.similarity.window_days},
             {"max_pairs", c.similarity.max_pairs},
             {"pairing", c.similarity.pairing == Pairing::kAligned ? "aligned" : "all"}}},
           {"few_shot_days", c.few_shot_days},
           {"ablation", {{"variants", c.ablation_variants}}}};
}

ExperimentConfig experiment_from_json(const json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  c.seed = j.value("seed", c.seed);
  c.source = city_from_json(j.at("source_city"), base_dir);
  c.target = city_from_json(j.at("target_city"), base_dir);
  if (j.contains("pretrain")) c.pretrain = j.at("pretrain").get<pretrain::PretrainConfig>();
  if (j.contains("finetune")) c.finetune = j.at("finetune").get<finetune::FinetuneConfig>();
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    c.eval.horizons = e.value("horizons", c.eval.horizons);
    c.eval.stride = e.value("stride", c.eval.stride);
  }
  if (j.contains("similarity")) {
    const auto& s = j.at("similarity");
    c.similarity.window_days = s.value("window_days", c.similarity.window_days);
    c.similarity.max_pairs = s.value("max_pairs", c.similarity.max_pairs);
    const std::string pairing = s.value("pairing", std::string("all"));
    if (pairing != "all" && pairing != "aligned") throw spectral::ConfigError("similarity.pairing must be all or aligned");
    c.similarity.pairing = pairing == "aligned" ? Pairing::kAligned : Pairing::kAllPairs;
  }
  c.few_shot_days = j.value("few_shot_days", c.few_shot_days);
  if (j.contains("ablation")) c.ablation_variants = j.at("ablation").value("variants", c.ablation_variants);
  // One root seed drives every stage.
  c.pretrain.seed = derive_seed(c.seed, {kPretrain});
  c.finetune.seed = derive_seed(c.seed, {kFinetune});
  c.similarity.seed = derive_seed(c.seed, {kSimilarity});
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config " + file.string());
  json j;
  in >> j;
  return experiment_from_json(j, file.parent_path());
}

void ExperimentConfig::validate() const {
  pretrain.validate();
  finetune.validate();
  if (eval.stride == 0) throw spectral::ConfigError("eval.stride must be positive");
  for (const auto& v : ablation_variants) {
    if (std::find(kAblationVariants.begin(), kAblationVariants.end(), v) == kAblationVariants.end()) {
      throw spectral::ConfigError("unknown ablation variant '" + v + "'");
    }
  }
}

void apply_variant(const std::string& variant, pretrain::PretrainConfig& pretrain, finetune::FinetuneConfig& finetune) {
  auto& enc = pretrain.encoder;
  if (variant.starts_with("pretrain_base")) {
    const std::string suffix = variant.substr(std::string("pretrain_base").size());
    if (!suffix.empty() && suffix != "_f" && suffix != "_fd" && suffix != "_fds") {
      throw spectral::ConfigError("unknown ablation variant '" + variant + "'");
    }
    enc.use_frequency = suffix.find('f') != std::string::npos;
    enc.use_cross_domain = suffix.find('d') != std::string::npos;
    enc.use_cross_space = suffix.find('s') != std::string::npos;
    pretrain.use_contrastive = false;
    finetune.use_momentum = false;
    finetune.use_enrichment = false;
  } else if (variant == "no_contrastive") {
    pretrain.use_contrastive = false;
  } else if (variant == "no_momentum") {
    finetune.use_momentum = false;
  } else if (variant == "no_enrichment") {
    finetune.use_enrichment = false;
  } else {
    throw spectral::ConfigError("unknown ablation variant '" + variant + "'");
  }
}

MetricReport evaluate_model(const finetune::FinetunedModel& model, const data::TrafficCity& city,
                            const data::FewShotSplit& split, const EvalSettings& settings) {
  const EvalWindows windows{model.encoder.config().history_steps, model.future_steps, settings.stride};
  auto report = horizon_metrics(
      city, split.test, split.stats, [&](const data::Window& w) { return finetune::forecast(model, w.history); },
      settings.horizons, windows);
  report.method = "fepcross";
  return report;
}

MetricReport evaluate_historical_average(const data::TrafficCity& city, const data::FewShotSplit& split,
                                         std::size_t history_steps, std::size_t future_steps,
                                         const EvalSettings& settings) {
  const HistoricalAverage ha(city, split.finetune);
  auto report = horizon_metrics(
      city, split.test, split.stats,
      [&](const data::Window& w) { return ha.predict(w.start, history_steps, future_steps); }, settings.horizons,
      {history_steps, future_steps, settings.stride});
  report.method = "historical_average";
  return report;
}

const MetricReport& ExperimentResult::report(const std::string& method) const {
  for (const auto& r : reports) {
    if (r.method == method) return r;
  }
  throw std::out_of_range("no report for method '" + method + "'");
}

namespace {

struct PipelineOutput {
  MetricReport report;
  finetune::FinetunedModel model;
};

PipelineOutput pretrain_and_finetune(const std::string& label, const data::TrafficCity& source,
                                     const data::TrafficCity& target, const data::FewShotSplit& split,
                                     const pretrain::PretrainConfig& pcfg, const finetune::FinetuneConfig& fcfg,
                                     const EvalSettings& settings, const std::filesystem::path& dir) {
  auto pre = stage(label + "/pretrain", [&] {
    auto r = pretrain::pretrain_run(source, pcfg);
    pretrain::write_pretrain_outputs(dir / "pretrain", r, pcfg);
    return r;
  });
  auto fine = stage(label + "/finetune", [&] {
    auto r = finetune::finetune_run(target, split, pre.model, fcfg);
    finetune::write_finetune_outputs(dir / "finetune", r, fcfg);
    return r;
  });
  auto report = stage(label + "/evaluate", [&] { return evaluate_model(fine.model, target, split, settings); });
  return {std::move(report), std::move(fine.model)};
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  std::ofstream(out_dir / "config.json") << json(config).dump(2) << '\n';

  const auto source = stage("load_source", [&] { return config.source.materialize(derive_seed(config.seed, {kSourceCity})); });
  const auto target = stage("load_target", [&] { return config.target.materialize(derive_seed(config.seed, {kTargetCity})); });
  const auto split = stage("split", [&] { return data::few_shot_split(target, config.few_shot_days); });

  ExperimentResult result;
  result.similarity = stage("similarity", [&] {
    auto r = similarity_analysis(source, target, config.similarity);
    std::ofstream(out_dir / "similarity.json") << json(r).dump(2) << '\n';
    return r;
  });

  auto main = pretrain_and_finetune("fepcross", source, target, split, config.pretrain, config.finetune, config.eval,
                                    out_dir);
  main.report.source_city = source.name;
  main.report.seed = config.seed;
  result.reports.push_back(main.report);

  auto ha = stage("historical_average", [&] {
    return evaluate_historical_average(target, split, config.pretrain.encoder.history_steps,
                                       config.finetune.future_steps, config.eval);
  });
  ha.source_city = source.name;
  ha.seed = config.seed;
  result.reports.push_back(ha);

  if (config.pretrain.encoder.use_cross_domain) {
    result.attention = stage("attention", [&] {
      const auto starts = data::window_starts(split.test, config.pretrain.encoder.history_steps,
                                              config.finetune.future_steps, config.eval.stride);
      const auto w = data::make_window(target, starts.front(), config.pretrain.encoder.history_steps,
                                       config.finetune.future_steps, split.stats);
      auto map = export_attention(main.model.encoder, w.history, target.adjacency);
      write_attention(out_dir / "attention", "attention", map);
      return map;
    });
  }

  for (const auto& variant : config.ablation_variants) {
    auto pcfg = config.pretrain;
    auto fcfg = config.finetune;
    apply_variant(variant, pcfg, fcfg);
    auto out = pretrain_and_finetune(variant, source, target, split, pcfg, fcfg, config.eval,
                                     out_dir / "ablation" / variant);
    out.report.method = variant;
    out.report.source_city = source.name;
    out.report.seed = config.seed;
    result.reports.push_back(out.report);
  }

  std::ofstream metrics(out_dir / "metrics.ndjson");
  for (const auto& r : result.reports) metrics << json(r).dump() << '\n';
  for (const auto& r : result.reports) {
    spdlog::info("{:<20} MAE {:.4f}  MAPE {:.3f}%  ({} windows)", r.method, r.mae_all, r.mape_all, r.windows);
  }
  return result;
}

}  // namespace fepcross::eval

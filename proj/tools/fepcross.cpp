// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "fepcross/data/synthetic.hpp"
#include "fepcross/eval/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fepcross;

namespace {

json read_json(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  json j;
  in >> j;
  return j;
}

void write_reports(const std::vector<eval::MetricReport>& reports, const std::string& out) {
  std::ostringstream lines;
  for (const auto& r : reports) lines << json(r).dump() << '\n';
  if (out.empty()) {
    std::cout << lines.str();
  } else {
    std::ofstream(out) << lines.str();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-city few-shot traffic forecasting with frequency-enhanced pre-training"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")->capture_default_str();

  // gen-city
  auto* gen = app.add_subcommand("gen-city", "Generate a synthetic city");
  std::string gen_spec, gen_out;
  std::uint64_t gen_seed = 7;
  gen->add_option("--spec", gen_spec, "synthetic city spec JSON (defaults used if omitted)");
  gen->add_option("--seed", gen_seed)->capture_default_str();
  gen->add_option("--out", gen_out)->required();

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "Masked tri-domain pre-training on a source city");
  std::string pre_source, pre_config, pre_out;
  pre->add_option("--source", pre_source, "source city directory")->required();
  pre->add_option("--config", pre_config, "pretrain config JSON");
  pre->add_option("--out", pre_out, "checkpoint directory")->required();

  // finetune
  auto* fine = app.add_subcommand("finetune", "Few-shot fine-tuning on a target city");
  std::string fine_target, fine_encoder, fine_config, fine_out;
  std::size_t fine_days = 2;
  fine->add_option("--target", fine_target, "target city directory")->required();
  fine->add_option("--encoder", fine_encoder, "pretrained encoder checkpoint")->required();
  fine->add_option("--config", fine_config, "finetune config JSON");
  fine->add_option("--days", fine_days, "few-shot days")->capture_default_str();
  fine->add_option("--out", fine_out, "model directory")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Score a fine-tuned model and the historical average");
  std::string ev_target, ev_model, ev_out;
  std::size_t ev_days = 2;
  eval::EvalSettings ev_settings;
  ev->add_option("--target", ev_target)->required();
  ev->add_option("--model", ev_model)->required();
  ev->add_option("--days", ev_days, "few-shot days")->capture_default_str();
  ev->add_option("--horizons", ev_settings.horizons)->capture_default_str();
  ev->add_option("--stride", ev_settings.stride)->capture_default_str();
  ev->add_option("--out", ev_out, "NDJSON report file (stdout if omitted)");

  // similarity
  auto* sim = app.add_subcommand("similarity", "Cross-city time vs frequency cosine similarity");
  std::string sim_a, sim_b, sim_out;
  eval::SimilarityOptions sim_opts;
  sim->add_option("--city-a", sim_a)->required();
  sim->add_option("--city-b", sim_b)->required();
  sim->add_option("--window-days", sim_opts.window_days)->capture_default_str();
  sim->add_option("--max-pairs", sim_opts.max_pairs)->capture_default_str();
  sim->add_option("--seed", sim_opts.seed)->capture_default_str();
  bool sim_aligned = false;
  sim->add_flag("--aligned", sim_aligned, "pair node k with node k instead of all cross-city pairs");
  sim->add_option("--out", sim_out, "JSON report file (stdout if omitted)");

  // attention
  auto* att = app.add_subcommand("attention", "Export the cross-domain aggregator attention map");
  std::string att_encoder, att_city, att_out;
  std::size_t att_start = 0;
  bool att_per_node = false;
  att->add_option("--encoder", att_encoder)->required();
  att->add_option("--city", att_city)->required();
  att->add_option("--start", att_start, "window start step")->capture_default_str();
  att->add_flag("--per-node", att_per_node, "also write one map per node");
  att->add_option("--out", att_out)->required();

  // run
  auto* run = app.add_subcommand("run", "Full experiment from one config");
  std::string run_config, run_out;
  run->add_option("--config", run_config)->required();
  run->add_option("--out", run_out)->required();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*gen) {
      data::SyntheticCitySpec spec;
      if (!gen_spec.empty()) spec = read_json(gen_spec).get<data::SyntheticCitySpec>();
      data::save_city(gen_out, data::generate_synthetic_city(spec, gen_seed));
    } else if (*pre) {
      pretrain::PretrainConfig cfg;
      if (!pre_config.empty()) cfg = read_json(pre_config).get<pretrain::PretrainConfig>();
      const auto result = pretrain::pretrain_run(data::load_city(pre_source), cfg, [](const pretrain::EpochRecord& r) {
        spdlog::info("epoch {} loss {:.5f} (re {:.5f}, con {:.5f})", r.epoch, r.loss_total, r.loss_re, r.loss_con);
      });
      pretrain::write_pretrain_outputs(pre_out, result, cfg);
    } else if (*fine) {
      finetune::FinetuneConfig cfg;
      if (!fine_config.empty()) cfg = read_json(fine_config).get<finetune::FinetuneConfig>();
      const auto city = data::load_city(fine_target);
      const auto result = finetune::finetune_run(city, data::few_shot_split(city, fine_days),
                                                 encoder::load_encoder(fine_encoder), cfg,
                                                 [](const finetune::FinetuneEpoch& e) {
                                                   spdlog::info("epoch {} loss {:.5f}", e.epoch, e.loss);
                                                 });
      finetune::write_finetune_outputs(fine_out, result, cfg);
    } else if (*ev) {
      const auto city = data::load_city(ev_target);
      const auto model = finetune::load_finetuned(ev_model);
      auto split = data::few_shot_split(city, ev_days);
      split.stats = model.stats;
      write_reports({eval::evaluate_model(model, city, split, ev_settings),
                     eval::evaluate_historical_average(city, split, model.encoder.config().history_steps,
                                                       model.future_steps, ev_settings)},
                    ev_out);
    } else if (*sim) {
      if (sim_aligned) sim_opts.pairing = eval::Pairing::kAligned;
      const auto report = eval::similarity_analysis(data::load_city(sim_a), data::load_city(sim_b), sim_opts);
      const std::string text = json(report).dump(2);
      if (sim_out.empty()) {
        std::cout << text << '\n';
      } else {
        std::ofstream(sim_out) << text << '\n';
      }
    } else if (*att) {
      const auto model = encoder::load_encoder(att_encoder);
      const auto city = data::load_city(att_city);
      const auto stats = data::stats_for(city, {0, city.steps()});
      const auto w = data::make_window(city, att_start, model.config().history_steps, 0, stats);
      eval::write_attention(att_out, "attention",
                            eval::export_attention(model, w.history, city.adjacency, att_per_node));
    } else if (*run) {
      eval::run_experiment(eval::load_experiment_config(run_config), run_out);
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}

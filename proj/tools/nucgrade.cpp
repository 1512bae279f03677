// nucgrade: synthetic-data generation, dataset preparation, training,
// evaluation, prediction and standalone metrics for the nuclei grading
// pipeline.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime error.

#include "nucgrade/dataset.hpp"
#include "nucgrade/errors.hpp"
#include "nucgrade/metrics.hpp"
#include "nucgrade/synthdata.hpp"
#include "nucgrade/train.hpp"
#include "nucgrade/trainconfig.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace nucgrade;

namespace {

struct CommonOpts {
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
};

TrainConfig load_config_with_overrides(const std::string& path, const CommonOpts& common) {
  TrainConfig cfg = load_train_config(path);
  if (common.seed) cfg.seed = *common.seed;
  if (common.deterministic) cfg.deterministic = true;
  return cfg;
}

int run_synth(const std::string& out_dir, int count, const SynthParams& base,
              const CommonOpts& common) {
  SynthParams params = base;
  if (common.seed) params.seed = *common.seed;
  validate_params(params);
  fs::create_directories(out_dir);
  for (int i = 0; i < count; ++i) {
    SynthParams p = params;
    p.seed = derive_seed(params.seed, std::uint64_t(i));
    char name[32];
    std::snprintf(name, sizeof(name), "synth_%04d", i);
    save_sample(out_dir, generate(p, name));
  }
  std::cout << "wrote " << count << " samples to " << out_dir << "\n";
  return 0;
}

int run_prepare(const std::string& data_dir, const std::string& out_dir) {
  const auto ids = list_sample_ids(data_dir);
  if (ids.empty()) {
    std::cout << "no samples found in " << data_dir << "\n";
    return 0;
  }
  int bad = 0;
  for (const auto& id : ids) {
    const LabeledSample sample = load_sample(data_dir, id);  // relabels densely
    const auto violations = validate_sample(sample);
    if (!violations.empty()) {
      ++bad;
      for (const auto& v : violations) std::cout << id << ": " << v << "\n";
      continue;
    }
    if (!out_dir.empty()) save_sample(out_dir, sample);
  }
  std::cout << ids.size() << " samples checked, " << bad << " invalid\n";
  if (bad > 0) throw DataError("prepare: dataset contains invalid samples");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nuclei grading pipeline"};
  app.require_subcommand(1);

  CommonOpts common;
  app.add_option("--seed", common.seed, "override the config seed");
  app.add_flag("--deterministic", common.deterministic,
               "record deterministic mode (runs are reproducible per machine)");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic labeled dataset");
  std::string synth_out;
  int synth_count = 8;
  SynthParams synth_params;
  std::vector<int> canvas = {128, 128};
  std::vector<double> radius = {6.0, 12.0};
  std::vector<double> mix = {1.0, 1.0, 1.0, 1.0};
  synth->add_option("--out", synth_out, "output dataset directory")->required();
  synth->add_option("--count", synth_count, "number of samples");
  synth->add_option("--canvas", canvas, "canvas H W")->expected(2);
  synth->add_option("--instances", synth_params.n_instances, "nuclei per sample");
  synth->add_option("--radius", radius, "semi-axis range min max")->expected(2);
  synth->add_option("--touching", synth_params.touching_fraction, "fraction placed touching");
  synth->add_option("--class-mix", mix, "weights for classes g1 g2 g3 endo")->expected(4);
  synth->add_option("--nucleolus", synth_params.nucleolus_intensity, "nucleolus dot contrast");

  // prepare
  auto* prepare = app.add_subcommand("prepare", "validate and normalize a dataset directory");
  std::string prep_data, prep_out;
  prepare->add_option("--data", prep_data, "dataset directory")->required();
  prepare->add_option("--out", prep_out, "write normalized samples here");

  // train
  auto* train_cmd = app.add_subcommand("train", "train CHR-Net");
  std::string train_config, train_out;
  bool train_resume = false;
  train_cmd->add_option("--config", train_config, "config file")->required();
  train_cmd->add_option("--out", train_out, "output directory")->required();
  train_cmd->add_flag("--resume", train_resume, "resume from last.ckpt in the output directory");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint on a split");
  std::string eval_config, eval_ckpt, eval_split = "test", eval_out;
  eval_cmd->add_option("--config", eval_config, "config file")->required();
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
  eval_cmd->add_option("--split", eval_split, "val or test");
  eval_cmd->add_option("--out", eval_out, "output directory")->required();

  // predict
  auto* pred_cmd = app.add_subcommand("predict", "run inference and export predictions");
  std::string pred_ckpt, pred_images, pred_out;
  pred_cmd->add_option("--checkpoint", pred_ckpt, "checkpoint path")->required();
  pred_cmd->add_option("--images", pred_images, "directory of *.img.png inputs")->required();
  pred_cmd->add_option("--out", pred_out, "output directory")->required();

  // metrics
  auto* metrics_cmd =
      app.add_subcommand("metrics", "compare two dataset-format directories without a model");
  std::string m_pred, m_truth, m_out;
  metrics_cmd->add_option("--pred", m_pred, "prediction directory")->required();
  metrics_cmd->add_option("--truth", m_truth, "ground-truth directory")->required();
  metrics_cmd->add_option("--out", m_out, "write the metric record here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      synth_params.canvas_h = canvas[0];
      synth_params.canvas_w = canvas[1];
      synth_params.radius_min = radius[0];
      synth_params.radius_max = radius[1];
      for (int i = 0; i < 4; ++i) synth_params.class_mix[std::size_t(i)] = mix[std::size_t(i)];
      return run_synth(synth_out, synth_count, synth_params, common);
    }
    if (*prepare) return run_prepare(prep_data, prep_out);
    if (*train_cmd) {
      const TrainConfig cfg = load_config_with_overrides(train_config, common);
      const TrainResult result = train(cfg, train_out, train_resume);
      std::cout << "trained " << result.epochs_completed << " epochs\n"
                << "last:  " << result.last_checkpoint << "\n"
                << "best:  " << result.best_checkpoint << "\n"
                << "final: " << result.final_checkpoint << "\n";
      return 0;
    }
    if (*eval_cmd) {
      const TrainConfig cfg = load_config_with_overrides(eval_config, common);
      const MetricsReport report = evaluate_checkpoint(cfg, eval_ckpt, eval_split, eval_out);
      std::cout << serialize_metrics(report);
      return 0;
    }
    if (*pred_cmd) {
      predict_dir(pred_ckpt, pred_images, pred_out);
      return 0;
    }
    if (*metrics_cmd) {
      std::string per_image;
      const MetricsReport report = metrics_compare(m_pred, m_truth, &per_image);
      const std::string record = serialize_metrics(report);
      std::cout << record;
      if (!m_out.empty()) {
        std::ofstream out(m_out, std::ios::trunc);
        out << record;
        std::ofstream breakdown(m_out + ".per_image", std::ios::trunc);
        breakdown << per_image;
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}

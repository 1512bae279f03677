#pragma once

#include "nucgrade/metrics.hpp"
#include "nucgrade/trainconfig.hpp"

#include <string>
#include <vector>

namespace nucgrade {

struct TrainResult {
  std::string last_checkpoint;
  std::string best_checkpoint;
  std::string final_checkpoint;
  std::vector<double> train_loss;  // this run's epochs, in order
  std::vector<double> val_loss;
  std::vector<double> val_apq;
  int epochs_completed = 0;
};

// Two-phase training (frozen backbone, then fine-tuning) with Adam and the
// per-phase learning-rate drop. Writes last/best/final checkpoints and a
// train_log.txt into out_dir. With resume=true an existing last.ckpt
// continues with an identical trajectory.
TrainResult train(const TrainConfig& cfg, const std::string& out_dir, bool resume = false);

// Forward + post-processing + metric pooling over the requested split
// ("val" or "test"). Writes metrics.txt and per_image.txt into out_dir.
MetricsReport evaluate_checkpoint(const TrainConfig& cfg, const std::string& checkpoint_path,
                                  const std::string& split_name, const std::string& out_dir);

// Runs inference on every *.img.png under images_dir and writes, per image,
// the 16-bit instance map, a per-instance label table and an RGB overlay
// (grade 1 green, grade 2 yellow, grade 3 red, endothelial blue).
void predict_dir(const std::string& checkpoint_path, const std::string& images_dir,
                 const std::string& out_dir);

// Model-free metric comparison of two dataset-format directories.
// per_image_out, when non-null, receives one line per sample.
MetricsReport metrics_compare(const std::string& pred_dir, const std::string& truth_dir,
                              std::string* per_image_out = nullptr);

}  // namespace nucgrade

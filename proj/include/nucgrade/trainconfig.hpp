#pragma once

#include "nucgrade/augment.hpp"
#include "nucgrade/losses.hpp"
#include "nucgrade/network.hpp"
#include "nucgrade/postprocess.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace nucgrade {

// Full training configuration, mirroring the flat key=value config file.
// Nested blocks use dotted keys (network.*, postprocess.*, loss_weights.*).
struct TrainConfig {
  std::string data_dir;
  std::array<double, 3> split = {0.7, 0.1, 0.2};
  std::uint64_t split_seed = 1;
  int epochs_frozen = 50;
  int epochs_finetune = 50;
  double lr_initial = 1e-4;
  double lr_after = 1e-5;
  int lr_drop_epoch = 25;  // within each phase
  int batch_size = 4;
  std::vector<AugOp> augmentations = {AugOp::kFlip, AugOp::kRotation, AugOp::kBlur};
  LossWeights loss_weights;
  NetworkConfig network;
  PostprocessParams postprocess;
  std::uint64_t seed = 1;
  bool deterministic = false;

  void validate() const;
};

// Parses config text; unknown keys raise ConfigError.
TrainConfig parse_train_config_text(const std::string& text);
TrainConfig load_train_config(const std::string& path);

// Serializes every field (the checkpoint embeds this text).
std::string serialize_train_config(const TrainConfig& cfg);

}  // namespace nucgrade

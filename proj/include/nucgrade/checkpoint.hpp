#pragma once

#include "nucgrade/tensor.hpp"

#include <map>
#include <string>

namespace nucgrade {

// Checkpoint container: serialized config text, string metadata (epoch, seed,
// optimizer step, ...) and named float arrays (parameters, batch-norm running
// statistics, Adam moments). The binary layout round-trips bitwise.
struct Checkpoint {
  std::string config_text;
  std::map<std::string, std::string> meta;
  std::map<std::string, Tensor<float>> arrays;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace nucgrade

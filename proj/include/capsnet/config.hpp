#pragma once

#include <string>

#include "capsnet/model.hpp"
#include "capsnet/training.hpp"

namespace capsnet {

// One experiment described as flat key=value text (dotted keys for nesting).
// Unknown keys are rejected.
struct RunConfig {
  std::string dataset = "cifar10";  // "cifar10" or "mnist"
  ModelConfig model;
  int batch_size = 128;
  double learning_rate = 1e-3;
  int epochs = 50;
  int train_limit = 0;  // 0 = full split
  int val_limit = 0;
  AugmentationConfig augment;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

// Checkpoint-internal model description; parse(serialize(cfg)) == cfg and the
// text itself is byte-stable.
std::string serialize_model_config(const ModelConfig& cfg);
ModelConfig parse_model_config(const std::string& text);

}  // namespace capsnet

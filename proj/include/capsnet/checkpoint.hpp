#pragma once

#include <string>
#include <vector>

#include "capsnet/model.hpp"
#include "capsnet/training.hpp"

namespace capsnet {

// Everything needed to resume a run: parameters, optimizer moments, epoch
// counter, RNG state string, and metric history.
struct TrainingSnapshot {
  Model<float> model;
  AdamState<float> adam;
  bool has_adam = false;
  int epoch = 0;
  std::string rng_state;
  std::vector<MetricRecord> history;
};

// Binary format: magic "CAPS", u32 version, length-prefixed model-config text,
// then per-tensor records (name, dtype, shape, little-endian payload).
void save_checkpoint(const TrainingSnapshot& snap, const std::string& path);
TrainingSnapshot load_checkpoint(const std::string& path);

inline void save_checkpoint(const Model<float>& model, const std::string& path) {
  TrainingSnapshot snap;
  snap.model = model;
  save_checkpoint(snap, path);
}

}  // namespace capsnet

#pragma once

#include <string>
#include <vector>

#include "capsnet/training.hpp"

namespace capsnet {

// Test-time average of per-class capsule lengths over independently trained
// members.
struct Ensemble {
  std::vector<Model<float>> members;

  void validate() const {
    if (members.empty()) throw ConfigError("ensemble needs at least one member");
    const auto& first = members.front().cfg;
    for (const auto& m : members) {
      if (m.cfg.num_classes != first.num_classes)
        throw ConfigError("ensemble members disagree on class count: " +
                          std::to_string(m.cfg.num_classes) + " vs " +
                          std::to_string(first.num_classes));
      if (m.cfg.input_channels != first.input_channels || m.cfg.input_size != first.input_size)
        throw ConfigError("ensemble members disagree on input shape");
      if (m.cfg.nota != first.nota)
        throw ConfigError("ensemble members disagree on the NOTA flag");
    }
  }
};

// Mean over members of each real class's capsule length.
inline std::vector<double> ensemble_scores(Ensemble& e, const Tensor<float>& image) {
  const int k = e.members.front().cfg.num_classes;
  std::vector<double> scores(static_cast<std::size_t>(k), 0.0);
  for (auto& m : e.members) {
    auto out = forward(m, image);
    auto norms = ops::l2_norm_along_last_axis(out.class_capsules, 1e-9f);
    for (int c = 0; c < k; ++c) scores[std::size_t(c)] += norms.at(c);
  }
  for (auto& s : scores) s /= double(e.members.size());
  return scores;
}

inline int ensemble_predict(Ensemble& e, const Tensor<float>& image) {
  e.validate();
  auto scores = ensemble_scores(e, image);
  int best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c)
    if (scores[c] > scores[std::size_t(best)]) best = static_cast<int>(c);
  return best;
}

inline double ensemble_evaluate(Ensemble& e, const DatasetSplit& split,
                                const AugmentationConfig& aug = {}) {
  e.validate();
  const bool cropping = aug.enabled && aug.crop_size > 0 && aug.crop_size < split.height;
  int correct = 0;
  for (int i = 0; i < split.n; ++i) {
    Tensor<float> img = split.image(i);
    if (cropping)
      img = crop_image(img, aug.crop_size, (split.height - aug.crop_size) / 2,
                       (split.width - aug.crop_size) / 2);
    auto scores = ensemble_scores(e, img);
    int best = 0;
    for (std::size_t c = 1; c < scores.size(); ++c)
      if (scores[c] > scores[std::size_t(best)]) best = static_cast<int>(c);
    if (best == split.labels[std::size_t(i)]) ++correct;
  }
  return double(correct) / double(split.n);
}

// Manifest file: one checkpoint path per line; blank lines and # comments
// ignored. Relative paths resolve against the manifest's directory.
std::vector<std::string> read_ensemble_manifest(const std::string& path);

}  // namespace capsnet

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "capsnet/tensor.hpp"

namespace capsnet {

struct DatasetSplit {
  std::string name;  // "train" or "val"
  int n = 0, channels = 0, height = 0, width = 0;
  std::vector<float> pixels;  // [n][c][h][w], values in [0,1]
  std::vector<int> labels;
  std::uint64_t shuffle_seed = 0;

  std::size_t image_numel() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  Tensor<float> image(int i) const {
    const std::size_t sz = image_numel();
    std::vector<float> buf(pixels.begin() + static_cast<std::ptrdiff_t>(i * sz),
                           pixels.begin() + static_cast<std::ptrdiff_t>((i + 1) * sz));
    return Tensor<float>::from({channels, height, width}, std::move(buf));
  }
  // Keep only the first k examples (desk-scale subsets).
  void truncate(int k);
};

struct AugmentationConfig {
  bool enabled = false;
  int crop_size = 0;
};

struct Batch {
  std::vector<Tensor<float>> images;
  std::vector<int> labels;
  // original indices into the split, in batch order
  std::vector<int> indices;
};

// Deterministic shuffled batch stream over one split. The permutation and any
// crop offsets derive solely from (split.shuffle_seed, epoch_seed). Validation
// splits get a center crop when cropping is enabled; training crops are
// uniform random per image. The last partial batch is kept.
class BatchStream {
 public:
  BatchStream(const DatasetSplit& split, int batch_size, std::uint64_t epoch_seed,
              AugmentationConfig aug);

  std::optional<Batch> next();
  int num_batches() const;

 private:
  const DatasetSplit& split_;
  int batch_size_;
  AugmentationConfig aug_;
  std::vector<int> order_;
  std::mt19937_64 rng_;
  std::size_t cursor_ = 0;
};

std::pair<DatasetSplit, DatasetSplit> load_cifar10(const std::string& dir);
std::pair<DatasetSplit, DatasetSplit> load_mnist(const std::string& dir);

// Crop a [C,H,W] image to [C,size,size] at the given offset.
Tensor<float> crop_image(const Tensor<float>& img, int size, int off_y, int off_x);

}  // namespace capsnet

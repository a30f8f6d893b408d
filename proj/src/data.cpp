#include "capsnet/data.hpp"

#include <algorithm>
#include <fstream>

namespace capsnet {

namespace {

constexpr int kCifarRecordBytes = 3073;
constexpr int kCifarRecordsPerFile = 10000;

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  in.seekg(0, std::ios::end);
  auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<unsigned char> buf(size);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
  return buf;
}

void append_cifar_file(const std::string& path, DatasetSplit& split) {
  auto buf = read_file(path);
  const std::size_t expect =
      static_cast<std::size_t>(kCifarRecordsPerFile) * kCifarRecordBytes;
  if (buf.size() != expect)
    throw FormatError(path + ": expected " + std::to_string(expect) + " bytes, got " +
                      std::to_string(buf.size()));
  for (int r = 0; r < kCifarRecordsPerFile; ++r) {
    const unsigned char* rec = buf.data() + static_cast<std::size_t>(r) * kCifarRecordBytes;
    if (rec[0] > 9)
      throw FormatError(path + ": corrupt record " + std::to_string(r) + ", label byte " +
                        std::to_string(int(rec[0])));
    split.labels.push_back(rec[0]);
    for (int i = 0; i < 3072; ++i) split.pixels.push_back(rec[1 + i] / 255.0f);
  }
  split.n += kCifarRecordsPerFile;
}

std::uint32_t read_be32(const unsigned char* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
         std::uint32_t(p[3]);
}

void load_idx_pair(const std::string& images_path, const std::string& labels_path,
                   DatasetSplit& split) {
  auto img = read_file(images_path);
  auto lab = read_file(labels_path);
  if (img.size() < 16) throw FormatError(images_path + ": truncated IDX header");
  if (lab.size() < 8) throw FormatError(labels_path + ": truncated IDX header");
  const std::uint32_t img_magic = read_be32(img.data());
  const std::uint32_t lab_magic = read_be32(lab.data());
  if (img_magic != 0x00000803)
    throw FormatError(images_path + ": bad magic 0x" + [&] {
      char b[16];
      std::snprintf(b, sizeof b, "%08x", img_magic);
      return std::string(b);
    }());
  if (lab_magic != 0x00000801)
    throw FormatError(labels_path + ": bad magic 0x" + [&] {
      char b[16];
      std::snprintf(b, sizeof b, "%08x", lab_magic);
      return std::string(b);
    }());
  const int n = static_cast<int>(read_be32(img.data() + 4));
  const int h = static_cast<int>(read_be32(img.data() + 8));
  const int w = static_cast<int>(read_be32(img.data() + 12));
  const int n_lab = static_cast<int>(read_be32(lab.data() + 4));
  if (n != n_lab)
    throw FormatError(images_path + ": image count " + std::to_string(n) +
                      " != label count " + std::to_string(n_lab));
  const std::size_t expect = 16 + static_cast<std::size_t>(n) * h * w;
  if (img.size() != expect)
    throw FormatError(images_path + ": expected " + std::to_string(expect) + " bytes, got " +
                      std::to_string(img.size()));
  if (lab.size() != static_cast<std::size_t>(8 + n))
    throw FormatError(labels_path + ": expected " + std::to_string(8 + n) + " bytes, got " +
                      std::to_string(lab.size()));
  split.channels = 1;
  split.height = h;
  split.width = w;
  split.pixels.reserve(static_cast<std::size_t>(n) * h * w);
  for (std::size_t i = 0; i < static_cast<std::size_t>(n) * h * w; ++i)
    split.pixels.push_back(img[16 + i] / 255.0f);
  for (int i = 0; i < n; ++i) {
    if (lab[8 + i] > 9)
      throw FormatError(labels_path + ": corrupt label " + std::to_string(int(lab[8 + i])));
    split.labels.push_back(lab[8 + i]);
  }
  split.n = n;
}

}  // namespace

void DatasetSplit::truncate(int k) {
  if (k <= 0 || k >= n) return;
  n = k;
  pixels.resize(static_cast<std::size_t>(k) * image_numel());
  labels.resize(static_cast<std::size_t>(k));
}

std::pair<DatasetSplit, DatasetSplit> load_cifar10(const std::string& dir) {
  DatasetSplit train, val;
  train.name = "train";
  val.name = "val";
  train.channels = val.channels = 3;
  train.height = val.height = 32;
  train.width = val.width = 32;
  for (int i = 1; i <= 5; ++i)
    append_cifar_file(dir + "/data_batch_" + std::to_string(i) + ".bin", train);
  append_cifar_file(dir + "/test_batch.bin", val);
  return {std::move(train), std::move(val)};
}

std::pair<DatasetSplit, DatasetSplit> load_mnist(const std::string& dir) {
  DatasetSplit train, val;
  train.name = "train";
  val.name = "val";
  load_idx_pair(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte", train);
  load_idx_pair(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte", val);
  return {std::move(train), std::move(val)};
}

Tensor<float> crop_image(const Tensor<float>& img, int size, int off_y, int off_x) {
  const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
  if (size > h || size > w) throw InputError("crop size exceeds image size");
  if (off_y < 0 || off_x < 0 || off_y + size > h || off_x + size > w)
    throw InputError("crop offset out of range");
  Tensor<float> out = Tensor<float>::zeros({c, size, size});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        out.at((static_cast<std::size_t>(ch) * size + y) * size + x) =
            img.at((static_cast<std::size_t>(ch) * h + off_y + y) * w + off_x + x);
  return out;
}

BatchStream::BatchStream(const DatasetSplit& split, int batch_size, std::uint64_t epoch_seed,
                         AugmentationConfig aug)
    : split_(split), batch_size_(batch_size), aug_(aug),
      rng_(split.shuffle_seed * 0x9e3779b97f4a7c15ULL + epoch_seed) {
  if (batch_size < 1) throw InputError("batch_size must be >= 1");
  order_.resize(static_cast<std::size_t>(split.n));
  for (int i = 0; i < split.n; ++i) order_[static_cast<std::size_t>(i)] = i;
  std::shuffle(order_.begin(), order_.end(), rng_);
}

int BatchStream::num_batches() const {
  return (split_.n + batch_size_ - 1) / batch_size_;
}

std::optional<Batch> BatchStream::next() {
  if (cursor_ >= order_.size()) return std::nullopt;
  Batch batch;
  const bool cropping = aug_.enabled && aug_.crop_size > 0 && aug_.crop_size < split_.height;
  const int margin_y = split_.height - aug_.crop_size;
  const int margin_x = split_.width - aug_.crop_size;
  while (cursor_ < order_.size() && static_cast<int>(batch.images.size()) < batch_size_) {
    const int idx = order_[cursor_++];
    Tensor<float> img = split_.image(idx);
    if (cropping) {
      int oy, ox;
      if (split_.name == "train") {
        oy = static_cast<int>(rng_() % static_cast<std::uint64_t>(margin_y + 1));
        ox = static_cast<int>(rng_() % static_cast<std::uint64_t>(margin_x + 1));
      } else {
        oy = margin_y / 2;
        ox = margin_x / 2;
      }
      img = crop_image(img, aug_.crop_size, oy, ox);
    }
    batch.images.push_back(std::move(img));
    batch.labels.push_back(split_.labels[static_cast<std::size_t>(idx)]);
    batch.indices.push_back(idx);
  }
  return batch;
}

}  // namespace capsnet

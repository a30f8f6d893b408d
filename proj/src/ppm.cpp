#include "capsnet/ppm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace capsnet {

void write_ppm(const std::string& path, int width, int height,
               const std::vector<float>& rgb_pixels) {
  if (rgb_pixels.size() != static_cast<std::size_t>(width) * height * 3)
    throw InputError("write_ppm: pixel buffer size does not match " + std::to_string(width) +
                     "x" + std::to_string(height));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path);
  out << "P6\n" << width << " " << height << "\n255\n";
  for (float v : rgb_pixels) {
    const float clamped = std::clamp(v, 0.0f, 1.0f);
    const unsigned char byte = static_cast<unsigned char>(std::lround(clamped * 255.0f));
    out.put(static_cast<char>(byte));
  }
  if (!out) throw FormatError("write failure on " + path);
}

namespace {

// copy one [C,H,W] image into an RGB canvas at (row0, col0)
void blit(std::vector<float>& canvas, int canvas_w, const Tensor<float>& img, int row0,
          int col0) {
  const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        const int src_ch = c == 1 ? 0 : ch;
        canvas[(static_cast<std::size_t>(row0 + y) * canvas_w + col0 + x) * 3 + ch] =
            img.at((static_cast<std::size_t>(src_ch) * h + y) * w + x);
      }
}

}  // namespace

void write_comparison_grid(const std::string& path, const std::vector<Tensor<float>>& originals,
                           const std::vector<Tensor<float>>& reconstructions) {
  if (originals.empty() || originals.size() != reconstructions.size())
    throw InputError("write_comparison_grid: need equally many originals and reconstructions");
  const int h = originals[0].dim(1), w = originals[0].dim(2);
  const int n = static_cast<int>(originals.size());
  std::vector<float> canvas(static_cast<std::size_t>(n) * w * 2 * h * 3, 0.0f);
  for (int i = 0; i < n; ++i) {
    blit(canvas, n * w, originals[std::size_t(i)], 0, i * w);
    blit(canvas, n * w, reconstructions[std::size_t(i)], h, i * w);
  }
  write_ppm(path, n * w, 2 * h, canvas);
}

}  // namespace capsnet

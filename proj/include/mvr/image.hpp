#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace mvr {

// Row-major H x W x C image of doubles, channel-interleaved, y down.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, double fill = 0.0)
      : width_(width), height_(height), channels_(channels),
        data_(static_cast<std::size_t>(width) * height * channels, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }

  double& at(int x, int y, int c = 0) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  double at(int x, int y, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

// Luma conversion with fixed weights 0.299/0.587/0.114.
Image to_grayscale(const Image& rgb);

// 8-bit PNG. Load returns values in [0,1] (sources divided by 255 exactly);
// RGB images come back with 3 channels, grayscale with 1.
Image load_png(const std::string& path);
void save_png(const Image& img, const std::string& path);

// 16-bit grayscale PNG from raw uint16 samples (depth dumps).
void save_png16(const std::vector<std::uint16_t>& samples, int width, int height,
                const std::string& path);

}  // namespace mvr

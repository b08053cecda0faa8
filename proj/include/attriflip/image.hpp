#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace attriflip {

// 8-bit image, row-major, channels interleaved (HWC). channels is 1 or 3.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int h, int w, int c)
      : height(h), width(w), channels(c),
        pixels(static_cast<std::size_t>(h) * w * c, 0) {
    if (h <= 0 || w <= 0 || (c != 1 && c != 3))
      throw std::invalid_argument("Image: bad dimensions");
  }

  std::uint8_t& at(int y, int x, int c = 0) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int y, int x, int c = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t size() const { return pixels.size(); }

  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
  bool operator==(const Image& o) const {
    return same_shape(o) && pixels == o.pixels;
  }
};

// Planar real-valued tensor (channel, row, column), the network's working
// representation.
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;

  Tensor() = default;
  Tensor(int c, int h, int w)
      : channels(c), height(h), width(w),
        values(static_cast<std::size_t>(c) * h * w, 0.0) {}

  double& at(int c, int y, int x) {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  std::size_t size() const { return values.size(); }
};

// Maps pixels to the network's input range: v = p/255 - 0.5, so values lie
// in [-0.5, +0.5]. HWC bytes become CHW doubles.
inline Tensor normalize(const Image& img) {
  Tensor t(img.channels, img.height, img.width);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        t.at(c, y, x) = static_cast<double>(img.at(y, x, c)) / 255.0 - 0.5;
  return t;
}

}  // namespace attriflip

#pragma once

#include <string>
#include <vector>

#include "ggf/errors.hpp"

namespace ggf {

// Row-major interleaved float image; values are linear [0,1] for color work
// (PFM payloads may exceed that range).
struct ImageF {
  int width = 0, height = 0, channels = 0;
  std::vector<double> data;

  ImageF() = default;
  ImageF(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c),
        data(static_cast<size_t>(w) * h * c, fill) {}

  double& at(int x, int y, int c) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  double at(int x, int y, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  bool same_shape(const ImageF& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

// 8-bit PNG (gray or RGB); values clamped to [0,1] on write.
ImageF load_png(const std::string& path);
void save_png(const ImageF& image, const std::string& path);

// Portable float map, float32 payload. 1- or 3-channel.
ImageF load_pfm(const std::string& path);
void save_pfm(const ImageF& image, const std::string& path);

}  // namespace ggf

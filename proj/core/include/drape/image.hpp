#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drape/check.hpp"
#include "drape/common.hpp"

namespace drape {

// Dense row-major image, values in [0,1], 1 or 3 channels.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c), data(static_cast<size_t>(w) * h * c, fill) {}

  double& at(int x, int y, int c) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  double at(int x, int y, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }

  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }

  Vec3 rgb(int x, int y) const {
    DRAPE_ASSERT(channels == 3, "rgb() on ", channels, "-channel image");
    return Vec3(at(x, y, 0), at(x, y, 1), at(x, y, 2));
  }
  void set_rgb(int x, int y, const Vec3& v) {
    at(x, y, 0) = v.x();
    at(x, y, 1) = v.y();
    at(x, y, 2) = v.z();
  }

  void clamp01() {
    for (double& v : data) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  }
};

// Reads PNG (8/16-bit gray or rgb) or PPM/PGM by extension.
Image load_image(const std::string& path);

// Writes by extension: .png (8-bit), .ppm (16-bit binary P6), .pgm (16-bit P5).
void save_image(const Image& image, const std::string& path);

// Loads a single-channel mask (255 = inside); values are snapped to {0,1},
// returns the number of pixels that were not exactly 0 or 255.
Image load_mask(const std::string& path, int* non_binary_pixels = nullptr);

}  // namespace drape

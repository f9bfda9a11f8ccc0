#include "microsr/resize.hpp"

#include <algorithm>
#include <cmath>

namespace microsr {

Image box_downsample2x(const Image& img) {
  if (img.h % 2 != 0 || img.w % 2 != 0) {
    throw DataError("box_downsample2x: dims must be even, got " + std::to_string(img.h) + "x" +
                    std::to_string(img.w));
  }
  Image out(img.h / 2, img.w / 2);
  for (std::int64_t r = 0; r < out.h; ++r) {
    for (std::int64_t c = 0; c < out.w; ++c) {
      out.at(r, c) = 0.25f * (img.at(2 * r, 2 * c) + img.at(2 * r, 2 * c + 1) +
                              img.at(2 * r + 1, 2 * c) + img.at(2 * r + 1, 2 * c + 1));
    }
  }
  return out;
}

Image upsample_nearest2x(const Image& img) {
  Image out(img.h * 2, img.w * 2);
  for (std::int64_t r = 0; r < out.h; ++r)
    for (std::int64_t c = 0; c < out.w; ++c) out.at(r, c) = img.at(r / 2, c / 2);
  return out;
}

namespace {

// Cubic convolution kernel, a = -0.5.
inline double cubic_weight(double x) {
  const double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0;
  if (x < 2.0) return a * x * x * x - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a;
  return 0.0;
}

inline std::int64_t clampi(std::int64_t v, std::int64_t lo, std::int64_t hi) {
  return std::min(hi, std::max(lo, v));
}

}  // namespace

Image bicubic_upsample2x(const Image& img) {
  const std::int64_t oh = img.h * 2, ow = img.w * 2;
  Image out(oh, ow);
  // Separable: horizontal pass into a temp, then vertical. Center-aligned
  // sampling: src = (dst + 0.5)/2 - 0.5.
  std::vector<double> tmp(static_cast<std::size_t>(img.h * ow));
  for (std::int64_t c = 0; c < ow; ++c) {
    const double sx = (c + 0.5) / 2.0 - 0.5;
    const std::int64_t x0 = static_cast<std::int64_t>(std::floor(sx));
    double wsum = 0.0, wts[4];
    for (int k = 0; k < 4; ++k) {
      wts[k] = cubic_weight(sx - (x0 - 1 + k));
      wsum += wts[k];
    }
    for (int k = 0; k < 4; ++k) wts[k] /= wsum;
    for (std::int64_t r = 0; r < img.h; ++r) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += wts[k] * img.at(r, clampi(x0 - 1 + k, 0, img.w - 1));
      tmp[r * ow + c] = acc;
    }
  }
  for (std::int64_t r = 0; r < oh; ++r) {
    const double sy = (r + 0.5) / 2.0 - 0.5;
    const std::int64_t y0 = static_cast<std::int64_t>(std::floor(sy));
    double wsum = 0.0, wts[4];
    for (int k = 0; k < 4; ++k) {
      wts[k] = cubic_weight(sy - (y0 - 1 + k));
      wsum += wts[k];
    }
    for (int k = 0; k < 4; ++k) wts[k] /= wsum;
    for (std::int64_t c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += wts[k] * tmp[clampi(y0 - 1 + k, 0, img.h - 1) * ow + c];
      out.at(r, c) = static_cast<float>(acc);
    }
  }
  return out;
}

}  // namespace microsr

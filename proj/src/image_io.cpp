#include "microsr/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>

namespace microsr {

LoadedImage load_grayscale(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (m.empty()) throw DataError("failed to decode image: " + path);
  if (m.channels() != 1) {
    throw DataError("non-grayscale input (" + std::to_string(m.channels()) + " channels): " +
                    path);
  }
  LoadedImage out;
  float maxval = 0.0f;
  if (m.depth() == CV_8U) {
    out.bit_depth = 8;
    maxval = 255.0f;
  } else if (m.depth() == CV_16U) {
    out.bit_depth = 16;
    maxval = 65535.0f;
  } else {
    throw DataError("unsupported pixel depth (want 8- or 16-bit unsigned): " + path);
  }
  out.image = Image(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      const float raw = (out.bit_depth == 8) ? static_cast<float>(m.at<std::uint8_t>(r, c))
                                             : static_cast<float>(m.at<std::uint16_t>(r, c));
      out.image.at(r, c) = raw / maxval;
    }
  }
  return out;
}

void save_grayscale(const std::string& path, const Image& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) {
    throw DataError("save_grayscale: bit depth must be 8 or 16");
  }
  cv::Mat m(static_cast<int>(img.h), static_cast<int>(img.w),
            bit_depth == 8 ? CV_8UC1 : CV_16UC1);
  const float maxval = bit_depth == 8 ? 255.0f : 65535.0f;
  for (std::int64_t r = 0; r < img.h; ++r) {
    for (std::int64_t c = 0; c < img.w; ++c) {
      const float v = std::min(1.0f, std::max(0.0f, img.at(r, c)));
      const float q = std::round(v * maxval);
      if (bit_depth == 8) {
        m.at<std::uint8_t>(static_cast<int>(r), static_cast<int>(c)) =
            static_cast<std::uint8_t>(q);
      } else {
        m.at<std::uint16_t>(static_cast<int>(r), static_cast<int>(c)) =
            static_cast<std::uint16_t>(q);
      }
    }
  }
  if (!cv::imwrite(path, m)) throw DataError("failed to write image: " + path);
}

}  // namespace microsr

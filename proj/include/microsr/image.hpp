#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "microsr/tensor.hpp"

namespace microsr {

// Grayscale image, row-major float pixels. Dataset images live in [0,1].
struct Image {
  std::int64_t h = 0;
  std::int64_t w = 0;
  std::vector<float> px;

  Image() = default;
  Image(std::int64_t h_, std::int64_t w_, float fill = 0.0f)
      : h(h_), w(w_), px(static_cast<std::size_t>(h_ * w_), fill) {}

  float& at(std::int64_t r, std::int64_t c) { return px[r * w + c]; }
  float at(std::int64_t r, std::int64_t c) const { return px[r * w + c]; }
  std::int64_t size() const { return h * w; }
};

inline Image crop(const Image& img, std::int64_t r0, std::int64_t c0, std::int64_t ch,
                  std::int64_t cw) {
  if (r0 < 0 || c0 < 0 || r0 + ch > img.h || c0 + cw > img.w) {
    throw DataError("crop: window " + std::to_string(ch) + "x" + std::to_string(cw) + " at (" +
                    std::to_string(r0) + "," + std::to_string(c0) + ") exceeds image " +
                    std::to_string(img.h) + "x" + std::to_string(img.w));
  }
  Image out(ch, cw);
  for (std::int64_t r = 0; r < ch; ++r)
    for (std::int64_t c = 0; c < cw; ++c) out.at(r, c) = img.at(r0 + r, c0 + c);
  return out;
}

inline Image hflip(const Image& img) {
  Image out(img.h, img.w);
  for (std::int64_t r = 0; r < img.h; ++r)
    for (std::int64_t c = 0; c < img.w; ++c) out.at(r, c) = img.at(r, img.w - 1 - c);
  return out;
}

inline Image vflip(const Image& img) {
  Image out(img.h, img.w);
  for (std::int64_t r = 0; r < img.h; ++r)
    for (std::int64_t c = 0; c < img.w; ++c) out.at(r, c) = img.at(img.h - 1 - r, c);
  return out;
}

// Counterclockwise quarter turn of a square image.
inline Image rot90ccw(const Image& img) {
  if (img.h != img.w) throw DataError("rot90ccw: image must be square");
  Image out(img.h, img.w);
  for (std::int64_t r = 0; r < img.h; ++r)
    for (std::int64_t c = 0; c < img.w; ++c) out.at(r, c) = img.at(c, img.w - 1 - r);
  return out;
}

inline bool images_equal(const Image& a, const Image& b) {
  return a.h == b.h && a.w == b.w && a.px == b.px;
}

template <typename T>
TensorPtr<T> image_to_tensor(const Image& img) {
  std::vector<T> data(img.px.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<T>(img.px[i]);
  return make_tensor<T>(Shape{1, 1, img.h, img.w}, std::move(data));
}

// Extracts sample n / channel 0 of an Nx1xHxW tensor, clamping to [0,1].
template <typename T>
Image tensor_to_image(const Tensor<T>& t, std::int64_t n = 0, bool clamp = true) {
  if (t.shape.size() != 4 || t.shape[1] != 1) {
    throw ShapeError("tensor_to_image: expected Nx1xHxW, got " + shape_str(t.shape));
  }
  const std::int64_t h = t.shape[2], w = t.shape[3];
  Image img(h, w);
  const T* src = t.data.data() + n * h * w;
  for (std::int64_t i = 0; i < h * w; ++i) {
    float v = static_cast<float>(src[i]);
    if (clamp) v = std::min(1.0f, std::max(0.0f, v));
    img.px[i] = v;
  }
  return img;
}

}  // namespace microsr

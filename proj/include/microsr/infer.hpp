#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "microsr/image.hpp"
#include "microsr/models.hpp"

namespace microsr {

namespace detail {

// Tile start positions covering [0, dim) with the requested stride; the last
// tile is aligned to the image edge.
inline std::vector<std::int64_t> tile_starts(std::int64_t dim, std::int64_t tile,
                                             std::int64_t stride) {
  std::vector<std::int64_t> starts;
  for (std::int64_t s = 0;; s += stride) {
    if (s + tile >= dim) {
      starts.push_back(dim - tile);
      break;
    }
    starts.push_back(s);
  }
  return starts;
}

// Linear feather profile across the overlap bands; neighboring tiles at the
// nominal stride sum to exactly 1 inside a band.
inline double feather_weight(std::int64_t i, std::int64_t tile, std::int64_t overlap) {
  const double up = static_cast<double>(i + 1) / static_cast<double>(overlap + 1);
  const double down = static_cast<double>(tile - i) / static_cast<double>(overlap + 1);
  return std::min(1.0, std::min(up, down));
}

}  // namespace detail

// Single forward pass on a whole image; inputs smaller than the generator's
// 16 px minimum are edge-padded and the output cropped back.
template <typename T>
Image infer_whole(const Generator<T>& gen, const Image& lr) {
  constexpr std::int64_t kMin = 16;
  if (lr.h >= kMin && lr.w >= kMin) {
    auto out = gen.forward(image_to_tensor<T>(lr));
    return tensor_to_image(*out);
  }
  const std::int64_t ph = std::max(lr.h, kMin), pw = std::max(lr.w, kMin);
  Image padded(ph, pw);
  for (std::int64_t r = 0; r < ph; ++r)
    for (std::int64_t c = 0; c < pw; ++c)
      padded.at(r, c) = lr.at(std::min(r, lr.h - 1), std::min(c, lr.w - 1));
  auto out = gen.forward(image_to_tensor<T>(padded));
  return crop(tensor_to_image(*out), 0, 0, 2 * lr.h, 2 * lr.w);
}

// Tiled 2x inference: overlapping LR tiles are processed independently and
// blended in the overlap bands by linear feathering. A tile covering the
// whole image reduces to the plain forward pass, bit for bit.
template <typename T>
Image infer_tiled(const Generator<T>& gen, const Image& lr, std::int64_t tile,
                  std::int64_t tile_overlap) {
  if (tile < 16) throw DataError("inference tile must be >= 16 px");
  if (tile_overlap < 0 || tile_overlap >= tile) {
    throw DataError("tile overlap must be in [0, tile)");
  }
  if (tile >= lr.h && tile >= lr.w) return infer_whole(gen, lr);

  const std::int64_t th = std::min(tile, lr.h), tw = std::min(tile, lr.w);
  const std::int64_t stride_h = std::max<std::int64_t>(1, th - tile_overlap);
  const std::int64_t stride_w = std::max<std::int64_t>(1, tw - tile_overlap);
  const auto rows = detail::tile_starts(lr.h, th, stride_h);
  const auto cols = detail::tile_starts(lr.w, tw, stride_w);

  const std::int64_t oh = 2 * lr.h, ow = 2 * lr.w;
  std::vector<double> acc(static_cast<std::size_t>(oh * ow), 0.0);
  std::vector<double> wsum(static_cast<std::size_t>(oh * ow), 0.0);
  std::vector<double> wr(static_cast<std::size_t>(2 * th)), wc(static_cast<std::size_t>(2 * tw));
  for (std::int64_t i = 0; i < 2 * th; ++i)
    wr[i] = detail::feather_weight(i, 2 * th, 2 * tile_overlap);
  for (std::int64_t i = 0; i < 2 * tw; ++i)
    wc[i] = detail::feather_weight(i, 2 * tw, 2 * tile_overlap);

  for (std::int64_t r0 : rows) {
    for (std::int64_t c0 : cols) {
      const Image tile_img = crop(lr, r0, c0, th, tw);
      const Image out = infer_whole(gen, tile_img);
      for (std::int64_t r = 0; r < out.h; ++r) {
        for (std::int64_t c = 0; c < out.w; ++c) {
          const double wgt = wr[r] * wc[c];
          const std::int64_t idx = (2 * r0 + r) * ow + (2 * c0 + c);
          acc[idx] += wgt * out.at(r, c);
          wsum[idx] += wgt;
        }
      }
    }
  }
  Image result(oh, ow);
  for (std::int64_t i = 0; i < oh * ow; ++i) {
    result.px[i] = static_cast<float>(acc[i] / wsum[i]);
  }
  return result;
}

}  // namespace microsr

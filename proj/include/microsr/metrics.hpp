#pragma once

#include <string>

#include "microsr/image.hpp"

namespace microsr {

struct MetricReport {
  double psnr_db = 0.0;  // +inf when the images are identical
  double ssim = 0.0;
  std::string image_id;
};

// 10*log10(max_val^2 / MSE), +inf when MSE == 0. Computed in double.
double psnr(const Image& x, const Image& y, double max_val = 1.0);

// Reference SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// valid-mode windows so both images must be at least 11x11.
double ssim(const Image& x, const Image& y, double max_val = 1.0);

}  // namespace microsr

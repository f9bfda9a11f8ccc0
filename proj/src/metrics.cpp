#include "microsr/metrics.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace microsr {

double psnr(const Image& x, const Image& y, double max_val) {
  if (x.h != y.h || x.w != y.w) {
    throw ShapeError("psnr: image sizes differ, " + std::to_string(x.h) + "x" +
                     std::to_string(x.w) + " vs " + std::to_string(y.h) + "x" +
                     std::to_string(y.w));
  }
  if (!(max_val > 0.0)) throw NumericError("psnr: max_val must be > 0");
  double mse = 0.0;
  for (std::size_t i = 0; i < x.px.size(); ++i) {
    const double d = static_cast<double>(x.px[i]) - static_cast<double>(y.px[i]);
    mse += d * d;
  }
  mse /= static_cast<double>(x.px.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_val * max_val / mse);
}

namespace {

constexpr std::int64_t kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

const std::vector<double>& gaussian_1d() {
  static const std::vector<double> g = [] {
    std::vector<double> w(kWindow);
    const std::int64_t half = kWindow / 2;
    double sum = 0.0;
    for (std::int64_t i = 0; i < kWindow; ++i) {
      const double d = static_cast<double>(i - half);
      w[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
      sum += w[i];
    }
    for (auto& v : w) v /= sum;
    return w;
  }();
  return g;
}

// Valid-mode separable Gaussian filter; the 2D window is the outer product
// of the normalized 1D kernel with itself.
std::vector<double> filter_valid(const std::vector<double>& img, std::int64_t h, std::int64_t w) {
  const auto& g = gaussian_1d();
  const std::int64_t ow = w - kWindow + 1;
  const std::int64_t oh = h - kWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h * ow));
  for (std::int64_t r = 0; r < h; ++r) {
    for (std::int64_t c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (std::int64_t k = 0; k < kWindow; ++k) acc += g[k] * img[r * w + c + k];
      tmp[r * ow + c] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh * ow));
  for (std::int64_t r = 0; r < oh; ++r) {
    for (std::int64_t c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (std::int64_t k = 0; k < kWindow; ++k) acc += g[k] * tmp[(r + k) * ow + c];
      out[r * ow + c] = acc;
    }
  }
  return out;
}

}  // namespace

double ssim(const Image& x, const Image& y, double max_val) {
  if (x.h != y.h || x.w != y.w) throw ShapeError("ssim: image sizes differ");
  if (x.h < kWindow || x.w < kWindow) {
    throw ShapeError("ssim: image smaller than the " + std::to_string(kWindow) + "x" +
                     std::to_string(kWindow) + " window");
  }
  const std::int64_t n = x.h * x.w;
  std::vector<double> xd(n), yd(n), xx(n), yy(n), xy(n);
  for (std::int64_t i = 0; i < n; ++i) {
    xd[i] = x.px[i];
    yd[i] = y.px[i];
    xx[i] = xd[i] * xd[i];
    yy[i] = yd[i] * yd[i];
    xy[i] = xd[i] * yd[i];
  }
  const auto mu_x = filter_valid(xd, x.h, x.w);
  const auto mu_y = filter_valid(yd, x.h, x.w);
  const auto s_xx = filter_valid(xx, x.h, x.w);
  const auto s_yy = filter_valid(yy, x.h, x.w);
  const auto s_xy = filter_valid(xy, x.h, x.w);

  const double c1 = (kK1 * max_val) * (kK1 * max_val);
  const double c2 = (kK2 * max_val) * (kK2 * max_val);
  double acc = 0.0;
  for (std::size_t i = 0; i < mu_x.size(); ++i) {
    const double mx = mu_x[i], my = mu_y[i];
    const double var_x = s_xx[i] - mx * mx;
    const double var_y = s_yy[i] - my * my;
    const double cov = s_xy[i] - mx * my;
    const double num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
    const double den = (mx * mx + my * my + c1) * (var_x + var_y + c2);
    acc += num / den;
  }
  return acc / static_cast<double>(mu_x.size());
}

}  // namespace microsr

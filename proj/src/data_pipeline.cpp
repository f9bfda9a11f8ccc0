#include "microsr/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "microsr/image_io.hpp"
#include "microsr/resize.hpp"
#include "microsr/rng.hpp"

namespace microsr {

void validate_pair(const ImagePair& pair) {
  if (pair.hr.h != 2 * pair.lr.h || pair.hr.w != 2 * pair.lr.w) {
    throw DataError("pair '" + pair.id + "': HR size " + std::to_string(pair.hr.h) + "x" +
                    std::to_string(pair.hr.w) + " is not twice LR size " +
                    std::to_string(pair.lr.h) + "x" + std::to_string(pair.lr.w));
  }
  auto check = [&](const Image& img, const char* side) {
    for (float v : img.px) {
      if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
        throw DataError("pair '" + pair.id + "': " + side + " pixel out of [0,1] or non-finite");
      }
    }
  };
  check(pair.lr, "LR");
  check(pair.hr, "HR");
}

std::vector<PatchPair> extract_patches(const ImagePair& pair, std::int64_t patch_size,
                                       double overlap_fraction) {
  if (patch_size > std::min(pair.lr.h, pair.lr.w)) {
    throw DataError("patch size " + std::to_string(patch_size) + " exceeds LR image " +
                    std::to_string(pair.lr.h) + "x" + std::to_string(pair.lr.w));
  }
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) {
    throw DataError("overlap fraction must be in [0,1)");
  }
  const double stride_f = patch_size * (1.0 - overlap_fraction);
  const std::int64_t stride = static_cast<std::int64_t>(std::llround(stride_f));
  if (stride < 1 || std::abs(stride_f - static_cast<double>(stride)) > 1e-9) {
    throw DataError("overlap fraction " + std::to_string(overlap_fraction) +
                    " gives non-integer stride for patch size " + std::to_string(patch_size));
  }
  const std::int64_t rows = (pair.lr.h - patch_size) / stride + 1;
  const std::int64_t cols = (pair.lr.w - patch_size) / stride + 1;
  std::vector<PatchPair> out;
  out.reserve(static_cast<std::size_t>(rows * cols));
  for (std::int64_t pr = 0; pr < rows; ++pr) {
    for (std::int64_t pc = 0; pc < cols; ++pc) {
      PatchPair p;
      p.row = pr * stride;
      p.col = pc * stride;
      p.id = pair.id;
      p.lr_patch = crop(pair.lr, p.row, p.col, patch_size, patch_size);
      p.hr_patch = crop(pair.hr, 2 * p.row, 2 * p.col, 2 * patch_size, 2 * patch_size);
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::pair<PatchPair, AugmentationOutcome> augment(const PatchPair& pair, std::mt19937_64& rng) {
  if (pair.lr_patch.h != pair.lr_patch.w) throw DataError("augment: patches must be square");
  std::bernoulli_distribution coin(0.5);
  AugmentationOutcome outcome;
  outcome.transformed = coin(rng);
  if (!outcome.transformed) return {pair, outcome};
  outcome.hflip = coin(rng);
  outcome.vflip = coin(rng);
  outcome.rot90 = coin(rng);
  PatchPair out = pair;
  auto apply = [&](Image& img) {
    if (outcome.hflip) img = hflip(img);
    if (outcome.vflip) img = vflip(img);
    if (outcome.rot90) img = rot90ccw(img);
  };
  apply(out.lr_patch);
  apply(out.hr_patch);
  return {out, outcome};
}

std::vector<PatchPair> shuffle_pairs(std::vector<PatchPair> pairs, std::uint64_t seed) {
  auto rng = make_engine(seed);
  for (std::size_t i = pairs.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(pairs[i - 1], pairs[pick(rng)]);
  }
  return pairs;
}

ImagePair load_image_pair(const std::string& lr_path, const std::string& hr_path) {
  ImagePair pair;
  pair.lr = load_grayscale(lr_path).image;
  pair.hr = load_grayscale(hr_path).image;
  pair.id = lr_path;
  validate_pair(pair);
  return pair;
}

namespace {

// In-place separable box blur with clamped borders.
void box_blur(Image& img, std::int64_t radius, int passes) {
  if (radius < 1) return;
  Image tmp(img.h, img.w);
  for (int pass = 0; pass < passes; ++pass) {
    for (std::int64_t r = 0; r < img.h; ++r) {
      for (std::int64_t c = 0; c < img.w; ++c) {
        float acc = 0.0f;
        for (std::int64_t k = -radius; k <= radius; ++k) {
          acc += img.at(r, std::clamp(c + k, std::int64_t(0), img.w - 1));
        }
        tmp.at(r, c) = acc / static_cast<float>(2 * radius + 1);
      }
    }
    for (std::int64_t r = 0; r < img.h; ++r) {
      for (std::int64_t c = 0; c < img.w; ++c) {
        float acc = 0.0f;
        for (std::int64_t k = -radius; k <= radius; ++k) {
          acc += tmp.at(std::clamp(r + k, std::int64_t(0), img.h - 1), c);
        }
        img.at(r, c) = acc / static_cast<float>(2 * radius + 1);
      }
    }
  }
}

}  // namespace

std::vector<ImagePair> generate_synthetic_dataset(std::int64_t count, std::int64_t size,
                                                  double noise_sigma, std::uint64_t seed) {
  if (size % 2 != 0) throw DataError("synthetic dataset: size must be even");
  if (noise_sigma < 0.0) throw DataError("synthetic dataset: noise sigma must be >= 0");
  std::vector<ImagePair> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    auto rng = make_engine(mix_seed(seed, static_cast<std::uint64_t>(i)));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Band-limited background texture.
    Image hr(size, size);
    for (auto& v : hr.px) v = static_cast<float>(uni(rng));
    box_blur(hr, std::max<std::int64_t>(1, size / 64), 3);

    // Elliptical blobs mimicking fluorescent structures.
    std::uniform_int_distribution<int> nblobs_dist(6, 14);
    const int nblobs = nblobs_dist(rng);
    for (int b = 0; b < nblobs; ++b) {
      const double cy = uni(rng) * size;
      const double cx = uni(rng) * size;
      const double sy = size / 40.0 + uni(rng) * size / 12.0;
      const double sx = size / 40.0 + uni(rng) * size / 12.0;
      const double amp = 0.3 + 0.7 * uni(rng);
      const std::int64_t r0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(cy - 3 * sy));
      const std::int64_t r1 = std::min<std::int64_t>(size, static_cast<std::int64_t>(cy + 3 * sy));
      const std::int64_t c0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(cx - 3 * sx));
      const std::int64_t c1 = std::min<std::int64_t>(size, static_cast<std::int64_t>(cx + 3 * sx));
      for (std::int64_t r = r0; r < r1; ++r) {
        for (std::int64_t c = c0; c < c1; ++c) {
          const double dy = (r - cy) / sy;
          const double dx = (c - cx) / sx;
          hr.at(r, c) += static_cast<float>(amp * std::exp(-0.5 * (dy * dy + dx * dx)));
        }
      }
    }

    // Normalize into [0.02, 0.98] to leave headroom for noise.
    float lo = hr.px[0], hi = hr.px[0];
    for (float v : hr.px) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const float span = std::max(1e-6f, hi - lo);
    for (auto& v : hr.px) v = 0.02f + 0.96f * (v - lo) / span;

    ImagePair pair;
    pair.id = "synthetic_" + std::to_string(i);
    pair.hr = hr;
    pair.lr = box_downsample2x(hr);
    for (auto& v : pair.lr.px) {
      const double shot = std::sqrt(std::max(0.0, static_cast<double>(v)));
      const double noisy =
          v + noise_sigma * gauss(rng) + 0.5 * noise_sigma * shot * gauss(rng);
      v = static_cast<float>(std::clamp(noisy, 0.0, 1.0));
    }
    out.push_back(std::move(pair));
  }
  return out;
}

void write_manifest(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& entries) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open manifest for writing: " + path);
  for (const auto& [lr, hr] : entries) f << lr << '\t' << hr << '\n';
}

std::vector<std::pair<std::string, std::string>> read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open manifest: " + path);
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("manifest line " + std::to_string(lineno) + " is not lr<TAB>hr: " + path);
    }
    entries.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return entries;
}

}  // namespace microsr

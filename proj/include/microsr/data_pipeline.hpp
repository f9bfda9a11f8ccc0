#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "microsr/image.hpp"
#include "microsr/tensor.hpp"

namespace microsr {

// Coherent low/high resolution pair; the HR side is exactly twice the LR size.
struct ImagePair {
  Image lr;
  Image hr;
  std::string id;
};

// One training sample: a PxP LR patch with its 2Px2P HR counterpart, cut at
// (2*row, 2*col) in the HR image.
struct PatchPair {
  Image lr_patch;
  Image hr_patch;
  std::int64_t row = 0;  // origin in the source LR image
  std::int64_t col = 0;
  std::string id;
};

struct AugmentationOutcome {
  bool transformed = false;
  bool hflip = false;
  bool vflip = false;
  bool rot90 = false;
};

// Validates the 2x size invariant and pixel range of a pair.
void validate_pair(const ImagePair& pair);

// Cuts the overlapping patch grid. stride = patch_size * (1 - overlap_fraction)
// must come out as a positive integer; patches are emitted in row-major order.
std::vector<PatchPair> extract_patches(const ImagePair& pair, std::int64_t patch_size,
                                       double overlap_fraction);

// Paired stochastic augmentation: 50% chance of any transform at all, then
// independent 50% draws for hflip, vflip and rot90 (applied in that order,
// rotation counterclockwise, identically to both patches).
std::pair<PatchPair, AugmentationOutcome> augment(const PatchPair& pair, std::mt19937_64& rng);

// Seeded Fisher-Yates permutation of whole tuples.
std::vector<PatchPair> shuffle_pairs(std::vector<PatchPair> pairs, std::uint64_t seed);

template <typename T>
struct Batch {
  TensorPtr<T> lr;  // N x 1 x P x P
  TensorPtr<T> hr;  // N x 1 x 2P x 2P
  std::int64_t first_index = 0;  // position of the first pair in the epoch order
};

// Consecutive chunks of batch_size pairs; the final partial chunk is kept
// unless drop_last.
template <typename T>
std::vector<Batch<T>> make_batches(const std::vector<PatchPair>& pairs, std::int64_t batch_size,
                                   bool drop_last) {
  if (batch_size < 1) throw DataError("make_batches: batch_size must be >= 1");
  std::vector<Batch<T>> batches;
  for (std::size_t start = 0; start < pairs.size(); start += batch_size) {
    const std::size_t end = std::min(pairs.size(), start + static_cast<std::size_t>(batch_size));
    if (drop_last && end - start < static_cast<std::size_t>(batch_size)) break;
    const std::int64_t n = static_cast<std::int64_t>(end - start);
    const std::int64_t p = pairs[start].lr_patch.h;
    std::vector<T> lr_data(static_cast<std::size_t>(n * p * p));
    std::vector<T> hr_data(static_cast<std::size_t>(n * 4 * p * p));
    for (std::int64_t i = 0; i < n; ++i) {
      const auto& pp = pairs[start + i];
      for (std::int64_t k = 0; k < p * p; ++k)
        lr_data[i * p * p + k] = static_cast<T>(pp.lr_patch.px[k]);
      for (std::int64_t k = 0; k < 4 * p * p; ++k)
        hr_data[i * 4 * p * p + k] = static_cast<T>(pp.hr_patch.px[k]);
    }
    Batch<T> b;
    b.lr = make_tensor<T>(Shape{n, 1, p, p}, std::move(lr_data));
    b.hr = make_tensor<T>(Shape{n, 1, 2 * p, 2 * p}, std::move(hr_data));
    b.first_index = static_cast<std::int64_t>(start);
    batches.push_back(std::move(b));
  }
  return batches;
}

// Loads a pair from disk, normalizing to [0,1] and checking the 2x invariant.
ImagePair load_image_pair(const std::string& lr_path, const std::string& hr_path);

// Procedural stand-in for a real microscopy dataset: band-limited textures
// with blob structures as clean HR, and a noisy 2x box-downsample as LR.
// `size` is the HR side length; noise (Gaussian plus signal-dependent shot
// term) scales with noise_sigma, so sigma 0 gives the exact downsample.
std::vector<ImagePair> generate_synthetic_dataset(std::int64_t count, std::int64_t size,
                                                  double noise_sigma, std::uint64_t seed);

// Manifest: one `lr_path<TAB>hr_path` line per pair.
void write_manifest(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& entries);
std::vector<std::pair<std::string, std::string>> read_manifest(const std::string& path);

}  // namespace microsr

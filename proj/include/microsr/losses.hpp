#pragma once

#include <cmath>
#include <string>

#include "microsr/models.hpp"
#include "microsr/ops.hpp"

namespace microsr {

enum class Norm { l1, l2 };

inline Norm parse_norm(const std::string& s) {
  if (s == "l1") return Norm::l1;
  if (s == "l2") return Norm::l2;
  throw DataError("unknown norm '" + s + "' (want l1 or l2)");
}

struct LossWeights {
  double pixel = 1e-2;
  double perceptual = 1e-2;
  double adversarial = 1.0;
  Norm pixel_norm = Norm::l1;
  Norm perceptual_norm = Norm::l1;
  bool use_texture_instead_of_perceptual = false;

  void validate() const {
    if (pixel < 0 || perceptual < 0 || adversarial < 0) {
      throw DataError("loss weights must be >= 0");
    }
  }
};

// Mean absolute difference over all elements.
template <typename T>
TensorPtr<T> l1_loss(const TensorPtr<T>& x, const TensorPtr<T>& y) {
  detail::check_same_shape("l1_loss", x, y);
  return mean_all(abs_op(sub(x, y)));
}

// Mean squared difference over all elements.
template <typename T>
TensorPtr<T> l2_loss(const TensorPtr<T>& x, const TensorPtr<T>& y) {
  detail::check_same_shape("l2_loss", x, y);
  return mean_all(square(sub(x, y)));
}

template <typename T>
TensorPtr<T> norm_loss(const TensorPtr<T>& x, const TensorPtr<T>& y, Norm norm) {
  return norm == Norm::l1 ? l1_loss(x, y) : l2_loss(x, y);
}

// Pixel-wise loss on the frozen extractor's feature maps.
template <typename T>
TensorPtr<T> perceptual_loss(const FeatureExtractor<T>& extractor, const TensorPtr<T>& sr,
                             const TensorPtr<T>& hr, Norm norm) {
  detail::check_same_shape("perceptual_loss", sr, hr);
  return norm_loss(extractor.forward(sr), extractor.forward(hr), norm);
}

// Pixel-wise loss on the Gram matrices of the feature maps.
template <typename T>
TensorPtr<T> texture_loss(const FeatureExtractor<T>& extractor, const TensorPtr<T>& sr,
                          const TensorPtr<T>& hr, Norm norm) {
  detail::check_same_shape("texture_loss", sr, hr);
  return norm_loss(gram_matrix(extractor.forward(sr)), gram_matrix(extractor.forward(hr)), norm);
}

// Relativistic-average discriminator batch: per-class logits plus the batch
// mean of the opposite class. The means are plain scalars (no graph), which
// keeps each side's update decoupled from the opposite class mean.
template <typename T>
struct RadBatch {
  TensorPtr<T> real_logits;  // N x 1
  TensorPtr<T> fake_logits;  // N x 1
  T mean_real = T(0);
  T mean_fake = T(0);
};

template <typename T>
RadBatch<T> make_rad_batch(const TensorPtr<T>& real_logits, const TensorPtr<T>& fake_logits) {
  if (real_logits->size() < 1 || fake_logits->size() < 1) {
    throw DataError("rad batch: empty logits");
  }
  for (T v : real_logits->data)
    if (!std::isfinite(v)) throw NumericError("rad batch: non-finite real logit");
  for (T v : fake_logits->data)
    if (!std::isfinite(v)) throw NumericError("rad batch: non-finite fake logit");
  RadBatch<T> b;
  b.real_logits = real_logits;
  b.fake_logits = fake_logits;
  T sr = T(0), sf = T(0);
  for (T v : real_logits->data) sr += v;
  for (T v : fake_logits->data) sf += v;
  b.mean_real = sr / static_cast<T>(real_logits->size());
  b.mean_fake = sf / static_cast<T>(fake_logits->size());
  return b;
}

template <typename T>
struct RadLosses {
  TensorPtr<T> generator;      // L_G
  TensorPtr<T> discriminator;  // L_D
};

// With z_r = C(x_r) - E[x_f] and z_f = C(x_f) - E[x_r]:
//   L_G = mean softplus(z_r) + mean softplus(-z_f)
//   L_D = mean softplus(-z_r) + mean softplus(z_f)
// This is the one-sided binary-cross-entropy form of the relativistic
// average losses; it equals the -log sigmoid expressions but stays finite
// for logits of any magnitude.
template <typename T>
RadLosses<T> rad_losses(const RadBatch<T>& batch) {
  auto z_r = add_scalar(batch.real_logits, -batch.mean_fake);
  auto z_f = add_scalar(batch.fake_logits, -batch.mean_real);
  RadLosses<T> out;
  out.generator = add(mean_all(softplus(z_r)), mean_all(softplus(neg(z_f))));
  out.discriminator = add(mean_all(softplus(neg(z_r))), mean_all(softplus(z_f)));
  return out;
}

template <typename T>
struct GeneratorLoss {
  TensorPtr<T> total;
  // Unweighted term values for logging.
  T pixel = T(0);
  T perceptual = T(0);
  T adversarial = T(0);
};

// weights.pixel * pixel + weights.perceptual * (perceptual or texture)
// + weights.adversarial * L_G, with the unweighted terms reported.
template <typename T>
GeneratorLoss<T> total_generator_loss(const LossWeights& weights, const TensorPtr<T>& sr,
                                      const TensorPtr<T>& hr, const RadBatch<T>& rad,
                                      const FeatureExtractor<T>& extractor) {
  weights.validate();
  GeneratorLoss<T> out;
  auto pix = norm_loss(sr, hr, weights.pixel_norm);
  auto perc = weights.use_texture_instead_of_perceptual
                  ? texture_loss(extractor, sr, hr, weights.perceptual_norm)
                  : perceptual_loss(extractor, sr, hr, weights.perceptual_norm);
  auto adv = rad_losses(rad).generator;
  out.pixel = pix->item();
  out.perceptual = perc->item();
  out.adversarial = adv->item();
  out.total = add(add(scale(pix, static_cast<T>(weights.pixel)),
                      scale(perc, static_cast<T>(weights.perceptual))),
                  scale(adv, static_cast<T>(weights.adversarial)));
  return out;
}

}  // namespace microsr

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "microsr/data_pipeline.hpp"
#include "microsr/metrics.hpp"
#include "microsr/resize.hpp"

namespace microsr {

struct EvalRow {
  std::string id;
  double psnr_bicubic = 0.0;
  double ssim_bicubic = 0.0;
  double psnr_model = 0.0;
  double ssim_model = 0.0;
};

struct EvalSummary {
  std::vector<EvalRow> rows;
  double mean_psnr_bicubic = 0.0;
  double mean_ssim_bicubic = 0.0;
  double mean_psnr_model = 0.0;
  double mean_ssim_model = 0.0;
};

// Scores the in-repo bicubic baseline and a restorer callback against the HR
// ground truth of every pair.
inline EvalSummary evaluate_pairs(const std::vector<ImagePair>& pairs,
                                  const std::function<Image(const Image&)>& restore) {
  if (pairs.empty()) throw DataError("evaluate: no pairs");
  EvalSummary s;
  for (const auto& p : pairs) {
    EvalRow row;
    row.id = p.id;
    const Image bic = bicubic_upsample2x(p.lr);
    const Image out = restore(p.lr);
    row.psnr_bicubic = psnr(bic, p.hr);
    row.ssim_bicubic = ssim(bic, p.hr);
    row.psnr_model = psnr(out, p.hr);
    row.ssim_model = ssim(out, p.hr);
    s.mean_psnr_bicubic += row.psnr_bicubic;
    s.mean_ssim_bicubic += row.ssim_bicubic;
    s.mean_psnr_model += row.psnr_model;
    s.mean_ssim_model += row.ssim_model;
    s.rows.push_back(row);
  }
  const double n = static_cast<double>(s.rows.size());
  s.mean_psnr_bicubic /= n;
  s.mean_ssim_bicubic /= n;
  s.mean_psnr_model /= n;
  s.mean_ssim_model /= n;
  return s;
}

}  // namespace microsr

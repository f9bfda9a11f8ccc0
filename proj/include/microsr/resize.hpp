#pragma once

#include "microsr/image.hpp"

namespace microsr {

// 2x box downsample (mean of each 2x2 block). Requires even dims.
Image box_downsample2x(const Image& img);

// 2x nearest-neighbor upsample.
Image upsample_nearest2x(const Image& img);

// 2x bicubic upsample with the Catmull-Rom-style kernel (a = -0.5) and
// clamped borders. Used for the evaluation baseline and montage panels.
Image bicubic_upsample2x(const Image& img);

}  // namespace microsr

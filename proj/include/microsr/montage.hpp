#pragma once

#include <vector>

#include "microsr/image.hpp"

namespace microsr {

// Side-by-side comparison figure: one row of equally sized panels, and a
// second row with a 4x-zoomed center crop of each panel. Output dims are
// (2 * panel_h) x (panels * panel_w).
Image make_montage(const std::vector<Image>& panels);

}  // namespace microsr

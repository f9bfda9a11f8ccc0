#include "microsr/montage.hpp"

namespace microsr {

Image make_montage(const std::vector<Image>& panels) {
  if (panels.empty()) throw DataError("montage: no panels");
  const std::int64_t ph = panels[0].h, pw = panels[0].w;
  for (const auto& p : panels) {
    if (p.h != ph || p.w != pw) throw DataError("montage: panels must share one size");
  }
  Image out(2 * ph, static_cast<std::int64_t>(panels.size()) * pw);
  for (std::size_t i = 0; i < panels.size(); ++i) {
    const std::int64_t x0 = static_cast<std::int64_t>(i) * pw;
    for (std::int64_t r = 0; r < ph; ++r)
      for (std::int64_t c = 0; c < pw; ++c) out.at(r, x0 + c) = panels[i].at(r, c);
    // Center crop of a quarter of each side, blown up 4x nearest.
    const std::int64_t ch = ph / 4, cw = pw / 4;
    const Image zoom = crop(panels[i], (ph - ch) / 2, (pw - cw) / 2, ch, cw);
    for (std::int64_t r = 0; r < 4 * ch; ++r)
      for (std::int64_t c = 0; c < 4 * cw; ++c)
        out.at(ph + r, x0 + c) = zoom.at(r / 4, c / 4);
  }
  return out;
}

}  // namespace microsr

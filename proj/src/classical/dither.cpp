#include <algorithm>
#include <vector>

#include "colorcnn/classical/classical.hpp"
#include "colorcnn/core/check.hpp"

namespace colorcnn::classical {

namespace {

int nearest_color(const img::Palette& palette, const float* px) {
  int best = 0;
  float best_d = 1e30f;
  for (int i = 0; i < palette.size(); ++i) {
    const auto& c = palette.colors[i];
    float dr = px[0] - c[0], dg = px[1] - c[1], db = px[2] - c[2];
    float d = dr * dr + dg * dg + db * db;
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace

img::QuantResult floyd_steinberg_dither(const img::RgbImage& image,
                                        const img::Palette& palette) {
  COLORCNN_CHECK(palette.size() >= 1, "palette must be non-empty");
  COLORCNN_CHECK(image.h >= 1 && image.w >= 1, "image must be non-empty");

  // working copy accumulates diffused error, clamped to [0,1]
  std::vector<float> work(image.px);
  img::IndexMap index_map(image.h, image.w);
  const int h = image.h, w = image.w;

  auto diffuse = [&](int y, int x, const float err[3], float weight) {
    if (y < 0 || y >= h || x < 0 || x >= w) return;
    float* p = work.data() + (size_t(y) * w + x) * 3;
    for (int c = 0; c < 3; ++c)
      p[c] = std::clamp(p[c] + err[c] * weight, 0.0f, 1.0f);
  };

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float* p = work.data() + (size_t(y) * w + x) * 3;
      int pick = nearest_color(palette, p);
      index_map.at(y, x) = pick;
      const auto& c = palette.colors[pick];
      float err[3] = {p[0] - c[0], p[1] - c[1], p[2] - c[2]};
      diffuse(y, x + 1, err, 7.0f / 16.0f);
      diffuse(y + 1, x - 1, err, 3.0f / 16.0f);
      diffuse(y + 1, x, err, 5.0f / 16.0f);
      diffuse(y + 1, x + 1, err, 1.0f / 16.0f);
    }
  }
  return img::finalize_quant_result(index_map, palette);
}

}  // namespace colorcnn::classical

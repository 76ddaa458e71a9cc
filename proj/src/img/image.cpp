#include "colorcnn/img/image.hpp"

#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "colorcnn/core/check.hpp"
#include "colorcnn/img/png_codec.hpp"

namespace colorcnn::img {

RgbImage palette_lookup(const IndexMap& m, const Palette& t) {
  RgbImage out(m.h, m.w);
  for (size_t i = 0; i < m.idx.size(); ++i) {
    const auto& c = t.colors[m.idx[i]];
    out.px[i * 3 + 0] = c[0];
    out.px[i * 3 + 1] = c[1];
    out.px[i * 3 + 2] = c[2];
  }
  return out;
}

void validate(const RgbImage& img) {
  COLORCNN_CHECK(img.h >= 1 && img.w >= 1, "image must be non-empty");
  COLORCNN_CHECK(img.px.size() == size_t(img.h) * img.w * 3, "pixel buffer size mismatch");
  for (float v : img.px)
    COLORCNN_CHECK(v >= 0.0f && v <= 1.0f, "channel value outside [0,1]");
}

void validate(const IndexMap& m, int palette_size) {
  COLORCNN_CHECK(m.idx.size() == size_t(m.h) * m.w, "index buffer size mismatch");
  for (int32_t v : m.idx)
    COLORCNN_CHECK(v >= 0 && v < palette_size, "index outside [0, palette size)");
}

int count_distinct_colors(const RgbImage& image) {
  std::unordered_set<uint32_t> seen;
  for (size_t i = 0; i < image.pixel_count(); ++i) {
    const float* p = image.px.data() + i * 3;
    uint32_t key = uint32_t(to_u8(p[0])) << 16 | uint32_t(to_u8(p[1])) << 8 |
                   uint32_t(to_u8(p[2]));
    seen.insert(key);
  }
  return int(seen.size());
}

double palette_entropy(const IndexMap& m) {
  if (m.idx.empty()) return 0.0;
  std::unordered_map<int32_t, int64_t> counts;
  for (int32_t v : m.idx) counts[v]++;
  double n = double(m.idx.size());
  double h = 0.0;
  for (const auto& [v, c] : counts) {
    double p = double(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

double measure_bpp(size_t encoded_bytes, int h, int w) {
  COLORCNN_CHECK(h > 0 && w > 0, "measure_bpp needs a non-empty image");
  return double(encoded_bytes) * 8.0 / (double(h) * double(w));
}

QuantResult finalize_quant_result(const IndexMap& m, const Palette& t) {
  QuantResult r;
  r.index_map = m;
  r.palette = t;
  r.image = palette_lookup(m, t);
  r.distinct_colors = count_distinct_colors(r.image);
  auto png = encode_indexed_png(m, t);
  r.bits_per_pixel = measure_bpp(png.size(), m.h, m.w);
  return r;
}

}  // namespace colorcnn::img

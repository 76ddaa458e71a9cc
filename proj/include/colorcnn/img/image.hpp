#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace colorcnn::img {

// H x W x 3 interleaved RGB, channels in [0,1].
struct RgbImage {
  int h = 0;
  int w = 0;
  std::vector<float> px;  // size h*w*3

  RgbImage() = default;
  RgbImage(int height, int width) : h(height), w(width), px(size_t(height) * width * 3, 0.0f) {}

  float* at(int y, int x) { return px.data() + (size_t(y) * w + x) * 3; }
  const float* at(int y, int x) const { return px.data() + (size_t(y) * w + x) * 3; }
  size_t pixel_count() const { return size_t(h) * w; }
};

struct Palette {
  std::vector<std::array<float, 3>> colors;

  int size() const { return int(colors.size()); }
};

struct IndexMap {
  int h = 0;
  int w = 0;
  std::vector<int32_t> idx;  // size h*w, values in [0, palette size)

  IndexMap() = default;
  IndexMap(int height, int width) : h(height), w(width), idx(size_t(height) * width, 0) {}

  int32_t& at(int y, int x) { return idx[size_t(y) * w + x]; }
  int32_t at(int y, int x) const { return idx[size_t(y) * w + x]; }
};

struct QuantResult {
  RgbImage image;
  Palette palette;
  IndexMap index_map;
  int distinct_colors = 0;
  double bits_per_pixel = 0.0;
};

// image built by palette lookup: out(y,x) = palette[index_map(y,x)]
RgbImage palette_lookup(const IndexMap& m, const Palette& t);

// validates invariants, throws on violation
void validate(const RgbImage& img);
void validate(const IndexMap& m, int palette_size);

int count_distinct_colors(const RgbImage& image);

// Shannon entropy (bits) of the empirical index distribution
double palette_entropy(const IndexMap& m);

double measure_bpp(size_t encoded_bytes, int h, int w);

// rounds [0,1] real to the 8-bit grid
inline uint8_t to_u8(float v) {
  float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return uint8_t(c * 255.0f + 0.5f);
}
inline float from_u8(uint8_t v) { return float(v) / 255.0f; }

// fills image + index_map + palette into a QuantResult and computes
// distinct_colors and the indexed-PNG bit rate
QuantResult finalize_quant_result(const IndexMap& m, const Palette& t);

}  // namespace colorcnn::img

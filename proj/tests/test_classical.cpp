#include <doctest.h>

#include <cmath>
#include <set>

#include "colorcnn/classical/classical.hpp"
#include "colorcnn/core/rng.hpp"
#include "colorcnn/img/image.hpp"

using namespace colorcnn;

namespace {

img::RgbImage random_image(Rng& rng, int h, int w) {
  img::RgbImage im(h, w);
  for (auto& v : im.px) v = float(rng.uniform());
  return im;
}

img::RgbImage gradient_image(int h, int w) {
  img::RgbImage im(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float* p = im.at(y, x);
      p[0] = float(x) / float(w - 1);
      p[1] = float(y) / float(h - 1);
      p[2] = 0.25f;
    }
  return im;
}

void check_result(const img::QuantResult& qr, const img::RgbImage& src, int max_colors) {
  CHECK(qr.palette.size() >= 1);
  CHECK(qr.palette.size() <= max_colors);
  CHECK(qr.distinct_colors <= max_colors);
  CHECK(qr.image.h == src.h);
  CHECK(qr.image.w == src.w);
  img::validate(qr.index_map, qr.palette.size());
  img::validate(qr.image);
  CHECK(qr.bits_per_pixel > 0.0);
}

}  // namespace

TEST_CASE("median cut splits a two-cluster row at the gap") {
  img::RgbImage im(1, 4);
  const float reds[4] = {0.0f, 0.2f, 0.8f, 1.0f};
  for (int x = 0; x < 4; ++x) im.at(0, x)[0] = reds[x];
  img::QuantResult qr = classical::median_cut(im, 2);
  REQUIRE(qr.palette.size() == 2);
  // left pair averages to 0.1, right pair to 0.9
  CHECK(qr.image.at(0, 0)[0] == doctest::Approx(0.1));
  CHECK(qr.image.at(0, 1)[0] == doctest::Approx(0.1));
  CHECK(qr.image.at(0, 2)[0] == doctest::Approx(0.9));
  CHECK(qr.image.at(0, 3)[0] == doctest::Approx(0.9));
  CHECK(qr.image.at(0, 0)[1] == doctest::Approx(0.0));
}

TEST_CASE("median cut splits along the channel with the widest range") {
  img::RgbImage im(1, 4);
  // green spans 0..1, red only 0..0.2, so the cut groups by green
  const float px[4][3] = {{0.0f, 0.0f, 0.f}, {0.2f, 0.1f, 0.f},
                          {0.0f, 0.9f, 0.f}, {0.2f, 1.0f, 0.f}};
  for (int x = 0; x < 4; ++x)
    for (int c = 0; c < 3; ++c) im.at(0, x)[c] = px[x][c];
  img::QuantResult qr = classical::median_cut(im, 2);
  REQUIRE(qr.palette.size() == 2);
  CHECK(qr.index_map.at(0, 0) == qr.index_map.at(0, 1));
  CHECK(qr.index_map.at(0, 2) == qr.index_map.at(0, 3));
  CHECK(qr.index_map.at(0, 0) != qr.index_map.at(0, 2));
  CHECK(qr.image.at(0, 0)[1] == doctest::Approx(0.05));
  CHECK(qr.image.at(0, 2)[1] == doctest::Approx(0.95));
}

TEST_CASE("median cut copes with a pile-up at the median value") {
  img::RgbImage im(8, 8);
  Rng rng(17);
  for (int j = 0; j < 64; ++j) {
    float v = j < 40 ? 0.5f : float(rng.uniform());
    float* p = im.at(j / 8, j % 8);
    p[0] = v;
    p[1] = v * 0.5f;
    p[2] = 0.3f;
  }
  for (int k : {2, 4, 8}) {
    img::QuantResult qr = classical::median_cut(im, k);
    check_result(qr, im, k);
  }
}

TEST_CASE("fewer input colors than requested yields a shorter palette") {
  img::RgbImage im(4, 4);
  for (int j = 0; j < 16; ++j) im.at(j / 4, j % 4)[0] = j % 2 ? 1.0f : 0.0f;
  img::QuantResult mc = classical::median_cut(im, 8);
  CHECK(mc.palette.size() <= 2);
  CHECK(mc.distinct_colors == 2);
  img::QuantResult oc = classical::octree_quantize(im, 8);
  CHECK(oc.distinct_colors == 2);
}

TEST_CASE("octree preserves images that already fit the budget") {
  img::RgbImage im(4, 4);
  const float colors[3][3] = {{0.1f, 0.2f, 0.3f}, {0.9f, 0.1f, 0.6f}, {0.4f, 0.8f, 0.2f}};
  for (int j = 0; j < 16; ++j)
    for (int c = 0; c < 3; ++c) im.at(j / 4, j % 4)[c] = colors[j % 3][c];
  img::QuantResult qr = classical::octree_quantize(im, 4);
  CHECK(qr.distinct_colors == 3);
  for (size_t i = 0; i < im.px.size(); ++i)
    CHECK(img::to_u8(qr.image.px[i]) == img::to_u8(im.px[i]));
}

TEST_CASE("dithering against an exact palette is the identity") {
  img::RgbImage im(4, 4);
  for (int j = 0; j < 16; ++j) {
    float v = j % 2 ? 1.0f : 0.0f;
    float* p = im.at(j / 4, j % 4);
    p[0] = p[1] = p[2] = v;
  }
  img::Palette pal;
  pal.colors = {{0, 0, 0}, {1, 1, 1}};
  img::QuantResult qr = classical::floyd_steinberg_dither(im, pal);
  for (size_t i = 0; i < im.px.size(); ++i) CHECK(qr.image.px[i] == im.px[i]);
}

TEST_CASE("dithering a mid gray with black and white preserves the mean") {
  img::RgbImage im(32, 32);
  for (auto& v : im.px) v = 0.5f;
  img::Palette pal;
  pal.colors = {{0, 0, 0}, {1, 1, 1}};
  img::QuantResult qr = classical::floyd_steinberg_dither(im, pal);
  double mean = 0;
  for (float v : qr.image.px) mean += double(v);
  mean /= double(qr.image.px.size());
  CHECK(mean == doctest::Approx(0.5).epsilon(0.05));
  CHECK(qr.distinct_colors == 2);
}

TEST_CASE("dither error diffusion matches a hand-run 1x3 case") {
  // palette {0,1}; row 0.6, 0.6, 0.6:
  //   x=0 -> 1, err -0.4, x=1 gets 0.6 - 0.4*7/16 = 0.425 -> 0, err 0.425
  //   x=2 gets 0.6 + 0.425*7/16 = 0.7859 -> 1
  img::RgbImage im(1, 3);
  for (int x = 0; x < 3; ++x) im.at(0, x)[0] = im.at(0, x)[1] = im.at(0, x)[2] = 0.6f;
  img::Palette pal;
  pal.colors = {{0, 0, 0}, {1, 1, 1}};
  img::QuantResult qr = classical::floyd_steinberg_dither(im, pal);
  CHECK(qr.image.at(0, 0)[0] == 1.0f);
  CHECK(qr.image.at(0, 1)[0] == 0.0f);
  CHECK(qr.image.at(0, 2)[0] == 1.0f);
}

TEST_CASE("all classical methods respect every bit depth budget") {
  Rng rng(23);
  std::vector<img::RgbImage> images;
  for (int i = 0; i < 6; ++i) images.push_back(random_image(rng, 16, 16));
  images.push_back(gradient_image(24, 16));
  for (const auto& im : images) {
    for (int d = 1; d <= 6; ++d) {
      const int k = 1 << d;
      check_result(classical::median_cut(im, k), im, k);
      check_result(classical::octree_quantize(im, k), im, k);
      img::Palette pal = classical::median_cut(im, k).palette;
      check_result(classical::floyd_steinberg_dither(im, pal), im, k);
    }
  }
}

TEST_CASE("classical quantizers are deterministic") {
  Rng rng(31);
  img::RgbImage im = random_image(rng, 20, 20);
  for (int k : {2, 8, 64}) {
    auto a = classical::median_cut(im, k);
    auto b = classical::median_cut(im, k);
    CHECK(a.index_map.idx == b.index_map.idx);
    CHECK(a.palette.colors == b.palette.colors);
    auto c = classical::octree_quantize(im, k);
    auto d = classical::octree_quantize(im, k);
    CHECK(c.index_map.idx == d.index_map.idx);
    CHECK(c.palette.colors == d.palette.colors);
  }
}

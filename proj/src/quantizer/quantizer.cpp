#include "colorcnn/quantizer/quantizer.hpp"

namespace colorcnn::quant {

Tensor<float> image_to_tensor(const img::RgbImage& im) {
  Tensor<float> x({1, 3, im.h, im.w});
  const size_t plane = size_t(im.h) * im.w;
  for (size_t j = 0; j < plane; ++j)
    for (int r = 0; r < 3; ++r) x.data[size_t(r) * plane + j] = im.px[j * 3 + r];
  return x;
}

img::RgbImage tensor_to_image(const Tensor<float>& x, int n) {
  const int h = x.dim(2), w = x.dim(3);
  img::RgbImage im(h, w);
  const size_t plane = size_t(h) * w;
  for (size_t j = 0; j < plane; ++j)
    for (int r = 0; r < 3; ++r)
      im.px[j * 3 + r] = x.data[(size_t(n) * 3 + r) * plane + j];
  return im;
}

Tensor<float> forward_prob_map(models::UNet<float>& net, const img::RgbImage& im) {
  img::validate(im);
  return net.forward(image_to_tensor(im), false);
}

HardPassResult hard_pass(const Tensor<float>& x, const Tensor<float>& m) {
  HardPassResult r;
  r.index_map = argmax_index_map(m);
  hard_palette(x, r.index_map, m.dim(1), r.palette, r.empty_entries, &m);
  r.image = palette_lookup(r.palette, r.index_map);
  return r;
}

img::QuantResult hard_quantize(models::UNet<float>& net, const img::RgbImage& im,
                               const QuantizerConfig& cfg) {
  validate(cfg);
  COLORCNN_CHECK(net.out_channels() == cfg.colors(),
                 "network emits " << net.out_channels() << " entries, config wants "
                                  << cfg.colors());
  Tensor<float> x = image_to_tensor(im);
  Tensor<float> m = net.forward(x, false);
  HardPassResult hp = hard_pass(x, m);
  img::Palette pal;
  pal.colors.resize(size_t(cfg.colors()));
  for (int c = 0; c < cfg.colors(); ++c)
    for (int r = 0; r < 3; ++r) pal.colors[size_t(c)][size_t(r)] = hp.palette.data[size_t(c) * 3 + r];
  img::IndexMap idx(im.h, im.w);
  idx.idx.assign(hp.index_map.data.begin(), hp.index_map.data.end());
  return img::finalize_quant_result(idx, pal);
}

}  // namespace colorcnn::quant

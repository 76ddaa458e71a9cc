#include <algorithm>
#include <cmath>
#include <numeric>

#include "colorcnn/nn/loss.hpp"
#include "colorcnn/nn/optim.hpp"
#include "colorcnn/zoo/zoo.hpp"

namespace colorcnn::zoo {

namespace {

nn::Tensor<float> to_tensor(const img::RgbImage& im) {
  nn::Tensor<float> x({1, 3, im.h, im.w});
  const size_t plane = size_t(im.h) * im.w;
  for (size_t j = 0; j < plane; ++j)
    for (int c = 0; c < 3; ++c) x.data[size_t(c) * plane + j] = im.px[j * 3 + c];
  return x;
}

}  // namespace

std::vector<float> resize_bilinear(const std::vector<float>& src, int sh, int sw,
                                   int dh, int dw) {
  std::vector<float> dst(size_t(dh) * dw);
  const float sy = float(sh) / float(dh), sx = float(sw) / float(dw);
  for (int y = 0; y < dh; ++y) {
    float fy = (float(y) + 0.5f) * sy - 0.5f;
    int y0 = int(std::floor(fy));
    float wy = fy - float(y0);
    int y1 = std::min(y0 + 1, sh - 1);
    y0 = std::max(y0, 0);
    for (int x = 0; x < dw; ++x) {
      float fx = (float(x) + 0.5f) * sx - 0.5f;
      int x0 = int(std::floor(fx));
      float wx = fx - float(x0);
      int x1 = std::min(x0 + 1, sw - 1);
      x0 = std::max(x0, 0);
      float top = src[size_t(y0) * sw + x0] * (1 - wx) + src[size_t(y0) * sw + x1] * wx;
      float bot = src[size_t(y1) * sw + x0] * (1 - wx) + src[size_t(y1) * sw + x1] * wx;
      dst[size_t(y) * dw + x] = top * (1 - wy) + bot * wy;
    }
  }
  return dst;
}

std::vector<float> class_activation_map(models::Classifier<float>& clf,
                                        const img::RgbImage& im, int class_id,
                                        const data::ChannelStats& stats,
                                        const nn::Tensor<float>* probe_weight) {
  COLORCNN_CHECK(class_id >= 0 && class_id < clf.num_classes(),
                 "class id " << class_id << " out of range");
  const nn::Tensor<float>* w = clf.cam_weight();
  if (!w) w = probe_weight;
  COLORCNN_CHECK(w, "architecture has no pooled linear head; train a probe first");
  COLORCNN_CHECK(w->dim(0) == clf.num_classes() && w->dim(1) == clf.feature_channels(),
                 "weight shape does not match classifier features");

  nn::Tensor<float> x = to_tensor(im);
  data::normalize_batch(x, stats, 1.0f);
  clf.forward(x, false);
  const nn::Tensor<float>& feats = clf.cam_features();
  const int fch = feats.dim(1), fh = feats.dim(2), fw = feats.dim(3);
  const size_t plane = size_t(fh) * fw;

  std::vector<float> cam(plane, 0.0f);
  const float* wr = w->ptr() + size_t(class_id) * fch;
  for (int c = 0; c < fch; ++c) {
    const float* fp = feats.ptr() + size_t(c) * plane;
    for (size_t j = 0; j < plane; ++j) cam[j] += wr[c] * fp[j];
  }
  std::vector<float> up = resize_bilinear(cam, fh, fw, im.h, im.w);
  auto [mn, mx] = std::minmax_element(up.begin(), up.end());
  float lo = *mn, span = *mx - *mn;
  if (span <= 0) {
    std::fill(up.begin(), up.end(), 0.0f);
  } else {
    for (float& v : up) v = (v - lo) / span;
  }
  return up;
}

nn::Tensor<float> train_cam_probe(models::Classifier<float>& clf,
                                  const data::Dataset& train,
                                  const data::ChannelStats& stats, int epochs,
                                  uint64_t seed) {
  COLORCNN_CHECK(train.count() > 0, "empty probe training set");
  Rng rng(seed);
  nn::Linear<float> probe(clf.feature_channels(), clf.num_classes());
  probe.init(rng);
  nn::GlobalAvgPool<float> gap;
  nn::SgdMomentum<float> sgd(probe.params(), 0.5f, 5e-4f);
  const int batch = 128;
  const int64_t steps_per_epoch = (train.count() + batch - 1) / batch;
  nn::OneCycleSchedule sched(0.1, steps_per_epoch * epochs);

  std::vector<int64_t> order(size_t(train.count()));
  std::iota(order.begin(), order.end(), int64_t(0));
  nn::Tensor<float> x;
  std::vector<int> y;
  int64_t step = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    Rng perm = rng.fork(uint64_t(epoch) + 1);
    perm.shuffle(order.begin(), order.end());
    for (int64_t at = 0; at < train.count(); at += batch, ++step) {
      int n = int(std::min<int64_t>(batch, train.count() - at));
      data::fill_batch(train, order.data() + at, n, x, &y);
      data::normalize_batch(x, stats, 1.0f);
      clf.forward(x, false);
      nn::Tensor<float> pooled = gap.forward(clf.cam_features(), false);
      probe.zero_grad();
      nn::Tensor<float> logits = probe.forward(pooled, false);
      auto ce = nn::softmax_cross_entropy(logits, y);
      COLORCNN_CHECK(std::isfinite(ce.loss), "non-finite probe loss at step " << step);
      probe.backward(ce.grad);
      sgd.step(float(sched.lr(step)));
    }
  }
  return probe.weight();
}

double top_fraction_iou(const std::vector<float>& a, const std::vector<float>& b,
                        double fraction) {
  COLORCNN_CHECK(a.size() == b.size() && !a.empty(), "maps must match and be non-empty");
  COLORCNN_CHECK(fraction > 0 && fraction <= 1, "fraction must be in (0,1]");
  const size_t k = std::max<size_t>(1, size_t(std::ceil(fraction * double(a.size()))));
  auto top_mask = [&](const std::vector<float>& m) {
    std::vector<size_t> idx(m.size());
    std::iota(idx.begin(), idx.end(), size_t(0));
    std::stable_sort(idx.begin(), idx.end(),
                     [&](size_t i, size_t j) { return m[i] > m[j]; });
    std::vector<uint8_t> mask(m.size(), 0);
    for (size_t i = 0; i < k; ++i) mask[idx[i]] = 1;
    return mask;
  };
  auto ma = top_mask(a), mb = top_mask(b);
  size_t inter = 0;
  for (size_t i = 0; i < ma.size(); ++i) inter += size_t(ma[i] & mb[i]);
  return double(inter) / double(2 * k - inter);
}

}  // namespace colorcnn::zoo

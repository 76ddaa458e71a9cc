#pragma once

#include <memory>

#include "colorcnn/nn/layers.hpp"

namespace colorcnn::models {

using nn::Tensor;

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  const int h = a.dim(2), w = a.dim(3);
  COLORCNN_CHECK(b.dim(0) == n && b.dim(2) == h && b.dim(3) == w,
                 "concat shape mismatch");
  Tensor<T> y({n, ca + cb, h, w});
  const size_t plane = size_t(h) * w;
  for (int i = 0; i < n; ++i) {
    std::copy(a.ptr() + size_t(i) * ca * plane, a.ptr() + size_t(i + 1) * ca * plane,
              y.ptr() + size_t(i) * (ca + cb) * plane);
    std::copy(b.ptr() + size_t(i) * cb * plane, b.ptr() + size_t(i + 1) * cb * plane,
              y.ptr() + (size_t(i) * (ca + cb) + ca) * plane);
  }
  return y;
}

template <typename T>
void split_channels(const Tensor<T>& d, int ca, Tensor<T>& da, Tensor<T>& db) {
  const int n = d.dim(0), c = d.dim(1), h = d.dim(2), w = d.dim(3);
  const int cb = c - ca;
  da = Tensor<T>({n, ca, h, w});
  db = Tensor<T>({n, cb, h, w});
  const size_t plane = size_t(h) * w;
  for (int i = 0; i < n; ++i) {
    std::copy(d.ptr() + size_t(i) * c * plane, d.ptr() + (size_t(i) * c + ca) * plane,
              da.ptr() + size_t(i) * ca * plane);
    std::copy(d.ptr() + (size_t(i) * c + ca) * plane, d.ptr() + size_t(i + 1) * c * plane,
              db.ptr() + size_t(i) * cb * plane);
  }
}

template <typename T>
std::unique_ptr<nn::Sequential<T>> make_double_conv(int in, int out) {
  auto s = std::make_unique<nn::Sequential<T>>();
  s->template emplace<nn::Conv2d<T>>(in, out, 3, 1, 1, false);
  s->template emplace<nn::BatchNorm2d<T>>(out);
  s->template emplace<nn::ReLU<T>>();
  s->template emplace<nn::Conv2d<T>>(out, out, 3, 1, 1, false);
  s->template emplace<nn::BatchNorm2d<T>>(out);
  s->template emplace<nn::ReLU<T>>();
  return s;
}

// encoder-decoder with skip connections; three 2x downsampling stages, so
// input height/width must be divisible by 8. The head is two 1x1 convolutions
// with a channel softmax at the end, giving a per-pixel distribution over
// out_ch entries at full input resolution.
template <typename T>
class UNet : public nn::Module<T> {
 public:
  UNet(int out_ch, int base = 64, int in_ch = 3)
      : out_ch_(out_ch), base_(base),
        enc1_(make_double_conv<T>(in_ch, base)),
        enc2_(make_double_conv<T>(base, base * 2)),
        enc3_(make_double_conv<T>(base * 2, base * 4)),
        bott_(make_double_conv<T>(base * 4, base * 8)),
        dec3_(make_double_conv<T>(base * 8 + base * 4, base * 4)),
        dec2_(make_double_conv<T>(base * 4 + base * 2, base * 2)),
        dec1_(make_double_conv<T>(base * 2 + base, base)),
        head1_(base, base * 4, 1), head2_(base * 4, out_ch, 1) {}

  Tensor<T> forward(const Tensor<T>& x, bool train) override {
    COLORCNN_CHECK(x.dim(2) % 8 == 0 && x.dim(3) % 8 == 0,
                   "input size " << x.dim(2) << "x" << x.dim(3)
                                 << " not divisible by 8");
    Tensor<T> e1 = enc1_->forward(x, train);
    Tensor<T> e2 = enc2_->forward(pool1_.forward(e1, train), train);
    Tensor<T> e3 = enc3_->forward(pool2_.forward(e2, train), train);
    Tensor<T> b = bott_->forward(pool3_.forward(e3, train), train);
    Tensor<T> d3 = dec3_->forward(concat_channels(up3_.forward(b, train), e3), train);
    Tensor<T> d2 = dec2_->forward(concat_channels(up2_.forward(d3, train), e2), train);
    Tensor<T> d1 = dec1_->forward(concat_channels(up1_.forward(d2, train), e1), train);
    Tensor<T> h = head2_.forward(head_relu_.forward(head1_.forward(d1, train), train), train);
    return softmax_.forward(h, train);
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> g = softmax_.backward(dy);
    g = head1_.backward(head_relu_.backward(head2_.backward(g)));
    Tensor<T> gu, skip1, skip2, skip3;
    split_channels(dec1_->backward(g), base_ * 2, gu, skip1);
    split_channels(dec2_->backward(up1_.backward(gu)), base_ * 4, gu, skip2);
    split_channels(dec3_->backward(up2_.backward(gu)), base_ * 8, gu, skip3);
    g = bott_->backward(up3_.backward(gu));
    g = pool3_.backward(g);
    nn::add_into(g, skip3);
    g = pool2_.backward(enc3_->backward(g));
    nn::add_into(g, skip2);
    g = pool1_.backward(enc2_->backward(g));
    nn::add_into(g, skip1);
    return enc1_->backward(g);
  }

  void collect_params(const std::string& p, std::vector<nn::ParamRef<T>>& out) override {
    enc1_->collect_params(p + "enc1.", out);
    enc2_->collect_params(p + "enc2.", out);
    enc3_->collect_params(p + "enc3.", out);
    bott_->collect_params(p + "bottleneck.", out);
    dec3_->collect_params(p + "dec3.", out);
    dec2_->collect_params(p + "dec2.", out);
    dec1_->collect_params(p + "dec1.", out);
    head1_.collect_params(p + "head1.", out);
    head2_.collect_params(p + "head2.", out);
  }
  void collect_buffers(const std::string& p, std::vector<nn::BufferRef<T>>& out) override {
    enc1_->collect_buffers(p + "enc1.", out);
    enc2_->collect_buffers(p + "enc2.", out);
    enc3_->collect_buffers(p + "enc3.", out);
    bott_->collect_buffers(p + "bottleneck.", out);
    dec3_->collect_buffers(p + "dec3.", out);
    dec2_->collect_buffers(p + "dec2.", out);
    dec1_->collect_buffers(p + "dec1.", out);
  }
  void init(Rng& rng) override {
    enc1_->init(rng);
    enc2_->init(rng);
    enc3_->init(rng);
    bott_->init(rng);
    dec3_->init(rng);
    dec2_->init(rng);
    dec1_->init(rng);
    head1_.init(rng);
    head2_.init(rng);
  }
  void set_frozen(bool f) override {
    this->frozen_ = f;
    enc1_->set_frozen(f);
    enc2_->set_frozen(f);
    enc3_->set_frozen(f);
    bott_->set_frozen(f);
    dec3_->set_frozen(f);
    dec2_->set_frozen(f);
    dec1_->set_frozen(f);
    head1_.set_frozen(f);
    head2_.set_frozen(f);
  }

  int out_channels() const { return out_ch_; }
  int base_width() const { return base_; }
  nn::Conv2d<T>& head_out() { return head2_; }

 private:
  int out_ch_, base_;
  std::unique_ptr<nn::Sequential<T>> enc1_, enc2_, enc3_, bott_, dec3_, dec2_, dec1_;
  nn::MaxPool2d<T> pool1_{2}, pool2_{2}, pool3_{2};
  nn::UpsampleNearest2<T> up3_, up2_, up1_;
  nn::Conv2d<T> head1_, head2_;
  nn::ReLU<T> head_relu_;
  nn::SoftmaxChannel<T> softmax_;
};

}  // namespace colorcnn::models

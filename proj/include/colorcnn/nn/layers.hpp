#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "colorcnn/core/rng.hpp"
#include "colorcnn/kernels/kernels.hpp"
#include "colorcnn/nn/tensor.hpp"

namespace colorcnn::nn {

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value;
  Tensor<T>* grad;
};

template <typename T>
struct BufferRef {
  std::string name;
  Tensor<T>* value;
};

template <typename T>
class Module {
 public:
  virtual ~Module() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, bool train) = 0;
  virtual Tensor<T> backward(const Tensor<T>& dy) = 0;
  virtual void collect_params(const std::string& prefix,
                              std::vector<ParamRef<T>>& out) {
    (void)prefix;
    (void)out;
  }
  virtual void collect_buffers(const std::string& prefix,
                               std::vector<BufferRef<T>>& out) {
    (void)prefix;
    (void)out;
  }
  virtual void init(Rng& rng) { (void)rng; }
  // frozen modules skip parameter-gradient accumulation in backward
  virtual void set_frozen(bool f) { frozen_ = f; }
  bool frozen() const { return frozen_; }

  std::vector<ParamRef<T>> params() {
    std::vector<ParamRef<T>> out;
    collect_params("", out);
    return out;
  }
  std::vector<BufferRef<T>> buffers() {
    std::vector<BufferRef<T>> out;
    collect_buffers("", out);
    return out;
  }
  void zero_grad() {
    for (auto& p : params()) p.grad->zero();
  }

 protected:
  bool frozen_ = false;
};

// ---------------------------------------------------------------------------

template <typename T>
void im2col(const T* x, int ch, int h, int w, int k, int stride, int pad,
            int oh, int ow, T* col) {
  for (int c = 0; c < ch; ++c) {
    const T* plane = x + size_t(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = col + (size_t(c) * k * k + size_t(ky) * k + kx) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + ow, T(0));
            dst += ow;
            continue;
          }
          const T* src_row = plane + size_t(iy) * w;
          int ox = 0;
          for (; ox < ow; ++ox) {
            int ix = ox * stride + kx - pad;
            dst[ox] = (ix >= 0 && ix < w) ? src_row[ix] : T(0);
          }
          dst += ow;
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, int ch, int h, int w, int k, int stride, int pad,
            int oh, int ow, T* x) {
  std::fill(x, x + size_t(ch) * h * w, T(0));
  for (int c = 0; c < ch; ++c) {
    T* plane = x + size_t(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src = col + (size_t(c) * k * k + size_t(ky) * k + kx) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) {
            src += ow;
            continue;
          }
          T* dst_row = plane + size_t(iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            int ix = ox * stride + kx - pad;
            if (ix >= 0 && ix < w) dst_row[ix] += src[ox];
          }
          src += ow;
        }
      }
    }
  }
}

template <typename T>
class Conv2d : public Module<T> {
 public:
  Conv2d(int in_ch, int out_ch, int k, int stride = 1, int pad = 0,
         bool bias = true)
      : in_(in_ch), out_(out_ch), k_(k), stride_(stride), pad_(pad),
        has_bias_(bias), w_({out_ch, in_ch * k * k}), gw_({out_ch, in_ch * k * k}) {
    if (bias) {
      b_ = Tensor<T>({out_ch});
      gb_ = Tensor<T>({out_ch});
    }
  }

  void init(Rng& rng) override {
    // He-normal, fan-in
    T std = T(std::sqrt(2.0 / double(in_ * k_ * k_)));
    for (auto& v : w_.data) v = T(rng.normal()) * std;
    if (has_bias_) b_.zero();
  }

  Tensor<T> forward(const Tensor<T>& x, bool) override {
    x_ = x;
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    COLORCNN_CHECK(x.dim(1) == in_, "conv input channel mismatch");
    oh_ = (h + 2 * pad_ - k_) / stride_ + 1;
    ow_ = (w + 2 * pad_ - k_) / stride_ + 1;
    COLORCNN_CHECK(oh_ >= 1 && ow_ >= 1, "conv output collapsed to zero size");
    Tensor<T> y({n, out_, oh_, ow_});
    const int ck = in_ * k_ * k_;
    const int spatial = oh_ * ow_;
    const bool unit = (k_ == 1 && stride_ == 1 && pad_ == 0);
    if (!unit) col_.resize(size_t(ck) * spatial);
    for (int i = 0; i < n; ++i) {
      const T* xin = x.ptr() + size_t(i) * in_ * h * w;
      const T* col = xin;
      if (!unit) {
        im2col(xin, in_, h, w, k_, stride_, pad_, oh_, ow_, col_.data());
        col = col_.data();
      }
      T* yout = y.ptr() + size_t(i) * out_ * spatial;
      kernels::gemm(false, false, out_, spatial, ck, T(1), w_.ptr(), ck, col,
                    spatial, T(0), yout, spatial);
      if (has_bias_) {
        for (int c = 0; c < out_; ++c) {
          T bv = b_.data[c];
          T* row = yout + size_t(c) * spatial;
          for (int s = 0; s < spatial; ++s) row[s] += bv;
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    const int n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
    const int ck = in_ * k_ * k_;
    const int spatial = oh_ * ow_;
    const bool unit = (k_ == 1 && stride_ == 1 && pad_ == 0);
    Tensor<T> dx(x_.shape);
    if (!unit) {
      col_.resize(size_t(ck) * spatial);
      dcol_.resize(size_t(ck) * spatial);
    }
    for (int i = 0; i < n; ++i) {
      const T* xin = x_.ptr() + size_t(i) * in_ * h * w;
      const T* dyp = dy.ptr() + size_t(i) * out_ * spatial;
      if (!this->frozen_) {
        const T* col = xin;
        if (!unit) {
          im2col(xin, in_, h, w, k_, stride_, pad_, oh_, ow_, col_.data());
          col = col_.data();
        }
        // gw += dy (out x spatial) * col^T (spatial x ck)
        kernels::gemm(false, true, out_, ck, spatial, T(1), dyp, spatial, col,
                      spatial, T(1), gw_.ptr(), ck);
        if (has_bias_) {
          for (int c = 0; c < out_; ++c)
            gb_.data[c] += kernels::reduce_sum(spatial, dyp + size_t(c) * spatial);
        }
      }
      T* dst = unit ? dx.ptr() + size_t(i) * in_ * h * w : dcol_.data();
      // dcol = W^T (ck x out) * dy (out x spatial)
      kernels::gemm(true, false, ck, spatial, out_, T(1), w_.ptr(), ck, dyp,
                    spatial, T(0), dst, spatial);
      if (!unit)
        col2im(dcol_.data(), in_, h, w, k_, stride_, pad_, oh_, ow_,
               dx.ptr() + size_t(i) * in_ * h * w);
    }
    return dx;
  }

  void collect_params(const std::string& prefix,
                      std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + "weight", &w_, &gw_});
    if (has_bias_) out.push_back({prefix + "bias", &b_, &gb_});
  }

  int out_channels() const { return out_; }
  Tensor<T>& weight() { return w_; }
  Tensor<T>& bias() { return b_; }

 private:
  int in_, out_, k_, stride_, pad_;
  bool has_bias_;
  Tensor<T> w_, gw_, b_, gb_;
  Tensor<T> x_;
  int oh_ = 0, ow_ = 0;
  std::vector<T> col_, dcol_;
};

template <typename T>
class BatchNorm2d : public Module<T> {
 public:
  explicit BatchNorm2d(int ch, T momentum = T(0.1), T eps = T(1e-5))
      : ch_(ch), momentum_(momentum), eps_(eps), gamma_({ch}), beta_({ch}),
        ggamma_({ch}), gbeta_({ch}), run_mean_({ch}), run_var_({ch}) {
    gamma_.fill(T(1));
    run_var_.fill(T(1));
  }

  void init(Rng&) override {
    gamma_.fill(T(1));
    beta_.zero();
    run_mean_.zero();
    run_var_.fill(T(1));
  }

  Tensor<T> forward(const Tensor<T>& x, bool train) override {
    COLORCNN_CHECK(x.dim(1) == ch_, "batchnorm channel mismatch");
    train_mode_ = train;
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int64_t plane = int64_t(h) * w;
    const int64_t group = int64_t(n) * plane;
    Tensor<T> y(x.shape);
    xhat_ = Tensor<T>(x.shape);
    invstd_.assign(ch_, T(0));
    for (int c = 0; c < ch_; ++c) {
      T mean, var;
      if (train) {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
          s += double(kernels::reduce_sum(plane, x.ptr() + (size_t(i) * ch_ + c) * plane));
        mean = T(s / double(group));
        double sq = 0.0;
        for (int i = 0; i < n; ++i) {
          const T* p = x.ptr() + (size_t(i) * ch_ + c) * plane;
          for (int64_t j = 0; j < plane; ++j) {
            double d = double(p[j]) - double(mean);
            sq += d * d;
          }
        }
        var = T(sq / double(group));
        run_mean_.data[c] = (T(1) - momentum_) * run_mean_.data[c] + momentum_ * mean;
        run_var_.data[c] = (T(1) - momentum_) * run_var_.data[c] + momentum_ * var;
      } else {
        mean = run_mean_.data[c];
        var = run_var_.data[c];
      }
      T inv = T(1) / std::sqrt(var + eps_);
      invstd_[c] = inv;
      T g = gamma_.data[c], b = beta_.data[c];
      for (int i = 0; i < n; ++i) {
        const T* p = x.ptr() + (size_t(i) * ch_ + c) * plane;
        T* xh = xhat_.ptr() + (size_t(i) * ch_ + c) * plane;
        T* yo = y.ptr() + (size_t(i) * ch_ + c) * plane;
        for (int64_t j = 0; j < plane; ++j) {
          T v = (p[j] - mean) * inv;
          xh[j] = v;
          yo[j] = g * v + b;
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    const int n = dy.dim(0), h = dy.dim(2), w = dy.dim(3);
    const int64_t plane = int64_t(h) * w;
    const int64_t group = int64_t(n) * plane;
    Tensor<T> dx(dy.shape);
    for (int c = 0; c < ch_; ++c) {
      T g = gamma_.data[c];
      T inv = invstd_[c];
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int i = 0; i < n; ++i) {
        const T* dyp = dy.ptr() + (size_t(i) * ch_ + c) * plane;
        const T* xh = xhat_.ptr() + (size_t(i) * ch_ + c) * plane;
        for (int64_t j = 0; j < plane; ++j) {
          sum_dy += double(dyp[j]);
          sum_dy_xhat += double(dyp[j]) * double(xh[j]);
        }
      }
      if (!this->frozen_) {
        ggamma_.data[c] += T(sum_dy_xhat);
        gbeta_.data[c] += T(sum_dy);
      }
      if (train_mode_) {
        T k1 = T(sum_dy / double(group));
        T k2 = T(sum_dy_xhat / double(group));
        for (int i = 0; i < n; ++i) {
          const T* dyp = dy.ptr() + (size_t(i) * ch_ + c) * plane;
          const T* xh = xhat_.ptr() + (size_t(i) * ch_ + c) * plane;
          T* dxp = dx.ptr() + (size_t(i) * ch_ + c) * plane;
          for (int64_t j = 0; j < plane; ++j)
            dxp[j] = g * inv * (dyp[j] - k1 - xh[j] * k2);
        }
      } else {
        for (int i = 0; i < n; ++i) {
          const T* dyp = dy.ptr() + (size_t(i) * ch_ + c) * plane;
          T* dxp = dx.ptr() + (size_t(i) * ch_ + c) * plane;
          for (int64_t j = 0; j < plane; ++j) dxp[j] = g * inv * dyp[j];
        }
      }
    }
    return dx;
  }

  void collect_params(const std::string& prefix,
                      std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + "gamma", &gamma_, &ggamma_});
    out.push_back({prefix + "beta", &beta_, &gbeta_});
  }
  void collect_buffers(const std::string& prefix,
                       std::vector<BufferRef<T>>& out) override {
    out.push_back({prefix + "running_mean", &run_mean_});
    out.push_back({prefix + "running_var", &run_var_});
  }

 private:
  int ch_;
  T momentum_, eps_;
  Tensor<T> gamma_, beta_, ggamma_, gbeta_, run_mean_, run_var_;
  Tensor<T> xhat_;
  std::vector<T> invstd_;
  bool train_mode_ = false;
};

template <typename T>
class ReLU : public Module<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool) override {
    x_ = x;
    Tensor<T> y(x.shape);
    kernels::relu_forward(x.numel(), x.ptr(), y.ptr());
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> dx(dy.shape);
    kernels::relu_backward(dy.numel(), x_.ptr(), dy.ptr(), dx.ptr());
    return dx;
  }

 private:
  Tensor<T> x_;
};

template <typename T>
class MaxPool2d : public Module<T> {
 public:
  explicit MaxPool2d(int k, int stride = -1) : k_(k), stride_(stride < 0 ? k : stride) {}

  Tensor<T> forward(const Tensor<T>& x, bool) override {
    const int n = x.dim(0), ch = x.dim(1), h = x.dim(2), w = x.dim(3);
    in_shape_ = x.shape;
    const int oh = (h - k_) / stride_ + 1;
    const int ow = (w - k_) / stride_ + 1;
    COLORCNN_CHECK(oh >= 1 && ow >= 1, "maxpool output collapsed to zero size");
    Tensor<T> y({n, ch, oh, ow});
    argmax_.resize(size_t(y.numel()));
    size_t o = 0;
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < ch; ++c) {
        const T* plane = x.ptr() + (size_t(i) * ch + c) * h * w;
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox, ++o) {
            int iy0 = oy * stride_, ix0 = ox * stride_;
            T best = plane[size_t(iy0) * w + ix0];
            int besti = iy0 * w + ix0;
            for (int ky = 0; ky < k_; ++ky) {
              for (int kx = 0; kx < k_; ++kx) {
                int idx = (iy0 + ky) * w + ix0 + kx;
                if (plane[idx] > best) {
                  best = plane[idx];
                  besti = idx;
                }
              }
            }
            y.data[o] = best;
            argmax_[o] = besti;
          }
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> dx(in_shape_);
    const int ch = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
    const int n = in_shape_[0];
    const int64_t per_plane_out = dy.numel() / (int64_t(n) * ch);
    size_t o = 0;
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < ch; ++c) {
        T* plane = dx.ptr() + (size_t(i) * ch + c) * h * w;
        for (int64_t j = 0; j < per_plane_out; ++j, ++o)
          plane[argmax_[o]] += dy.data[o];
      }
    }
    return dx;
  }

 private:
  int k_, stride_;
  std::vector<int> in_shape_;
  std::vector<int32_t> argmax_;
};

template <typename T>
class GlobalAvgPool : public Module<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool) override {
    in_shape_ = x.shape;
    const int n = x.dim(0), ch = x.dim(1);
    const int64_t plane = int64_t(x.dim(2)) * x.dim(3);
    Tensor<T> y({n, ch});
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < ch; ++c)
        y.data[size_t(i) * ch + c] =
            kernels::reduce_sum(plane, x.ptr() + (size_t(i) * ch + c) * plane) / T(plane);
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> dx(in_shape_);
    const int n = in_shape_[0], ch = in_shape_[1];
    const int64_t plane = int64_t(in_shape_[2]) * in_shape_[3];
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < ch; ++c) {
        T v = dy.data[size_t(i) * ch + c] / T(plane);
        T* p = dx.ptr() + (size_t(i) * ch + c) * plane;
        for (int64_t j = 0; j < plane; ++j) p[j] = v;
      }
    return dx;
  }

 private:
  std::vector<int> in_shape_;
};

template <typename T>
class Linear : public Module<T> {
 public:
  Linear(int in, int out)
      : in_(in), out_(out), w_({out, in}), gw_({out, in}), b_({out}), gb_({out}) {}

  void init(Rng& rng) override {
    T std = T(std::sqrt(2.0 / double(in_)));
    for (auto& v : w_.data) v = T(rng.normal()) * std;
    b_.zero();
  }

  Tensor<T> forward(const Tensor<T>& x, bool) override {
    const int n = x.dim(0);
    COLORCNN_CHECK(x.numel() / n == in_, "linear input size mismatch");
    x_ = x;
    Tensor<T> y({n, out_});
    kernels::gemm(false, true, n, out_, in_, T(1), x.ptr(), in_, w_.ptr(), in_,
                  T(0), y.ptr(), out_);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < out_; ++c) y.data[size_t(i) * out_ + c] += b_.data[c];
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    const int n = x_.dim(0);
    if (!this->frozen_) {
      kernels::gemm(true, false, out_, in_, n, T(1), dy.ptr(), out_, x_.ptr(),
                    in_, T(1), gw_.ptr(), in_);
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < out_; ++c) gb_.data[c] += dy.data[size_t(i) * out_ + c];
    }
    Tensor<T> dx(x_.shape);
    kernels::gemm(false, false, n, in_, out_, T(1), dy.ptr(), out_, w_.ptr(),
                  in_, T(0), dx.ptr(), in_);
    return dx;
  }

  void collect_params(const std::string& prefix,
                      std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + "weight", &w_, &gw_});
    out.push_back({prefix + "bias", &b_, &gb_});
  }

  Tensor<T>& weight() { return w_; }

 private:
  int in_, out_;
  Tensor<T> w_, gw_, b_, gb_;
  Tensor<T> x_;
};

template <typename T>
class Dropout : public Module<T> {
 public:
  Dropout(T p, Rng* rng) : p_(p), rng_(rng) {}

  Tensor<T> forward(const Tensor<T>& x, bool train) override {
    if (!train || p_ <= T(0)) {
      active_ = false;
      return x;
    }
    active_ = true;
    mask_.resize(size_t(x.numel()));
    Tensor<T> y(x.shape);
    T scale = T(1) / (T(1) - p_);
    for (int64_t i = 0; i < x.numel(); ++i) {
      bool keep = rng_->uniform() >= double(p_);
      mask_[size_t(i)] = keep ? scale : T(0);
      y.data[size_t(i)] = x.data[size_t(i)] * mask_[size_t(i)];
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    if (!active_) return dy;
    Tensor<T> dx(dy.shape);
    for (int64_t i = 0; i < dy.numel(); ++i)
      dx.data[size_t(i)] = dy.data[size_t(i)] * mask_[size_t(i)];
    return dx;
  }

 private:
  T p_;
  Rng* rng_;
  bool active_ = false;
  std::vector<T> mask_;
};

template <typename T>
class UpsampleNearest2 : public Module<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool) override {
    in_shape_ = x.shape;
    const int n = x.dim(0), ch = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor<T> y({n, ch, h * 2, w * 2});
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < ch; ++c) {
        const T* src = x.ptr() + (size_t(i) * ch + c) * h * w;
        T* dst = y.ptr() + (size_t(i) * ch + c) * h * w * 4;
        for (int yy = 0; yy < h * 2; ++yy) {
          const T* srow = src + size_t(yy / 2) * w;
          T* drow = dst + size_t(yy) * w * 2;
          for (int xx = 0; xx < w * 2; ++xx) drow[xx] = srow[xx / 2];
        }
      }
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> dx(in_shape_);
    const int n = in_shape_[0], ch = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < ch; ++c) {
        T* dst = dx.ptr() + (size_t(i) * ch + c) * h * w;
        const T* src = dy.ptr() + (size_t(i) * ch + c) * h * w * 4;
        for (int yy = 0; yy < h * 2; ++yy) {
          const T* srow = src + size_t(yy) * w * 2;
          T* drow = dst + size_t(yy / 2) * w;
          for (int xx = 0; xx < w * 2; ++xx) drow[xx / 2] += srow[xx];
        }
      }
    return dx;
  }

 private:
  std::vector<int> in_shape_;
};

// softmax over the channel dimension of NCHW
template <typename T>
class SoftmaxChannel : public Module<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool) override {
    const int n = x.dim(0), ch = x.dim(1);
    const int64_t plane = int64_t(x.dim(2)) * x.dim(3);
    y_ = Tensor<T>(x.shape);
    for (int i = 0; i < n; ++i) {
      const T* xi = x.ptr() + size_t(i) * ch * plane;
      T* yi = y_.ptr() + size_t(i) * ch * plane;
      for (int64_t j = 0; j < plane; ++j) {
        T mx = xi[j];
        for (int c = 1; c < ch; ++c) mx = std::max(mx, xi[size_t(c) * plane + j]);
        T sum = T(0);
        for (int c = 0; c < ch; ++c) {
          T e = std::exp(xi[size_t(c) * plane + j] - mx);
          yi[size_t(c) * plane + j] = e;
          sum += e;
        }
        T inv = T(1) / sum;
        for (int c = 0; c < ch; ++c) yi[size_t(c) * plane + j] *= inv;
      }
    }
    return y_;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    const int n = dy.dim(0), ch = dy.dim(1);
    const int64_t plane = int64_t(dy.dim(2)) * dy.dim(3);
    Tensor<T> dx(dy.shape);
    for (int i = 0; i < n; ++i) {
      const T* dyi = dy.ptr() + size_t(i) * ch * plane;
      const T* yi = y_.ptr() + size_t(i) * ch * plane;
      T* dxi = dx.ptr() + size_t(i) * ch * plane;
      for (int64_t j = 0; j < plane; ++j) {
        T dot = T(0);
        for (int c = 0; c < ch; ++c)
          dot += dyi[size_t(c) * plane + j] * yi[size_t(c) * plane + j];
        for (int c = 0; c < ch; ++c)
          dxi[size_t(c) * plane + j] =
              yi[size_t(c) * plane + j] * (dyi[size_t(c) * plane + j] - dot);
      }
    }
    return dx;
  }

  const Tensor<T>& cached_output() const { return y_; }

 private:
  Tensor<T> y_;
};

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  COLORCNN_CHECK(dst.same_shape(src), "add shape mismatch");
  kernels::axpy(dst.numel(), T(1), src.ptr(), dst.ptr());
}

template <typename T>
class Sequential : public Module<T> {
 public:
  Sequential() = default;

  Sequential& add(std::unique_ptr<Module<T>> m) {
    mods_.push_back(std::move(m));
    return *this;
  }
  template <typename M, typename... Args>
  M* emplace(Args&&... args) {
    auto m = std::make_unique<M>(std::forward<Args>(args)...);
    M* raw = m.get();
    mods_.push_back(std::move(m));
    return raw;
  }

  Tensor<T> forward(const Tensor<T>& x, bool train) override {
    Tensor<T> cur = x;
    for (auto& m : mods_) cur = m->forward(cur, train);
    return cur;
  }
  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> cur = dy;
    for (auto it = mods_.rbegin(); it != mods_.rend(); ++it)
      cur = (*it)->backward(cur);
    return cur;
  }
  void collect_params(const std::string& prefix,
                      std::vector<ParamRef<T>>& out) override {
    for (size_t i = 0; i < mods_.size(); ++i)
      mods_[i]->collect_params(prefix + std::to_string(i) + ".", out);
  }
  void collect_buffers(const std::string& prefix,
                       std::vector<BufferRef<T>>& out) override {
    for (size_t i = 0; i < mods_.size(); ++i)
      mods_[i]->collect_buffers(prefix + std::to_string(i) + ".", out);
  }
  void init(Rng& rng) override {
    for (auto& m : mods_) m->init(rng);
  }
  void set_frozen(bool f) override {
    this->frozen_ = f;
    for (auto& m : mods_) m->set_frozen(f);
  }
  size_t size() const { return mods_.size(); }
  Module<T>* at(size_t i) { return mods_[i].get(); }

 private:
  std::vector<std::unique_ptr<Module<T>>> mods_;
};

}  // namespace colorcnn::nn

#pragma once

#include <cmath>
#include <vector>

#include "colorcnn/core/rng.hpp"
#include "colorcnn/img/image.hpp"
#include "colorcnn/models/unet.hpp"
#include "colorcnn/nn/tensor.hpp"

namespace colorcnn::quant {

using nn::Tensor;

struct QuantizerConfig {
  int bit_depth = 1;       // palette size = 2^bit_depth
  float gamma = 1.0f;      // diversity regularizer weight
  float xi = 1.0f;         // training jitter scale
  float norm_scale = 4.0f; // std multiplier when normalizing for the frozen classifier
  int colors() const { return 1 << bit_depth; }
};

inline void validate(const QuantizerConfig& c) {
  COLORCNN_CHECK(c.bit_depth >= 1 && c.bit_depth <= 6,
                 "bit depth must be in [1,6], got " << c.bit_depth);
  COLORCNN_CHECK(c.gamma >= 0.f, "gamma must be >= 0");
  COLORCNN_CHECK(c.xi >= 0.f, "xi must be >= 0");
  COLORCNN_CHECK(c.norm_scale > 0.f, "normalization scale must be > 0");
}

// probability maps are NKHW tensors: batch, palette entry, row, column.
// every pixel's K entries are non-negative and sum to 1.
template <typename T>
void validate_prob_map(const Tensor<T>& m, double tol = 1e-5) {
  COLORCNN_CHECK(m.rank() == 4, "probability map must be rank 4");
  const int n = m.dim(0), k = m.dim(1);
  const int64_t plane = int64_t(m.dim(2)) * m.dim(3);
  for (int i = 0; i < n; ++i) {
    for (int64_t j = 0; j < plane; ++j) {
      double sum = 0;
      for (int c = 0; c < k; ++c) {
        T v = m.data[(size_t(i) * k + c) * plane + j];
        COLORCNN_CHECK(v >= T(0) && v <= T(1), "probability out of [0,1]: " << v);
        sum += double(v);
      }
      COLORCNN_CHECK(std::abs(sum - 1.0) <= tol,
                     "pixel probabilities sum to " << sum);
    }
  }
}

// per-pixel channel argmax; ties break toward the lowest entry index
template <typename T>
Tensor<int32_t> argmax_index_map(const Tensor<T>& m) {
  const int n = m.dim(0), k = m.dim(1), h = m.dim(2), w = m.dim(3);
  const int64_t plane = int64_t(h) * w;
  Tensor<int32_t> idx({n, h, w});
  for (int i = 0; i < n; ++i) {
    const T* mp = m.ptr() + size_t(i) * k * plane;
    int32_t* op = idx.ptr() + size_t(i) * plane;
    for (int64_t j = 0; j < plane; ++j) {
      int best = 0;
      T bv = mp[j];
      for (int c = 1; c < k; ++c) {
        T v = mp[size_t(c) * plane + j];
        if (v > bv) {
          bv = v;
          best = c;
        }
      }
      op[j] = best;
    }
  }
  return idx;
}

// palette entry = mean color over the pixels assigned to it. An entry that
// owns no pixels cannot be averaged; it is filled with the unnormalized
// probability-weighted color sum when m is supplied (zero without m, matching
// a one-hot m), and reported in the empty mask. The lookup never reads such
// entries, so the fallback only affects palette reporting.
template <typename T>
void hard_palette(const Tensor<T>& x, const Tensor<int32_t>& idx, int k,
                  Tensor<T>& palette, Tensor<uint8_t>& empty,
                  const Tensor<T>* m = nullptr) {
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int64_t plane = int64_t(h) * w;
  palette = Tensor<T>({n, k, 3});
  empty = Tensor<uint8_t>({n, k});
  std::vector<double> sum(size_t(k) * 3);
  std::vector<int64_t> cnt(static_cast<size_t>(k));
  for (int i = 0; i < n; ++i) {
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(cnt.begin(), cnt.end(), int64_t(0));
    const int32_t* ip = idx.ptr() + size_t(i) * plane;
    for (int64_t j = 0; j < plane; ++j) {
      int c = ip[j];
      COLORCNN_CHECK(c >= 0 && c < k, "index " << c << " outside palette of " << k);
      ++cnt[c];
      for (int r = 0; r < 3; ++r)
        sum[size_t(c) * 3 + r] += double(x.data[(size_t(i) * 3 + r) * plane + j]);
    }
    for (int c = 0; c < k; ++c) {
      T* entry = palette.ptr() + (size_t(i) * k + c) * 3;
      if (cnt[c] > 0) {
        empty.data[size_t(i) * k + c] = 0;
        for (int r = 0; r < 3; ++r) entry[r] = T(sum[size_t(c) * 3 + r] / double(cnt[c]));
      } else {
        empty.data[size_t(i) * k + c] = 1;
        for (int r = 0; r < 3; ++r) entry[r] = T(0);
        if (m) {
          for (int r = 0; r < 3; ++r) {
            double acc = 0;
            const T* xr = x.ptr() + (size_t(i) * 3 + r) * plane;
            const T* mc = m->ptr() + (size_t(i) * k + c) * plane;
            for (int64_t j = 0; j < plane; ++j) acc += double(xr[j]) * double(mc[j]);
            entry[r] = T(acc);
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> palette_lookup(const Tensor<T>& palette, const Tensor<int32_t>& idx) {
  const int n = idx.dim(0), h = idx.dim(1), w = idx.dim(2);
  const int k = palette.dim(1);
  const int64_t plane = int64_t(h) * w;
  Tensor<T> y({n, 3, h, w});
  for (int i = 0; i < n; ++i) {
    const int32_t* ip = idx.ptr() + size_t(i) * plane;
    for (int64_t j = 0; j < plane; ++j) {
      const T* entry = palette.ptr() + (size_t(i) * k + ip[j]) * 3;
      for (int r = 0; r < 3; ++r) y.data[(size_t(i) * 3 + r) * plane + j] = entry[r];
    }
  }
  return y;
}

// differentiable palette and reconstruction. Palette entries are
// probability-weighted color averages; the reconstruction mixes them back
// through the same weights, so its gradient reaches both the image and the
// probability map.
template <typename T>
class SoftQuantizer {
 public:
  static constexpr double kEps = 1e-8;

  // x: {N,3,H,W}, m: {N,K,H,W} -> x_tilde {N,3,H,W}
  Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& m) {
    x_ = x;
    m_ = m;
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int k = m.dim(1);
    COLORCNN_CHECK(m.dim(0) == n && m.dim(2) == h && m.dim(3) == w,
                   "probability map shape mismatch");
    const int64_t plane = int64_t(h) * w;
    t_ = Tensor<T>({n, k, 3});
    denom_ = Tensor<T>({n, k});
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < k; ++c) {
        const T* mc = m.ptr() + (size_t(i) * k + c) * plane;
        double s = 0;
        for (int64_t j = 0; j < plane; ++j) s += double(mc[j]);
        T d = T(s + kEps);
        denom_.data[size_t(i) * k + c] = d;
        for (int r = 0; r < 3; ++r) {
          const T* xr = x.ptr() + (size_t(i) * 3 + r) * plane;
          double p = 0;
          for (int64_t j = 0; j < plane; ++j) p += double(xr[j]) * double(mc[j]);
          t_.data[(size_t(i) * k + c) * 3 + r] = T(p) / d;
        }
      }
    }
    Tensor<T> y({n, 3, h, w});
    for (int i = 0; i < n; ++i) {
      for (int r = 0; r < 3; ++r) {
        T* yr = y.ptr() + (size_t(i) * 3 + r) * plane;
        for (int c = 0; c < k; ++c) {
          const T* mc = m.ptr() + (size_t(i) * k + c) * plane;
          T tc = t_.data[(size_t(i) * k + c) * 3 + r];
          for (int64_t j = 0; j < plane; ++j) yr[j] += tc * mc[j];
        }
      }
    }
    return y;
  }

  // dy: gradient w.r.t. x_tilde; accumulates into dm and dx (zeroed here)
  void backward(const Tensor<T>& dy, Tensor<T>& dm, Tensor<T>& dx) const {
    const int n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
    const int k = m_.dim(1);
    const int64_t plane = int64_t(h) * w;
    dm = Tensor<T>(m_.shape);
    dx = Tensor<T>(x_.shape);
    std::vector<double> dt(size_t(k) * 3), dP(size_t(k) * 3), dS(size_t(k), 0.0);
    for (int i = 0; i < n; ++i) {
      std::fill(dt.begin(), dt.end(), 0.0);
      std::fill(dS.begin(), dS.end(), 0.0);
      // reconstruction mixes: dt through m, dm through t
      for (int c = 0; c < k; ++c) {
        const T* mc = m_.ptr() + (size_t(i) * k + c) * plane;
        T* dmc = dm.ptr() + (size_t(i) * k + c) * plane;
        for (int r = 0; r < 3; ++r) {
          const T* dyr = dy.ptr() + (size_t(i) * 3 + r) * plane;
          T tc = t_.data[(size_t(i) * k + c) * 3 + r];
          double acc = 0;
          for (int64_t j = 0; j < plane; ++j) {
            acc += double(dyr[j]) * double(mc[j]);
            dmc[j] += tc * dyr[j];
          }
          dt[size_t(c) * 3 + r] = acc;
        }
      }
      // palette averages: split dt into numerator and denominator parts
      for (int c = 0; c < k; ++c) {
        double d = double(denom_.data[size_t(i) * k + c]);
        for (int r = 0; r < 3; ++r) {
          double g = dt[size_t(c) * 3 + r] / d;
          dP[size_t(c) * 3 + r] = g;
          dS[c] -= g * double(t_.data[(size_t(i) * k + c) * 3 + r]);
        }
      }
      for (int c = 0; c < k; ++c) {
        const T* mc = m_.ptr() + (size_t(i) * k + c) * plane;
        T* dmc = dm.ptr() + (size_t(i) * k + c) * plane;
        T ds = T(dS[c]);
        for (int r = 0; r < 3; ++r) {
          const T* xr = x_.ptr() + (size_t(i) * 3 + r) * plane;
          T* dxr = dx.ptr() + (size_t(i) * 3 + r) * plane;
          T gp = T(dP[size_t(c) * 3 + r]);
          for (int64_t j = 0; j < plane; ++j) {
            dxr[j] += mc[j] * gp;
            dmc[j] += xr[j] * gp;
          }
        }
        for (int64_t j = 0; j < plane; ++j) dmc[j] += ds;
      }
    }
  }

  const Tensor<T>& palette() const { return t_; }

 private:
  Tensor<T> x_, m_, t_, denom_;
};

// penalty in [0, log2 K) that shrinks as every palette entry attains spatial
// max probability near 1 somewhere in the image; returns one value per image
template <typename T>
Tensor<T> diversity_regularizer(const Tensor<T>& m) {
  const int n = m.dim(0), k = m.dim(1);
  const int64_t plane = int64_t(m.dim(2)) * m.dim(3);
  Tensor<T> r({n});
  const double log2k = std::log2(double(k));
  for (int i = 0; i < n; ++i) {
    double acc = 0;
    for (int c = 0; c < k; ++c)
      acc += double(kernels::reduce_max(plane, m.ptr() + (size_t(i) * k + c) * plane));
    r.data[size_t(i)] = T(log2k * (1.0 - acc / double(k)));
  }
  return r;
}

// gradient support: each channel's penalty depends only on its spatial max;
// the subgradient routes to the first (row-major) attaining pixel
template <typename T>
void diversity_regularizer_backward(const Tensor<T>& m, const Tensor<T>& dr,
                                    Tensor<T>& dm) {
  const int n = m.dim(0), k = m.dim(1);
  const int64_t plane = int64_t(m.dim(2)) * m.dim(3);
  if (!dm.same_shape(m)) dm = Tensor<T>(m.shape);
  const double log2k = std::log2(double(k));
  for (int i = 0; i < n; ++i) {
    T coeff = T(-log2k / double(k)) * dr.data[size_t(i)];
    for (int c = 0; c < k; ++c) {
      const T* mc = m.ptr() + (size_t(i) * k + c) * plane;
      int64_t best = 0;
      for (int64_t j = 1; j < plane; ++j)
        if (mc[j] > mc[best]) best = j;
      dm.data[(size_t(i) * k + c) * plane + best] += coeff;
    }
  }
}

template <typename T>
void apply_color_jitter(Tensor<T>& x, T xi, Rng& rng) {
  if (xi == T(0)) return;
  for (auto& v : x.data) v += xi * T(rng.normal());
}

// ---------------------------------------------------------------------------
// single-image conveniences over the imaging types

Tensor<float> image_to_tensor(const img::RgbImage& im);
img::RgbImage tensor_to_image(const Tensor<float>& x, int n = 0);

Tensor<float> forward_prob_map(models::UNet<float>& net, const img::RgbImage& im);

// argmax index, masked-mean palette, table lookup; result carries the PNG
// encoding size and distinct-color count
img::QuantResult hard_quantize(models::UNet<float>& net, const img::RgbImage& im,
                               const QuantizerConfig& cfg);

// batch hard pass used by evaluation loops: probability map in, palettes and
// reconstruction out
struct HardPassResult {
  Tensor<int32_t> index_map;
  Tensor<float> palette;
  Tensor<uint8_t> empty_entries;
  Tensor<float> image;
};
HardPassResult hard_pass(const Tensor<float>& x, const Tensor<float>& m);

}  // namespace colorcnn::quant

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "colorcnn/core/rng.hpp"
#include "colorcnn/models/unet.hpp"
#include "colorcnn/quantizer/quantizer.hpp"

using namespace colorcnn;
using nn::Tensor;

namespace {

template <typename T>
Tensor<T> random_prob_map(Rng& rng, int n, int k, int h, int w) {
  Tensor<T> m({n, k, h, w});
  const int64_t plane = int64_t(h) * w;
  std::vector<double> e(static_cast<size_t>(k));
  for (int i = 0; i < n; ++i)
    for (int64_t j = 0; j < plane; ++j) {
      double sum = 0;
      for (int c = 0; c < k; ++c) {
        e[size_t(c)] = std::exp(rng.uniform(-2.0, 2.0));
        sum += e[size_t(c)];
      }
      for (int c = 0; c < k; ++c)
        m.data[(size_t(i) * k + c) * plane + j] = T(e[size_t(c)] / sum);
    }
  return m;
}

template <typename T>
Tensor<T> random_image_tensor(Rng& rng, int n, int h, int w) {
  Tensor<T> x({n, 3, h, w});
  for (auto& v : x.data) v = T(rng.uniform());
  return x;
}

// direct evaluation of the soft palette and reconstruction, kept free of any
// shared code with the implementation under test
struct SoftOracle {
  std::vector<double> t;  // n*k*3
  std::vector<double> y;  // n*3*h*w
};

template <typename T>
SoftOracle soft_oracle(const Tensor<T>& x, const Tensor<T>& m) {
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3), k = m.dim(1);
  const int64_t plane = int64_t(h) * w;
  SoftOracle o;
  o.t.assign(size_t(n) * k * 3, 0.0);
  o.y.assign(size_t(n) * 3 * plane, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < k; ++c) {
      double mass = 0;
      for (int64_t j = 0; j < plane; ++j)
        mass += double(m.data[(size_t(i) * k + c) * plane + j]);
      for (int r = 0; r < 3; ++r) {
        double num = 0;
        for (int64_t j = 0; j < plane; ++j)
          num += double(x.data[(size_t(i) * 3 + r) * plane + j]) *
                 double(m.data[(size_t(i) * k + c) * plane + j]);
        o.t[(size_t(i) * k + c) * 3 + r] = num / (mass + 1e-8);
      }
    }
    for (int r = 0; r < 3; ++r)
      for (int64_t j = 0; j < plane; ++j) {
        double acc = 0;
        for (int c = 0; c < k; ++c)
          acc += o.t[(size_t(i) * k + c) * 3 + r] *
                 double(m.data[(size_t(i) * k + c) * plane + j]);
        o.y[(size_t(i) * 3 + r) * plane + j] = acc;
      }
  }
  return o;
}

template <typename T>
double penalty_oracle(const Tensor<T>& m, int image) {
  const int k = m.dim(1);
  const int64_t plane = int64_t(m.dim(2)) * m.dim(3);
  double acc = 0;
  for (int c = 0; c < k; ++c) {
    double best = -1e300;
    for (int64_t j = 0; j < plane; ++j)
      best = std::max(best, double(m.data[(size_t(image) * k + c) * plane + j]));
    acc += best;
  }
  return std::log2(double(k)) * (1.0 - acc / double(k));
}

}  // namespace

TEST_CASE("soft palette and reconstruction match direct evaluation") {
  Rng rng(401);
  struct Shape {
    int n, k, h, w;
  };
  for (Shape s : {Shape{2, 4, 8, 8}, Shape{1, 8, 8, 8}, Shape{3, 2, 6, 10}}) {
    auto xd = random_image_tensor<double>(rng, s.n, s.h, s.w);
    auto md = random_prob_map<double>(rng, s.n, s.k, s.h, s.w);
    auto o = soft_oracle(xd, md);

    quant::SoftQuantizer<double> sq;
    auto yd = sq.forward(xd, md);
    double dt = 0, dy = 0;
    for (size_t i = 0; i < o.t.size(); ++i)
      dt = std::max(dt, std::abs(double(sq.palette().data[i]) - o.t[i]));
    for (size_t i = 0; i < o.y.size(); ++i)
      dy = std::max(dy, std::abs(double(yd.data[i]) - o.y[i]));
    CHECK(dt < 1e-12);
    CHECK(dy < 1e-12);

    Tensor<float> xf(xd.shape), mf(md.shape);
    for (size_t i = 0; i < xd.data.size(); ++i) xf.data[i] = float(xd.data[i]);
    for (size_t i = 0; i < md.data.size(); ++i) mf.data[i] = float(md.data[i]);
    auto of = soft_oracle(xf, mf);
    quant::SoftQuantizer<float> sqf;
    auto yf = sqf.forward(xf, mf);
    double dtf = 0, dyf = 0;
    for (size_t i = 0; i < of.t.size(); ++i)
      dtf = std::max(dtf, std::abs(double(sqf.palette().data[i]) - of.t[i]));
    for (size_t i = 0; i < of.y.size(); ++i)
      dyf = std::max(dyf, std::abs(double(yf.data[i]) - of.y[i]));
    CHECK(dtf < 1e-6);
    CHECK(dyf < 1e-6);
  }
}

TEST_CASE("one-hot probability maps reduce the soft pass to the hard pass") {
  Rng rng(402);
  const int n = 2, k = 4, h = 8, w = 8;
  const int64_t plane = int64_t(h) * w;
  auto x = random_image_tensor<float>(rng, n, h, w);
  Tensor<int32_t> idx({n, h, w});
  for (int i = 0; i < n; ++i)
    for (int64_t j = 0; j < plane; ++j) {
      // image 0 never uses the last entry, so one palette slot stays empty
      int lim = (i == 0) ? k - 1 : k;
      idx.data[size_t(i) * plane + j] = int32_t(rng.uniform_index(uint64_t(lim)));
    }
  Tensor<float> m({n, k, h, w});
  for (int i = 0; i < n; ++i)
    for (int64_t j = 0; j < plane; ++j)
      m.data[(size_t(i) * k + idx.data[size_t(i) * plane + j]) * plane + j] = 1.0f;

  quant::SoftQuantizer<float> sq;
  auto soft = sq.forward(x, m);
  auto hard = quant::hard_pass(x, m);

  for (int64_t i = 0; i < int64_t(n) * plane; ++i)
    CHECK(hard.index_map.data[size_t(i)] == idx.data[size_t(i)]);
  double dimg = 0, dpal = 0;
  for (size_t i = 0; i < soft.data.size(); ++i)
    dimg = std::max(dimg, std::abs(double(soft.data[i]) - double(hard.image.data[i])));
  for (size_t i = 0; i < hard.palette.data.size(); ++i)
    dpal = std::max(dpal, std::abs(double(sq.palette().data[i]) - double(hard.palette.data[i])));
  CHECK(dimg < 1e-6);
  CHECK(dpal < 1e-6);
  CHECK(hard.empty_entries.data[k - 1] == 1);
  CHECK(hard.empty_entries.data[0] == 0);
}

TEST_CASE("diversity penalty matches its formula and stays in range") {
  Rng rng(403);
  for (int k : {2, 4, 8}) {
    const int reps = 100;
    for (int rep = 0; rep < reps; ++rep) {
      int h = 2 + int(rng.uniform_index(7));
      int w = 2 + int(rng.uniform_index(7));
      auto m = random_prob_map<double>(rng, 2, k, h, w);
      auto r = quant::diversity_regularizer(m);
      for (int i = 0; i < 2; ++i) {
        double want = penalty_oracle(m, i);
        CHECK(std::abs(double(r.data[size_t(i)]) - want) < 1e-12);
        CHECK(r.data[size_t(i)] >= 0.0);
        CHECK(r.data[size_t(i)] < std::log2(double(k)));
        // softmax maps never saturate, so the penalty is strictly positive
        CHECK(r.data[size_t(i)] > 0.0);
      }
    }
  }
}

TEST_CASE("diversity penalty vanishes exactly at saturated maps") {
  const int k = 4, h = 4, w = 4;
  const int64_t plane = int64_t(h) * w;
  Tensor<double> m({1, k, h, w});
  // one-hot assignment that touches every entry
  for (int64_t j = 0; j < plane; ++j) m.data[size_t(j % k) * plane + j] = 1.0;
  auto r = quant::diversity_regularizer(m);
  CHECK(std::abs(double(r.data[0])) < 1e-12);

  // cap channel 0 at 0.98 on every pixel it owns; its global max drops to 0.98
  // while the other channels keep peaks of 1 elsewhere
  for (int64_t j = 0; j < plane; j += k) {
    m.data[size_t(0) * plane + j] = 0.98;
    m.data[size_t(1) * plane + j] += 0.02;
  }
  r = quant::diversity_regularizer(m);
  double want = std::log2(double(k)) * 0.02 / double(k);
  CHECK(std::abs(double(r.data[0]) - want) < 1e-12);
}

TEST_CASE("diversity penalty subgradient lands on the first attaining pixel") {
  Rng rng(404);
  const int n = 2, k = 3, h = 4, w = 4;
  const int64_t plane = int64_t(h) * w;
  Tensor<double> m({n, k, h, w});
  for (auto& v : m.data) v = rng.uniform() * 0.5;
  std::vector<int64_t> peak(size_t(n) * k);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < k; ++c) {
      int64_t j = int64_t(rng.uniform_index(uint64_t(plane)));
      peak[size_t(i) * k + c] = j;
      m.data[(size_t(i) * k + c) * plane + j] = 0.8 + 0.1 * rng.uniform();
    }
  // duplicate one peak value later in the row-major order; the earlier pixel
  // must keep the whole subgradient
  m.data[(size_t(0) * k + 1) * plane + plane - 1] = m.data[(size_t(0) * k + 1) * plane + peak[1]];

  Tensor<double> dr({n});
  dr.data[0] = 1.25;
  dr.data[1] = -0.5;
  Tensor<double> dm;
  quant::diversity_regularizer_backward(m, dr, dm);

  const double unit = -std::log2(double(k)) / double(k);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < k; ++c)
      for (int64_t j = 0; j < plane; ++j) {
        double got = dm.data[(size_t(i) * k + c) * plane + j];
        double want = (j == peak[size_t(i) * k + c]) ? unit * dr.data[size_t(i)] : 0.0;
        CHECK(std::abs(got - want) < 1e-12);
      }

  // central differences at the strict maxima agree with the subgradient
  for (int c = 0; c < k; ++c) {
    size_t at = (size_t(1) * k + c) * plane + size_t(peak[size_t(k) + c]);
    const double h0 = 1e-4;
    double keep = m.data[at];
    m.data[at] = keep + h0;
    double up = penalty_oracle(m, 1);
    m.data[at] = keep - h0;
    double dn = penalty_oracle(m, 1);
    m.data[at] = keep;
    CHECK(std::abs((up - dn) / (2 * h0) - unit) < 1e-9);
  }
}

TEST_CASE("soft pass gradients agree with finite differences") {
  Rng rng(405);
  const int n = 1, k = 4, h = 5, w = 5;
  auto x = random_image_tensor<double>(rng, n, h, w);
  auto m = random_prob_map<double>(rng, n, k, h, w);

  quant::SoftQuantizer<double> sq;
  auto y0 = sq.forward(x, m);
  Tensor<double> wobble(y0.shape);
  for (auto& v : wobble.data) v = rng.uniform(-1.0, 1.0);
  Tensor<double> dm, dx;
  sq.backward(wobble, dm, dx);

  auto objective = [&](const Tensor<double>& xx, const Tensor<double>& mm) {
    quant::SoftQuantizer<double> probe;
    auto y = probe.forward(xx, mm);
    double s = 0;
    for (size_t i = 0; i < y.data.size(); ++i) s += double(y.data[i]) * double(wobble.data[i]);
    return s;
  };

  const double h0 = 1e-6;
  double worst = 0;
  for (size_t i = 0; i < x.data.size(); ++i) {
    double keep = x.data[i];
    x.data[i] = keep + h0;
    double up = objective(x, m);
    x.data[i] = keep - h0;
    double dn = objective(x, m);
    x.data[i] = keep;
    double fd = (up - dn) / (2 * h0);
    worst = std::max(worst, std::abs(fd - dx.data[i]) / std::max(1.0, std::abs(fd) + std::abs(dx.data[i])));
  }
  for (size_t i = 0; i < m.data.size(); ++i) {
    double keep = m.data[i];
    m.data[i] = keep + h0;
    double up = objective(x, m);
    m.data[i] = keep - h0;
    double dn = objective(x, m);
    m.data[i] = keep;
    double fd = (up - dn) / (2 * h0);
    worst = std::max(worst, std::abs(fd - dm.data[i]) / std::max(1.0, std::abs(fd) + std::abs(dm.data[i])));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("color jitter is seeded noise with the requested scale") {
  {
    Rng rng(406);
    Tensor<float> x({4, 3, 4, 4});
    for (size_t i = 0; i < x.data.size(); ++i) x.data[i] = float(i) * 0.01f;
    auto before = x.data;
    quant::apply_color_jitter(x, 0.0f, rng);
    CHECK(x.data == before);
  }
  {
    Rng rng(407);
    Tensor<float> x({1, 1, 100, 200});
    for (auto& v : x.data) v = 2.0f;
    quant::apply_color_jitter(x, 0.7f, rng);
    double mean = 0;
    for (auto v : x.data) mean += v;
    mean /= double(x.data.size());
    double var = 0;
    for (auto v : x.data) var += (v - mean) * (v - mean);
    var /= double(x.data.size() - 1);
    CHECK(std::abs(mean - 2.0) < 0.05);
    CHECK(std::abs(var - 0.49) < 0.08);
  }
  {
    Rng a(408), b(408);
    Tensor<float> xa({2, 3, 8, 8}), xb({2, 3, 8, 8});
    quant::apply_color_jitter(xa, 1.0f, a);
    quant::apply_color_jitter(xb, 1.0f, b);
    CHECK(xa.data == xb.data);
  }
}

TEST_CASE("index map argmax breaks ties toward the lower entry") {
  Tensor<float> m({1, 3, 2, 2});
  auto set = [&](int c, int y, int x, float v) { m.data[(size_t(c) * 4) + size_t(y) * 2 + x] = v; };
  set(0, 0, 0, 1.f / 3);
  set(1, 0, 0, 1.f / 3);
  set(2, 0, 0, 1.f / 3);
  set(0, 0, 1, 0.2f);
  set(1, 0, 1, 0.4f);
  set(2, 0, 1, 0.4f);
  set(0, 1, 0, 0.1f);
  set(1, 1, 0, 0.2f);
  set(2, 1, 0, 0.7f);
  set(0, 1, 1, 0.5f);
  set(1, 1, 1, 0.25f);
  set(2, 1, 1, 0.25f);
  auto idx = quant::argmax_index_map(m);
  CHECK(idx.data[0] == 0);
  CHECK(idx.data[1] == 1);
  CHECK(idx.data[2] == 2);
  CHECK(idx.data[3] == 0);
}

TEST_CASE("hard palette averages owned pixels and flags orphans") {
  const int k = 3;
  Tensor<float> x({1, 3, 2, 2});
  // channel-major planes: r = {0.0, 0.4, 0.8, 1.0}, g = r + 0.1 clipped, b = 0.5
  float rv[4] = {0.0f, 0.4f, 0.8f, 1.0f};
  for (int j = 0; j < 4; ++j) {
    x.data[size_t(j)] = rv[j];
    x.data[4 + size_t(j)] = std::min(1.0f, rv[j] + 0.1f);
    x.data[8 + size_t(j)] = 0.5f;
  }
  Tensor<int32_t> idx({1, 2, 2});
  idx.data = {0, 0, 1, 1};

  Tensor<float> palette;
  Tensor<uint8_t> empty;
  quant::hard_palette(x, idx, k, palette, empty);
  CHECK(empty.data[0] == 0);
  CHECK(empty.data[1] == 0);
  CHECK(empty.data[2] == 1);
  CHECK(palette.data[0] == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(palette.data[1] == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(palette.data[2] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(palette.data[3] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(palette.data[5] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(palette.data[6] == 0.0f);
  CHECK(palette.data[7] == 0.0f);
  CHECK(palette.data[8] == 0.0f);

  // orphaned entry falls back to its probability-weighted color sum when the
  // map is available
  Tensor<float> m({1, k, 2, 2});
  for (auto& v : m.data) v = 0.25f;
  quant::hard_palette(x, idx, k, palette, empty, &m);
  CHECK(empty.data[2] == 1);
  double want_r = 0.25 * (0.0 + 0.4 + 0.8 + 1.0);
  CHECK(palette.data[6] == doctest::Approx(want_r).epsilon(1e-6));
  CHECK(palette.data[8] == doctest::Approx(0.5).epsilon(1e-6));

  Tensor<int32_t> bad({1, 2, 2});
  bad.data = {0, 0, 0, 3};
  CHECK_THROWS(quant::hard_palette(x, bad, k, palette, empty));
}

TEST_CASE("hard quantization stays within the color budget") {
  Rng rng(409);
  for (int d : {1, 3}) {
    quant::QuantizerConfig cfg;
    cfg.bit_depth = d;
    models::UNet<float> net(cfg.colors(), 4);
    Rng init(500 + uint64_t(d));
    net.init(init);

    img::RgbImage im(16, 16);
    for (auto& v : im.px) v = float(rng.uniform());
    auto res = quant::hard_quantize(net, im, cfg);
    CHECK(res.distinct_colors <= cfg.colors());
    CHECK(int(res.palette.size()) <= cfg.colors());
    CHECK(res.palette.size() >= 1);
    CHECK(res.bits_per_pixel > 0.0);
    CHECK(res.image.h == 16);
    CHECK(res.image.w == 16);
    for (int32_t v : res.index_map.idx) {
      CHECK(v >= 0);
      CHECK(v < int32_t(res.palette.size()));
    }
  }
}

TEST_CASE("config validation rejects out-of-range settings") {
  quant::QuantizerConfig cfg;
  CHECK_NOTHROW(quant::validate(cfg));
  for (int d = 1; d <= 6; ++d) {
    cfg.bit_depth = d;
    CHECK(cfg.colors() == (1 << d));
    CHECK_NOTHROW(quant::validate(cfg));
  }
  cfg.bit_depth = 0;
  CHECK_THROWS(quant::validate(cfg));
  cfg.bit_depth = 7;
  CHECK_THROWS(quant::validate(cfg));
  cfg.bit_depth = 3;
  cfg.gamma = -0.1f;
  CHECK_THROWS(quant::validate(cfg));
  cfg.gamma = 1.0f;
  cfg.xi = -1.0f;
  CHECK_THROWS(quant::validate(cfg));
  cfg.xi = 0.0f;
  cfg.norm_scale = 0.0f;
  CHECK_THROWS(quant::validate(cfg));
}

TEST_CASE("probability map validation") {
  Rng rng(410);
  auto m = random_prob_map<float>(rng, 2, 4, 6, 6);
  CHECK_NOTHROW(quant::validate_prob_map(m));

  auto broken = m;
  broken.data[5] *= 1.2f;
  CHECK_THROWS(quant::validate_prob_map(broken));

  auto negative = m;
  negative.data[0] = -0.01f;
  CHECK_THROWS(quant::validate_prob_map(negative));

  Tensor<float> flat({2, 4, 6});
  CHECK_THROWS(quant::validate_prob_map(flat));
}

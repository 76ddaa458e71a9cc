#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "colorcnn/core/rng.hpp"
#include "colorcnn/kernels/kernels.hpp"

using namespace colorcnn;
namespace K = colorcnn::kernels;

namespace {

std::vector<float> randn(Rng& rng, size_t n) {
  std::vector<float> v(n);
  for (auto& x : v) x = float(rng.normal());
  return v;
}

// textbook triple loop in double, the yardstick for both backends
void gemm_naive(bool ta, bool tb, int m, int n, int k, float alpha,
                const float* a, int lda, const float* b, int ldb, float beta,
                float* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0;
      for (int p = 0; p < k; ++p) {
        float av = ta ? a[size_t(p) * lda + i] : a[size_t(i) * lda + p];
        float bv = tb ? b[size_t(j) * ldb + p] : b[size_t(p) * ldb + j];
        acc += double(av) * double(bv);
      }
      c[size_t(i) * ldc + j] = float(double(alpha) * acc + double(beta) * c[size_t(i) * ldc + j]);
    }
  }
}

double max_rel_diff(const std::vector<float>& a, const std::vector<float>& b) {
  REQUIRE(a.size() == b.size());
  double worst = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = std::abs(double(a[i]) - double(b[i]));
    double s = std::max(1.0, std::abs(double(a[i])) + std::abs(double(b[i])));
    worst = std::max(worst, d / s);
  }
  return worst;
}

const bool kHasAvx2 = K::avx2_supported();

}  // namespace

TEST_CASE("gemm matches the naive reference across shapes and transposes") {
  Rng rng(7);
  // shapes straddling the 4-row blocks, 16/8-wide tiles and their tails
  const int shapes[][3] = {{1, 1, 1},  {3, 5, 2},   {4, 16, 8},  {5, 17, 9},
                           {8, 24, 16}, {13, 31, 21}, {16, 33, 40}, {2, 7, 64}};
  for (auto [m, n, k] : shapes) {
    for (bool ta : {false, true}) {
      for (bool tb : {false, true}) {
        for (auto [alpha, beta] : {std::pair{1.0f, 0.0f}, {0.5f, 1.0f}, {-2.0f, 0.25f}}) {
          const int lda = ta ? m + 2 : k + 1;
          const int ldb = tb ? k + 3 : n + 2;
          const int ldc = n + 1;
          auto a = randn(rng, size_t(ta ? k : m) * lda);
          auto b = randn(rng, size_t(tb ? n : k) * ldb);
          auto c0 = randn(rng, size_t(m) * ldc);
          auto want = c0;
          gemm_naive(ta, tb, m, n, k, alpha, a.data(), lda, b.data(), ldb, beta,
                     want.data(), ldc);

          auto got = c0;
          K::detail::gemm_f32_scalar(ta, tb, m, n, k, alpha, a.data(), lda,
                                     b.data(), ldb, beta, got.data(), ldc);
          CHECK(max_rel_diff(got, want) < 1e-5);

          if (kHasAvx2) {
            auto got2 = c0;
            K::detail::gemm_f32_avx2(ta, tb, m, n, k, alpha, a.data(), lda,
                                     b.data(), ldb, beta, got2.data(), ldc);
            CHECK(max_rel_diff(got2, want) < 1e-5);
          }
        }
      }
    }
  }
}

TEST_CASE("gemm backends agree on a larger problem") {
  if (!kHasAvx2) return;
  Rng rng(11);
  const int m = 61, n = 77, k = 129;
  auto a = randn(rng, size_t(m) * k);
  auto b = randn(rng, size_t(k) * n);
  std::vector<float> c1(size_t(m) * n, 0.f), c2 = c1;
  K::detail::gemm_f32_scalar(false, false, m, n, k, 1.f, a.data(), k, b.data(), n,
                             0.f, c1.data(), n);
  K::detail::gemm_f32_avx2(false, false, m, n, k, 1.f, a.data(), k, b.data(), n,
                           0.f, c2.data(), n);
  CHECK(max_rel_diff(c1, c2) < 1e-5);
}

TEST_CASE("axpy and relu backends agree, including non-multiple-of-8 tails") {
  if (!kHasAvx2) return;
  Rng rng(3);
  for (int64_t n : {1, 7, 8, 9, 63, 64, 65, 1000}) {
    auto x = randn(rng, size_t(n));
    auto y0 = randn(rng, size_t(n));
    auto dy = randn(rng, size_t(n));

    auto y1 = y0, y2 = y0;
    K::detail::axpy_f32_scalar(n, 1.75f, x.data(), y1.data());
    K::detail::axpy_f32_avx2(n, 1.75f, x.data(), y2.data());
    for (int64_t i = 0; i < n; ++i) CHECK(y1[size_t(i)] == y2[size_t(i)]);

    std::vector<float> r1(static_cast<size_t>(n)), r2(static_cast<size_t>(n));
    K::detail::relu_forward_f32_scalar(n, x.data(), r1.data());
    K::detail::relu_forward_f32_avx2(n, x.data(), r2.data());
    for (int64_t i = 0; i < n; ++i) {
      CHECK(r1[size_t(i)] == r2[size_t(i)]);
      CHECK(r1[size_t(i)] == (x[size_t(i)] > 0 ? x[size_t(i)] : 0.f));
    }

    std::vector<float> d1(static_cast<size_t>(n)), d2(static_cast<size_t>(n));
    K::detail::relu_backward_f32_scalar(n, x.data(), dy.data(), d1.data());
    K::detail::relu_backward_f32_avx2(n, x.data(), dy.data(), d2.data());
    for (int64_t i = 0; i < n; ++i) CHECK(d1[size_t(i)] == d2[size_t(i)]);
  }
}

TEST_CASE("reductions agree across backends and match double sums") {
  Rng rng(5);
  for (int64_t n : {1, 2, 7, 8, 9, 31, 32, 33, 4097}) {
    auto x = randn(rng, size_t(n));
    double want = 0;
    for (float v : x) want += double(v);
    float s1 = K::detail::reduce_sum_f32_scalar(n, x.data());
    CHECK(std::abs(double(s1) - want) < 1e-4 * std::max(1.0, std::abs(want)));
    float mx = *std::max_element(x.begin(), x.end());
    CHECK(K::detail::reduce_max_f32_scalar(n, x.data()) == mx);
    if (kHasAvx2) {
      float s2 = K::detail::reduce_sum_f32_avx2(n, x.data());
      // both accumulate in double but with different lane orders
      CHECK(std::abs(double(s1) - double(s2)) <= 1e-6 * std::max(1.0, std::abs(want)));
      CHECK(K::detail::reduce_max_f32_avx2(n, x.data()) == mx);
    }
  }
}

TEST_CASE("sgd update matches the recurrence and both backends agree") {
  Rng rng(13);
  const int64_t n = 37;
  auto w0 = randn(rng, size_t(n));
  auto g = randn(rng, size_t(n));
  auto v0 = randn(rng, size_t(n));
  const float lr = 0.05f, mu = 0.9f, wd = 1e-4f;

  auto w1 = w0, v1 = v0;
  K::detail::sgd_momentum_f32_scalar(n, w1.data(), g.data(), v1.data(), lr, mu, wd);
  for (int64_t i = 0; i < n; ++i) {
    size_t j = size_t(i);
    float vref = mu * v0[j] + g[j] + wd * w0[j];
    CHECK(v1[j] == doctest::Approx(vref).epsilon(1e-6));
    CHECK(w1[j] == doctest::Approx(w0[j] - lr * vref).epsilon(1e-6));
  }
  if (kHasAvx2) {
    auto w2 = w0, v2 = v0;
    K::detail::sgd_momentum_f32_avx2(n, w2.data(), g.data(), v2.data(), lr, mu, wd);
    for (int64_t i = 0; i < n; ++i) {
      CHECK(std::abs(w1[size_t(i)] - w2[size_t(i)]) < 1e-6f);
      CHECK(std::abs(v1[size_t(i)] - v2[size_t(i)]) < 1e-6f);
    }
  }
}

TEST_CASE("backend selection is sticky and reports support") {
  K::Backend before = K::active_backend();
  K::set_backend(K::Backend::kScalar);
  CHECK(K::active_backend() == K::Backend::kScalar);
  CHECK(std::string(K::backend_name(K::Backend::kScalar)) == "scalar");
  CHECK(std::string(K::backend_name(K::Backend::kAvx2)) == "avx2");
  if (kHasAvx2) {
    K::set_backend(K::Backend::kAvx2);
    CHECK(K::active_backend() == K::Backend::kAvx2);
  }
  K::set_backend(before);
}

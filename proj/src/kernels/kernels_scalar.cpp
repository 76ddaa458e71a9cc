#include <cmath>
#include <algorithm>
#include <vector>

#include "colorcnn/kernels/kernels.hpp"

namespace colorcnn::kernels {
namespace detail {

namespace {

template <typename T>
void gemm_ref(bool ta, bool tb, int m, int n, int k, T alpha, const T* a,
              int lda, const T* b, int ldb, T beta, T* c, int ldc) {
  auto av = [&](int i, int p) { return ta ? a[int64_t(p) * lda + i] : a[int64_t(i) * lda + p]; };
  auto bv = [&](int p, int j) { return tb ? b[int64_t(j) * ldb + p] : b[int64_t(p) * ldb + j]; };
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (int64_t(m) * n * k >= (int64_t(1) << 20))
#endif
  for (int i = 0; i < m; ++i) {
    T* crow = c + int64_t(i) * ldc;
    if (beta == T(0)) {
      std::fill(crow, crow + n, T(0));
    } else if (beta != T(1)) {
      for (int j = 0; j < n; ++j) crow[j] *= beta;
    }
    for (int p = 0; p < k; ++p) {
      T av_ip = alpha * av(i, p);
      if (av_ip == T(0)) continue;
      if (!tb) {
        const T* brow = b + int64_t(p) * ldb;
        for (int j = 0; j < n; ++j) crow[j] += av_ip * brow[j];
      } else {
        for (int j = 0; j < n; ++j) crow[j] += av_ip * bv(p, j);
      }
    }
  }
}

}  // namespace

void gemm_f32_scalar(bool ta, bool tb, int m, int n, int k, float alpha,
                     const float* a, int lda, const float* b, int ldb,
                     float beta, float* c, int ldc) {
  gemm_ref(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void axpy_f32_scalar(int64_t n, float alpha, const float* x, float* y) {
  // fused like the avx2 path so both backends round identically
  for (int64_t i = 0; i < n; ++i) y[i] = std::fmaf(alpha, x[i], y[i]);
}

void relu_forward_f32_scalar(int64_t n, const float* x, float* y) {
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_f32_scalar(int64_t n, const float* x, const float* dy,
                              float* dx) {
  for (int64_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
}

float reduce_sum_f32_scalar(int64_t n, const float* x) {
  // double accumulator, same as the wide variant
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += x[i];
  return float(acc);
}

float reduce_max_f32_scalar(int64_t n, const float* x) {
  float m = x[0];
  for (int64_t i = 1; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

void sgd_momentum_f32_scalar(int64_t n, float* w, const float* g, float* v,
                             float lr, float momentum, float weight_decay) {
  for (int64_t i = 0; i < n; ++i) {
    v[i] = momentum * v[i] + g[i] + weight_decay * w[i];
    w[i] -= lr * v[i];
  }
}

}  // namespace detail

// f64 paths are scalar only
void gemm_f64(bool ta, bool tb, int m, int n, int k, double alpha,
              const double* a, int lda, const double* b, int ldb, double beta,
              double* c, int ldc) {
  detail::gemm_ref(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void axpy_f64(int64_t n, double alpha, const double* x, double* y) {
  for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void relu_forward_f64(int64_t n, const double* x, double* y) {
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_f64(int64_t n, const double* x, const double* dy,
                       double* dx) {
  for (int64_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

double reduce_sum_f64(int64_t n, const double* x) {
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double reduce_max_f64(int64_t n, const double* x) {
  double m = x[0];
  for (int64_t i = 1; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

void sgd_momentum_f64(int64_t n, double* w, const double* g, double* v,
                      double lr, double momentum, double weight_decay) {
  for (int64_t i = 0; i < n; ++i) {
    v[i] = momentum * v[i] + g[i] + weight_decay * w[i];
    w[i] -= lr * v[i];
  }
}

}  // namespace colorcnn::kernels

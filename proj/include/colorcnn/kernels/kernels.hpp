#pragma once

#include <cstdint>

// Data-parallel inner loops. Every f32 kernel has a scalar reference
// implementation and an AVX2 variant; the active one is picked at runtime
// (cpuid, overridable via COLORCNN_BACKEND=scalar|avx2 or set_backend()).
// f64 versions are scalar only and exist for the double-precision test
// instantiations of the network stack.
namespace colorcnn::kernels {

enum class Backend { kScalar, kAvx2 };

Backend active_backend();
void set_backend(Backend b);
bool avx2_supported();
const char* backend_name(Backend b);

// C (m x n) = alpha * op(A) * op(B) + beta * C, row-major.
// op(A) is (m x k): A is (m x k) with leading dim lda when trans_a is false,
// (k x m) otherwise. Same convention for B.
void gemm_f32(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
              const float* a, int lda, const float* b, int ldb, float beta,
              float* c, int ldc);
void gemm_f64(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
              const double* a, int lda, const double* b, int ldb, double beta,
              double* c, int ldc);

// y += alpha * x
void axpy_f32(int64_t n, float alpha, const float* x, float* y);
void axpy_f64(int64_t n, double alpha, const double* x, double* y);

// y = max(x, 0); backward: dx = dy where x > 0
void relu_forward_f32(int64_t n, const float* x, float* y);
void relu_backward_f32(int64_t n, const float* x, const float* dy, float* dx);
void relu_forward_f64(int64_t n, const double* x, double* y);
void relu_backward_f64(int64_t n, const double* x, const double* dy, double* dx);

float reduce_sum_f32(int64_t n, const float* x);
double reduce_sum_f64(int64_t n, const double* x);
float reduce_max_f32(int64_t n, const float* x);
double reduce_max_f64(int64_t n, const double* x);

// v = momentum * v + g + weight_decay * w;  w -= lr * v
void sgd_momentum_f32(int64_t n, float* w, const float* g, float* v, float lr,
                      float momentum, float weight_decay);
void sgd_momentum_f64(int64_t n, double* w, const double* g, double* v,
                      double lr, double momentum, double weight_decay);

namespace detail {
// raw variants, exposed for the equivalence tests
void gemm_f32_scalar(bool ta, bool tb, int m, int n, int k, float alpha,
                     const float* a, int lda, const float* b, int ldb,
                     float beta, float* c, int ldc);
void gemm_f32_avx2(bool ta, bool tb, int m, int n, int k, float alpha,
                   const float* a, int lda, const float* b, int ldb, float beta,
                   float* c, int ldc);
void axpy_f32_scalar(int64_t n, float alpha, const float* x, float* y);
void axpy_f32_avx2(int64_t n, float alpha, const float* x, float* y);
void relu_forward_f32_scalar(int64_t n, const float* x, float* y);
void relu_forward_f32_avx2(int64_t n, const float* x, float* y);
void relu_backward_f32_scalar(int64_t n, const float* x, const float* dy,
                              float* dx);
void relu_backward_f32_avx2(int64_t n, const float* x, const float* dy,
                            float* dx);
float reduce_sum_f32_scalar(int64_t n, const float* x);
float reduce_sum_f32_avx2(int64_t n, const float* x);
float reduce_max_f32_scalar(int64_t n, const float* x);
float reduce_max_f32_avx2(int64_t n, const float* x);
void sgd_momentum_f32_scalar(int64_t n, float* w, const float* g, float* v,
                             float lr, float momentum, float weight_decay);
void sgd_momentum_f32_avx2(int64_t n, float* w, const float* g, float* v,
                           float lr, float momentum, float weight_decay);
}  // namespace detail

// convenience overloads used by the templated nn code
inline void gemm(bool ta, bool tb, int m, int n, int k, float alpha,
                 const float* a, int lda, const float* b, int ldb, float beta,
                 float* c, int ldc) {
  gemm_f32(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}
inline void gemm(bool ta, bool tb, int m, int n, int k, double alpha,
                 const double* a, int lda, const double* b, int ldb,
                 double beta, double* c, int ldc) {
  gemm_f64(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}
inline void axpy(int64_t n, float a, const float* x, float* y) {
  axpy_f32(n, a, x, y);
}
inline void axpy(int64_t n, double a, const double* x, double* y) {
  axpy_f64(n, a, x, y);
}
inline void relu_forward(int64_t n, const float* x, float* y) {
  relu_forward_f32(n, x, y);
}
inline void relu_forward(int64_t n, const double* x, double* y) {
  relu_forward_f64(n, x, y);
}
inline void relu_backward(int64_t n, const float* x, const float* dy,
                          float* dx) {
  relu_backward_f32(n, x, dy, dx);
}
inline void relu_backward(int64_t n, const double* x, const double* dy,
                          double* dx) {
  relu_backward_f64(n, x, dy, dx);
}
inline float reduce_sum(int64_t n, const float* x) {
  return reduce_sum_f32(n, x);
}
inline double reduce_sum(int64_t n, const double* x) {
  return reduce_sum_f64(n, x);
}
inline float reduce_max(int64_t n, const float* x) {
  return reduce_max_f32(n, x);
}
inline double reduce_max(int64_t n, const double* x) {
  return reduce_max_f64(n, x);
}
inline void sgd_momentum(int64_t n, float* w, const float* g, float* v,
                         float lr, float momentum, float wd) {
  sgd_momentum_f32(n, w, g, v, lr, momentum, wd);
}
inline void sgd_momentum(int64_t n, double* w, const double* g, double* v,
                         double lr, double momentum, double wd) {
  sgd_momentum_f64(n, w, g, v, lr, momentum, wd);
}

}  // namespace colorcnn::kernels

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "colorcnn/kernels/kernels.hpp"

namespace colorcnn::kernels {

namespace {

Backend detect_backend() {
  const char* env = std::getenv("COLORCNN_BACKEND");
  if (env != nullptr) {
    if (std::strcmp(env, "scalar") == 0) return Backend::kScalar;
    if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return Backend::kAvx2;
  }
  return avx2_supported() ? Backend::kAvx2 : Backend::kScalar;
}

std::atomic<Backend> g_backend{detect_backend()};

}  // namespace

bool avx2_supported() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend active_backend() { return g_backend.load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (b == Backend::kAvx2 && !avx2_supported()) b = Backend::kScalar;
  g_backend.store(b, std::memory_order_relaxed);
}

const char* backend_name(Backend b) {
  return b == Backend::kAvx2 ? "avx2" : "scalar";
}

void gemm_f32(bool ta, bool tb, int m, int n, int k, float alpha,
              const float* a, int lda, const float* b, int ldb, float beta,
              float* c, int ldc) {
  if (active_backend() == Backend::kAvx2)
    detail::gemm_f32_avx2(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
  else
    detail::gemm_f32_scalar(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void axpy_f32(int64_t n, float alpha, const float* x, float* y) {
  if (active_backend() == Backend::kAvx2)
    detail::axpy_f32_avx2(n, alpha, x, y);
  else
    detail::axpy_f32_scalar(n, alpha, x, y);
}

void relu_forward_f32(int64_t n, const float* x, float* y) {
  if (active_backend() == Backend::kAvx2)
    detail::relu_forward_f32_avx2(n, x, y);
  else
    detail::relu_forward_f32_scalar(n, x, y);
}

void relu_backward_f32(int64_t n, const float* x, const float* dy, float* dx) {
  if (active_backend() == Backend::kAvx2)
    detail::relu_backward_f32_avx2(n, x, dy, dx);
  else
    detail::relu_backward_f32_scalar(n, x, dy, dx);
}

float reduce_sum_f32(int64_t n, const float* x) {
  if (n == 0) return 0.0f;
  return active_backend() == Backend::kAvx2 ? detail::reduce_sum_f32_avx2(n, x)
                                            : detail::reduce_sum_f32_scalar(n, x);
}

float reduce_max_f32(int64_t n, const float* x) {
  return active_backend() == Backend::kAvx2 ? detail::reduce_max_f32_avx2(n, x)
                                            : detail::reduce_max_f32_scalar(n, x);
}

void sgd_momentum_f32(int64_t n, float* w, const float* g, float* v, float lr,
                      float momentum, float weight_decay) {
  if (active_backend() == Backend::kAvx2)
    detail::sgd_momentum_f32_avx2(n, w, g, v, lr, momentum, weight_decay);
  else
    detail::sgd_momentum_f32_scalar(n, w, g, v, lr, momentum, weight_decay);
}

}  // namespace colorcnn::kernels

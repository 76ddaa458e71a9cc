#include <immintrin.h>
#include <cmath>

#include <algorithm>
#include <vector>

#include "colorcnn/kernels/kernels.hpp"

// AVX2+FMA variants. This TU is compiled with -mavx2 -mfma; dispatch.cpp only
// routes here after a cpuid check.
namespace colorcnn::kernels::detail {

namespace {

inline float hmax256(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_max_ps(lo, hi);
  lo = _mm_max_ps(lo, _mm_movehl_ps(lo, lo));
  lo = _mm_max_ss(lo, _mm_shuffle_ps(lo, lo, 1));
  return _mm_cvtss_f32(lo);
}

// C tile (rows x 16) += A rows * B, A row-major lda, B row-major ldb.
template <int ROWS>
inline void gemm_tile16(int k, const float* a, int lda, const float* b,
                        int ldb, float* acc /* ROWS*16 */) {
  __m256 c[ROWS][2];
  for (int r = 0; r < ROWS; ++r) {
    c[r][0] = _mm256_setzero_ps();
    c[r][1] = _mm256_setzero_ps();
  }
  for (int p = 0; p < k; ++p) {
    const float* brow = b + int64_t(p) * ldb;
    __m256 b0 = _mm256_loadu_ps(brow);
    __m256 b1 = _mm256_loadu_ps(brow + 8);
    for (int r = 0; r < ROWS; ++r) {
      __m256 av = _mm256_broadcast_ss(a + int64_t(r) * lda + p);
      c[r][0] = _mm256_fmadd_ps(av, b0, c[r][0]);
      c[r][1] = _mm256_fmadd_ps(av, b1, c[r][1]);
    }
  }
  for (int r = 0; r < ROWS; ++r) {
    _mm256_storeu_ps(acc + r * 16, c[r][0]);
    _mm256_storeu_ps(acc + r * 16 + 8, c[r][1]);
  }
}

template <int ROWS>
inline void gemm_tile8(int k, const float* a, int lda, const float* b, int ldb,
                       float* acc /* ROWS*8 */) {
  __m256 c[ROWS];
  for (int r = 0; r < ROWS; ++r) c[r] = _mm256_setzero_ps();
  for (int p = 0; p < k; ++p) {
    __m256 b0 = _mm256_loadu_ps(b + int64_t(p) * ldb);
    for (int r = 0; r < ROWS; ++r) {
      __m256 av = _mm256_broadcast_ss(a + int64_t(r) * lda + p);
      c[r] = _mm256_fmadd_ps(av, b0, c[r]);
    }
  }
  for (int r = 0; r < ROWS; ++r) _mm256_storeu_ps(acc + r * 8, c[r]);
}

inline void store_block(float* c, int ldc, const float* acc, int rows, int cols,
                        int acc_stride, float alpha, float beta) {
  for (int r = 0; r < rows; ++r) {
    float* crow = c + int64_t(r) * ldc;
    const float* arow = acc + r * acc_stride;
    if (beta == 0.0f) {
      for (int j = 0; j < cols; ++j) crow[j] = alpha * arow[j];
    } else {
      for (int j = 0; j < cols; ++j) crow[j] = alpha * arow[j] + beta * crow[j];
    }
  }
}

// packed copies for the transposed cases; scratch reused across calls
thread_local std::vector<float> g_pack_a;
thread_local std::vector<float> g_pack_b;

// one block of up to four output rows; blocks touch disjoint C rows so the
// driver may hand them to different threads
void gemm_row_block(int rows, int n, int k, float alpha, const float* a_base,
                    int lda, const float* b, int ldb, float beta, float* c_base,
                    int ldc) {
  alignas(32) float acc[4 * 16];
  if (rows == 4) {
    int j = 0;
    for (; j + 16 <= n; j += 16) {
      gemm_tile16<4>(k, a_base, lda, b + j, ldb, acc);
      store_block(c_base + j, ldc, acc, 4, 16, 16, alpha, beta);
    }
    for (; j + 8 <= n; j += 8) {
      gemm_tile8<4>(k, a_base, lda, b + j, ldb, acc);
      store_block(c_base + j, ldc, acc, 4, 8, 8, alpha, beta);
    }
    if (j < n) {
      int cols = n - j;
      for (int r = 0; r < 4; ++r) {
        for (int q = 0; q < cols; ++q) {
          float s = 0.0f;
          const float* ar = a_base + int64_t(r) * lda;
          const float* bc = b + j + q;
          for (int p = 0; p < k; ++p) s += ar[p] * bc[int64_t(p) * ldb];
          float* cp = c_base + int64_t(r) * ldc + j + q;
          *cp = beta == 0.0f ? alpha * s : alpha * s + beta * *cp;
        }
      }
    }
    return;
  }
  for (int r = 0; r < rows; ++r) {
    const float* arow = a_base + int64_t(r) * lda;
    float* crow = c_base + int64_t(r) * ldc;
    int j = 0;
    for (; j + 16 <= n; j += 16) {
      gemm_tile16<1>(k, arow, lda, b + j, ldb, acc);
      store_block(crow + j, ldc, acc, 1, 16, 16, alpha, beta);
    }
    for (; j + 8 <= n; j += 8) {
      gemm_tile8<1>(k, arow, lda, b + j, ldb, acc);
      store_block(crow + j, ldc, acc, 1, 8, 8, alpha, beta);
    }
    for (; j < n; ++j) {
      float s = 0.0f;
      const float* bc = b + j;
      for (int p = 0; p < k; ++p) s += arow[p] * bc[int64_t(p) * ldb];
      float* cp = crow + j;
      *cp = beta == 0.0f ? alpha * s : alpha * s + beta * *cp;
    }
  }
}

}  // namespace

void gemm_f32_avx2(bool ta, bool tb, int m, int n, int k, float alpha,
                   const float* a, int lda, const float* b, int ldb, float beta,
                   float* c, int ldc) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    for (int i = 0; i < m; ++i) {
      float* crow = c + int64_t(i) * ldc;
      if (beta == 0.0f) std::fill(crow, crow + n, 0.0f);
      else for (int j = 0; j < n; ++j) crow[j] *= beta;
    }
    return;
  }
  if (ta) {
    g_pack_a.resize(size_t(m) * k);
    for (int p = 0; p < k; ++p)
      for (int i = 0; i < m; ++i) g_pack_a[size_t(i) * k + p] = a[int64_t(p) * lda + i];
    a = g_pack_a.data();
    lda = k;
  }
  if (tb) {
    g_pack_b.resize(size_t(k) * n);
    for (int j = 0; j < n; ++j)
      for (int p = 0; p < k; ++p) g_pack_b[size_t(p) * n + j] = b[int64_t(j) * ldb + p];
    b = g_pack_b.data();
    ldb = n;
  }

  const int nblocks = (m + 3) / 4;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (int64_t(m) * n * k >= (int64_t(1) << 20))
#endif
  for (int blk = 0; blk < nblocks; ++blk) {
    int i = blk * 4;
    gemm_row_block(std::min(4, m - i), n, k, alpha, a + int64_t(i) * lda, lda, b,
                   ldb, beta, c + int64_t(i) * ldc, ldc);
  }
}

void axpy_f32_avx2(int64_t n, float alpha, const float* x, float* y) {
  __m256 av = _mm256_set1_ps(alpha);
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 yv = _mm256_loadu_ps(y + i);
    yv = _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), yv);
    _mm256_storeu_ps(y + i, yv);
  }
  for (; i < n; ++i) y[i] = std::fmaf(alpha, x[i], y[i]);
}

void relu_forward_f32_avx2(int64_t n, const float* x, float* y) {
  __m256 z = _mm256_setzero_ps();
  int64_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), z));
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_f32_avx2(int64_t n, const float* x, const float* dy,
                            float* dx) {
  __m256 z = _mm256_setzero_ps();
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), z, _CMP_GT_OQ);
    _mm256_storeu_ps(dx + i, _mm256_and_ps(_mm256_loadu_ps(dy + i), mask));
  }
  for (; i < n; ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
}

float reduce_sum_f32_avx2(int64_t n, const float* x) {
  // accumulate in double lanes so the result matches the scalar reference
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 v = _mm256_loadu_ps(x + i);
    acc0 = _mm256_add_pd(acc0, _mm256_cvtps_pd(_mm256_castps256_ps128(v)));
    acc1 = _mm256_add_pd(acc1, _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)));
  }
  alignas(32) double tmp[4];
  _mm256_store_pd(tmp, _mm256_add_pd(acc0, acc1));
  double s = tmp[0] + tmp[1] + tmp[2] + tmp[3];
  for (; i < n; ++i) s += x[i];
  return float(s);
}

float reduce_max_f32_avx2(int64_t n, const float* x) {
  if (n < 8) {
    float m = x[0];
    for (int64_t i = 1; i < n; ++i) m = std::max(m, x[i]);
    return m;
  }
  __m256 mv = _mm256_loadu_ps(x);
  int64_t i = 8;
  for (; i + 8 <= n; i += 8) mv = _mm256_max_ps(mv, _mm256_loadu_ps(x + i));
  float m = hmax256(mv);
  for (; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

void sgd_momentum_f32_avx2(int64_t n, float* w, const float* g, float* v,
                           float lr, float momentum, float weight_decay) {
  __m256 mom = _mm256_set1_ps(momentum);
  __m256 wd = _mm256_set1_ps(weight_decay);
  __m256 nlr = _mm256_set1_ps(-lr);
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 wv = _mm256_loadu_ps(w + i);
    __m256 vv = _mm256_loadu_ps(v + i);
    vv = _mm256_fmadd_ps(mom, vv, _mm256_fmadd_ps(wd, wv, _mm256_loadu_ps(g + i)));
    _mm256_storeu_ps(v + i, vv);
    _mm256_storeu_ps(w + i, _mm256_fmadd_ps(nlr, vv, wv));
  }
  for (; i < n; ++i) {
    v[i] = momentum * v[i] + g[i] + weight_decay * w[i];
    w[i] -= lr * v[i];
  }
}

}  // namespace colorcnn::kernels::detail

// AVX2+FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma; nothing here runs unless dispatch.cpp verified CPU support.

#include "kernels/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cmath>

namespace audioinv::kernels {
namespace {

inline float hsum8(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 sh = _mm_movehl_ps(lo, lo);
  lo = _mm_add_ps(lo, sh);
  sh = _mm_shuffle_ps(lo, lo, 0x1);
  lo = _mm_add_ss(lo, sh);
  return _mm_cvtss_f32(lo);
}

// c_row[0..n) += av * b_row[0..n)
inline void fma_row(float* c, float av, const float* b, std::size_t n) {
  const __m256 va = _mm256_set1_ps(av);
  std::size_t j = 0;
  for (; j + 32 <= n; j += 32) {
    __m256 c0 = _mm256_loadu_ps(c + j);
    __m256 c1 = _mm256_loadu_ps(c + j + 8);
    __m256 c2 = _mm256_loadu_ps(c + j + 16);
    __m256 c3 = _mm256_loadu_ps(c + j + 24);
    c0 = _mm256_fmadd_ps(va, _mm256_loadu_ps(b + j), c0);
    c1 = _mm256_fmadd_ps(va, _mm256_loadu_ps(b + j + 8), c1);
    c2 = _mm256_fmadd_ps(va, _mm256_loadu_ps(b + j + 16), c2);
    c3 = _mm256_fmadd_ps(va, _mm256_loadu_ps(b + j + 24), c3);
    _mm256_storeu_ps(c + j, c0);
    _mm256_storeu_ps(c + j + 8, c1);
    _mm256_storeu_ps(c + j + 16, c2);
    _mm256_storeu_ps(c + j + 24, c3);
  }
  for (; j + 8 <= n; j += 8) {
    __m256 cv = _mm256_loadu_ps(c + j);
    cv = _mm256_fmadd_ps(va, _mm256_loadu_ps(b + j), cv);
    _mm256_storeu_ps(c + j, cv);
  }
  for (; j < n; ++j) c[j] += av * b[j];
}

void gemm_nn_avx2(std::size_t m, std::size_t n, std::size_t k, const float* a,
                  const float* b, float* c) {
  for (std::size_t i = 0; i < m; ++i) {
    float* ci = c + i * n;
    const float* ai = a + i * k;
    for (std::size_t l = 0; l < k; ++l) fma_row(ci, ai[l], b + l * n, n);
  }
}

void gemm_tn_avx2(std::size_t m, std::size_t n, std::size_t k, const float* a,
                  const float* b, float* c) {
  for (std::size_t l = 0; l < k; ++l) {
    const float* al = a + l * m;
    const float* bl = b + l * n;
    for (std::size_t i = 0; i < m; ++i) fma_row(c + i * n, al[i], bl, n);
  }
}

float dot_avx2(const float* a, const float* b, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8),
                           _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8)
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  float acc = hsum8(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void gemm_nt_avx2(std::size_t m, std::size_t n, std::size_t k, const float* a,
                  const float* b, float* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const float* ai = a + i * k;
    float* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] += dot_avx2(ai, b + j * k, k);
  }
}

void axpy_avx2(float* y, float alpha, const float* x, std::size_t n) {
  fma_row(y, alpha, x, n);
}

void vadd_avx2(float* out, const float* a, const float* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i,
                     _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void vsub_avx2(float* out, const float* a, const float* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i,
                     _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void vmul_avx2(float* out, const float* a, const float* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i,
                     _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void vscale_avx2(float* out, const float* a, float s, std::size_t n) {
  const __m256 vs = _mm256_set1_ps(s);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), vs));
  for (; i < n; ++i) out[i] = a[i] * s;
}

void vadd_scalar_avx2(float* out, const float* a, float s, std::size_t n) {
  const __m256 vs = _mm256_set1_ps(s);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), vs));
  for (; i < n; ++i) out[i] = a[i] + s;
}

void leaky_relu_avx2(float* out, const float* a, float slope, std::size_t n) {
  const __m256 vslope = _mm256_set1_ps(slope);
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 v = _mm256_loadu_ps(a + i);
    __m256 neg = _mm256_mul_ps(v, vslope);
    __m256 mask = _mm256_cmp_ps(v, zero, _CMP_GT_OQ);
    _mm256_storeu_ps(out + i, _mm256_blendv_ps(neg, v, mask));
  }
  for (; i < n; ++i) out[i] = a[i] > 0.0f ? a[i] : slope * a[i];
}

void magnitude_avx2(float* out, const float* re, const float* im, float tiny,
                    std::size_t n) {
  const __m256 vt = _mm256_set1_ps(tiny);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 r = _mm256_loadu_ps(re + i);
    __m256 m = _mm256_loadu_ps(im + i);
    __m256 s = _mm256_fmadd_ps(r, r, _mm256_fmadd_ps(m, m, vt));
    _mm256_storeu_ps(out + i, _mm256_sqrt_ps(s));
  }
  for (; i < n; ++i)
    out[i] = std::sqrt(re[i] * re[i] + im[i] * im[i] + tiny);
}

float sum_avx2(const float* a, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(a + i));
  float s = hsum8(acc);
  for (; i < n; ++i) s += a[i];
  return s;
}

float sum_abs_avx2(const float* a, std::size_t n) {
  const __m256 signmask = _mm256_castsi256_ps(_mm256_set1_epi32(0x7fffffff));
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    acc = _mm256_add_ps(acc, _mm256_and_ps(_mm256_loadu_ps(a + i), signmask));
  float s = hsum8(acc);
  for (; i < n; ++i) s += std::fabs(a[i]);
  return s;
}

float sum_sq_avx2(const float* a, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 v = _mm256_loadu_ps(a + i);
    acc = _mm256_fmadd_ps(v, v, acc);
  }
  float s = hsum8(acc);
  for (; i < n; ++i) s += a[i] * a[i];
  return s;
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable t = {
      "avx2",
      gemm_nn_avx2,
      gemm_tn_avx2,
      gemm_nt_avx2,
      dot_avx2,
      axpy_avx2,
      vadd_avx2,
      vsub_avx2,
      vmul_avx2,
      vscale_avx2,
      vadd_scalar_avx2,
      leaky_relu_avx2,
      magnitude_avx2,
      sum_avx2,
      sum_abs_avx2,
      sum_sq_avx2,
  };
  return &t;
}

}  // namespace audioinv::kernels

#else

namespace audioinv::kernels {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace audioinv::kernels

#endif

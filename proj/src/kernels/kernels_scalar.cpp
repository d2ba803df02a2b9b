#include "kernels/kernels.hpp"

#include <cmath>

// Reference kernels. Plain loops, no intrinsics; these define the semantics
// the SIMD variants are tested against.

namespace audioinv::kernels {
namespace {

void gemm_nn_scalar(std::size_t m, std::size_t n, std::size_t k,
                    const float* a, const float* b, float* c) {
  for (std::size_t i = 0; i < m; ++i) {
    float* ci = c + i * n;
    const float* ai = a + i * k;
    for (std::size_t l = 0; l < k; ++l) {
      const float av = ai[l];
      const float* bl = b + l * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bl[j];
    }
  }
}

void gemm_tn_scalar(std::size_t m, std::size_t n, std::size_t k,
                    const float* a, const float* b, float* c) {
  for (std::size_t l = 0; l < k; ++l) {
    const float* al = a + l * m;
    const float* bl = b + l * n;
    for (std::size_t i = 0; i < m; ++i) {
      const float av = al[i];
      float* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bl[j];
    }
  }
}

void gemm_nt_scalar(std::size_t m, std::size_t n, std::size_t k,
                    const float* a, const float* b, float* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const float* ai = a + i * k;
    float* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const float* bj = b + j * k;
      float acc = 0.0f;
      for (std::size_t l = 0; l < k; ++l) acc += ai[l] * bj[l];
      ci[j] += acc;
    }
  }
}

float dot_scalar(const float* a, const float* b, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(float* y, float alpha, const float* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void vadd_scalar_impl(float* out, const float* a, const float* b,
                      std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void vsub_scalar_impl(float* out, const float* a, const float* b,
                      std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void vmul_scalar_impl(float* out, const float* a, const float* b,
                      std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void vscale_scalar(float* out, const float* a, float s, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

void vadd_scalar_s(float* out, const float* a, float s, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + s;
}

void leaky_relu_scalar(float* out, const float* a, float slope,
                       std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] > 0.0f ? a[i] : slope * a[i];
}

void magnitude_scalar(float* out, const float* re, const float* im, float tiny,
                      std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    out[i] = std::sqrt(re[i] * re[i] + im[i] * im[i] + tiny);
}

float sum_scalar(const float* a, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

float sum_abs_scalar(const float* a, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += std::fabs(a[i]);
  return acc;
}

float sum_sq_scalar(const float* a, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * a[i];
  return acc;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable t = {
      "scalar",
      gemm_nn_scalar,
      gemm_tn_scalar,
      gemm_nt_scalar,
      dot_scalar,
      axpy_scalar,
      vadd_scalar_impl,
      vsub_scalar_impl,
      vmul_scalar_impl,
      vscale_scalar,
      vadd_scalar_s,
      leaky_relu_scalar,
      magnitude_scalar,
      sum_scalar,
      sum_abs_scalar,
      sum_sq_scalar,
  };
  return t;
}

}  // namespace audioinv::kernels

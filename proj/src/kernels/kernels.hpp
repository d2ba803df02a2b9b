#pragma once

#include <cstddef>

// Low-level float kernels behind the hot loops (matrix products, conv
// inner loops, elementwise math, reductions). Every entry has a scalar
// reference implementation; on x86-64 an AVX2+FMA variant is selected at
// runtime when the CPU supports it. Set AUDIOINV_KERNELS=scalar|avx2 to
// force a table (the equivalence tests exercise both).
//
// Conventions: row-major storage, contiguous buffers, no aliasing between
// outputs and inputs unless stated. gemm_* accumulate into C, callers zero
// C first when they want a plain product.

namespace audioinv::kernels {

struct KernelTable {
  const char* name;

  // C[m,n] += A[m,k] * B[k,n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k,
                  const float* a, const float* b, float* c);
  // C[m,n] += A[k,m]^T * B[k,n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k,
                  const float* a, const float* b, float* c);
  // C[m,n] += A[m,k] * B[n,k]^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k,
                  const float* a, const float* b, float* c);

  float (*dot)(const float* a, const float* b, std::size_t n);
  void (*axpy)(float* y, float alpha, const float* x, std::size_t n);

  void (*vadd)(float* out, const float* a, const float* b, std::size_t n);
  void (*vsub)(float* out, const float* a, const float* b, std::size_t n);
  void (*vmul)(float* out, const float* a, const float* b, std::size_t n);
  void (*vscale)(float* out, const float* a, float s, std::size_t n);
  void (*vadd_scalar)(float* out, const float* a, float s, std::size_t n);

  void (*leaky_relu)(float* out, const float* a, float slope, std::size_t n);
  // out = sqrt(re^2 + im^2 + tiny)
  void (*magnitude)(float* out, const float* re, const float* im, float tiny,
                    std::size_t n);

  float (*sum)(const float* a, std::size_t n);
  float (*sum_abs)(const float* a, std::size_t n);
  float (*sum_sq)(const float* a, std::size_t n);
};

// Active table, chosen once per process.
const KernelTable& active();

const KernelTable& scalar_table();
// nullptr when the CPU (or build) lacks AVX2+FMA.
const KernelTable* avx2_table();

}  // namespace audioinv::kernels

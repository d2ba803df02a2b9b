#include <doctest.h>

#include <cmath>
#include <vector>

#include "core/rng.hpp"
#include "kernels/kernels.hpp"

using audioinv::Rng;
namespace kn = audioinv::kernels;

namespace {

std::vector<float> random_vec(Rng& rng, size_t n, float lo = -1.0f, float hi = 1.0f) {
  std::vector<float> v(n);
  for (auto& x : v) x = rng.uniform_f(lo, hi);
  return v;
}

void check_close(const std::vector<float>& a, const std::vector<float>& b,
                 double rel = 1e-5) {
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({1.0, std::fabs((double)a[i]), std::fabs((double)b[i])});
    CHECK(std::fabs((double)a[i] - (double)b[i]) <= rel * scale);
  }
}

// plain triple loop, the oracle for every gemm variant
void gemm_ref(size_t m, size_t n, size_t k, const float* a, const float* b, float* c,
              bool ta, bool tb) {
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (size_t l = 0; l < k; ++l) {
        const float av = ta ? a[l * m + i] : a[i * k + l];
        const float bv = tb ? b[j * k + l] : b[l * n + j];
        acc += (double)av * (double)bv;
      }
      c[i * n + j] += (float)acc;
    }
}

}  // namespace

struct GemmShape {
  size_t m, n, k;
};

TEST_CASE("gemm variants match the reference triple loop") {
  Rng rng(42);
  const kn::KernelTable& kt = kn::active();
  for (auto [m, n, k] :
       {GemmShape{3, 5, 7}, GemmShape{16, 33, 24}, GemmShape{1, 129, 256},
        GemmShape{31, 17, 64}}) {
    auto a = random_vec(rng, m * k);
    auto b = random_vec(rng, k * n);
    std::vector<float> c0(m * n, 0.5f), c1(m * n, 0.5f);
    kt.gemm_nn(m, n, k, a.data(), b.data(), c0.data());
    gemm_ref(m, n, k, a.data(), b.data(), c1.data(), false, false);
    check_close(c0, c1);

    auto at = random_vec(rng, k * m);
    std::fill(c0.begin(), c0.end(), 0.0f);
    std::fill(c1.begin(), c1.end(), 0.0f);
    kt.gemm_tn(m, n, k, at.data(), b.data(), c0.data());
    gemm_ref(m, n, k, at.data(), b.data(), c1.data(), true, false);
    check_close(c0, c1);

    auto bt = random_vec(rng, n * k);
    std::fill(c0.begin(), c0.end(), 0.0f);
    std::fill(c1.begin(), c1.end(), 0.0f);
    kt.gemm_nt(m, n, k, a.data(), bt.data(), c0.data());
    gemm_ref(m, n, k, a.data(), bt.data(), c1.data(), false, true);
    check_close(c0, c1);
  }
}

TEST_CASE("scalar and avx2 tables agree") {
  const kn::KernelTable* avx2 = kn::avx2_table();
  if (avx2 == nullptr) return;  // nothing to compare on this machine
  const kn::KernelTable& sc = kn::scalar_table();
  Rng rng(7);

  for (size_t n : {1u, 7u, 8u, 9u, 31u, 32u, 33u, 255u, 1000u}) {
    auto a = random_vec(rng, n);
    auto b = random_vec(rng, n);
    std::vector<float> o1(n), o2(n);

    sc.vadd(o1.data(), a.data(), b.data(), n);
    avx2->vadd(o2.data(), a.data(), b.data(), n);
    check_close(o1, o2, 0.0);

    sc.vsub(o1.data(), a.data(), b.data(), n);
    avx2->vsub(o2.data(), a.data(), b.data(), n);
    check_close(o1, o2, 0.0);

    sc.vmul(o1.data(), a.data(), b.data(), n);
    avx2->vmul(o2.data(), a.data(), b.data(), n);
    check_close(o1, o2, 0.0);

    sc.vscale(o1.data(), a.data(), 1.7f, n);
    avx2->vscale(o2.data(), a.data(), 1.7f, n);
    check_close(o1, o2, 0.0);

    sc.vadd_scalar(o1.data(), a.data(), -0.3f, n);
    avx2->vadd_scalar(o2.data(), a.data(), -0.3f, n);
    check_close(o1, o2, 0.0);

    sc.leaky_relu(o1.data(), a.data(), 0.2f, n);
    avx2->leaky_relu(o2.data(), a.data(), 0.2f, n);
    check_close(o1, o2, 0.0);

    sc.magnitude(o1.data(), a.data(), b.data(), 1e-14f, n);
    avx2->magnitude(o2.data(), a.data(), b.data(), 1e-14f, n);
    check_close(o1, o2, 1e-6);

    CHECK(std::fabs(sc.dot(a.data(), b.data(), n) - avx2->dot(a.data(), b.data(), n)) <=
          1e-4 * n);
    CHECK(std::fabs(sc.sum(a.data(), n) - avx2->sum(a.data(), n)) <= 1e-4 * n);
    CHECK(std::fabs(sc.sum_abs(a.data(), n) - avx2->sum_abs(a.data(), n)) <= 1e-4 * n);
    CHECK(std::fabs(sc.sum_sq(a.data(), n) - avx2->sum_sq(a.data(), n)) <= 1e-4 * n);

    std::vector<float> y1 = a, y2 = a;
    sc.axpy(y1.data(), 0.77f, b.data(), n);
    avx2->axpy(y2.data(), 0.77f, b.data(), n);
    check_close(y1, y2, 1e-6);
  }

  // gemm equivalence on assorted shapes
  for (auto [m, n, k] :
       {GemmShape{5, 9, 13}, GemmShape{32, 64, 48}, GemmShape{1, 4096, 192}}) {
    auto a = random_vec(rng, m * k);
    auto b = random_vec(rng, k * n);
    std::vector<float> c1(m * n, 0.0f), c2(m * n, 0.0f);
    sc.gemm_nn(m, n, k, a.data(), b.data(), c1.data());
    avx2->gemm_nn(m, n, k, a.data(), b.data(), c2.data());
    check_close(c1, c2, 1e-4);
  }
}

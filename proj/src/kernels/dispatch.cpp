#include "kernels/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace audioinv::kernels {
namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& select() {
  const char* force = std::getenv("AUDIOINV_KERNELS");
  if (force != nullptr) {
    if (std::strcmp(force, "scalar") == 0) return scalar_table();
    if (std::strcmp(force, "avx2") == 0) {
      const KernelTable* t = avx2_table();
      if (t == nullptr || !cpu_has_avx2_fma())
        throw std::runtime_error("AUDIOINV_KERNELS=avx2 but AVX2+FMA unavailable");
      return *t;
    }
    throw std::runtime_error(std::string("unknown AUDIOINV_KERNELS value: ") + force);
  }
  const KernelTable* t = avx2_table();
  if (t != nullptr && cpu_has_avx2_fma()) return *t;
  return scalar_table();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& t = select();
  return t;
}

}  // namespace audioinv::kernels

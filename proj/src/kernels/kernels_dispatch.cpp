#include <cstdlib>
#include <string>

#include "vln/kernels.hpp"

namespace vln::kernels {

#ifndef VLN_HAVE_AVX2
const KernelTable* avx2_table() { return nullptr; }
#endif

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const KernelTable& resolve() {
  if (const char* env = std::getenv("VLN_SIMD"); env != nullptr && std::string(env) == "scalar") {
    return scalar_table();
  }
  if (const KernelTable* t = avx2_table(); t != nullptr && cpu_has_avx2()) return *t;
  return scalar_table();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& table = resolve();
  return table;
}

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
  }
  return "unknown";
}

}  // namespace vln::kernels

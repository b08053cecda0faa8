#include "attriflip/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace attriflip::kern {
namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Ops& select() {
  const Ops* avx2 = avx2_ops();
  const char* forced = std::getenv("ATTRIFLIP_KERNELS");
  if (forced != nullptr) {
    if (std::strcmp(forced, "avx2") == 0 && avx2 != nullptr &&
        cpu_has_avx2_fma())
      return *avx2;
    return scalar_ops();
  }
  if (avx2 != nullptr && cpu_has_avx2_fma()) return *avx2;
  return scalar_ops();
}

}  // namespace

const Ops& ops() {
  static const Ops& selected = select();
  return selected;
}

}  // namespace attriflip::kern

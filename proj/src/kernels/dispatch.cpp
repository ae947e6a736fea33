#include <atomic>
#include <cstdlib>
#include <string>

#include "cops/kernels.hpp"
#include "kernels_internal.hpp"

namespace cops::kernels {

namespace {

constexpr KernelTable kScalar{Isa::kScalar, scalar::dot, scalar::axpy, scalar::rank1_update,
                              scalar::quad_form};

#if defined(COPS_HAVE_AVX2_KERNELS)
constexpr KernelTable kAvx2{Isa::kAvx2, avx2::dot, avx2::axpy, avx2::rank1_update,
                            avx2::quad_form};
#endif

#if defined(COPS_HAVE_NEON_KERNELS)
constexpr KernelTable kNeon{Isa::kNeon, neon::dot, neon::axpy, neon::rank1_update,
                            neon::quad_form};
#endif

const KernelTable* select() {
  const char* env = std::getenv("COPS_SIMD");
  const std::string want = env ? env : "auto";
  if (want == "scalar") return &kScalar;
  if (want == "avx2" || want == "auto") {
    if (const KernelTable* t = avx2_table()) return t;
  }
  if (want == "neon" || want == "auto") {
    if (const KernelTable* t = neon_table()) return t;
  }
  return &kScalar;
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> table{select()};
  return table;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kAvx2: return "avx2";
    case Isa::kNeon: return "neon";
    case Isa::kScalar: break;
  }
  return "scalar";
}

const KernelTable& scalar_table() { return kScalar; }

const KernelTable* avx2_table() {
#if defined(COPS_HAVE_AVX2_KERNELS)
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return &kAvx2;
#endif
  return nullptr;
}

const KernelTable* neon_table() {
#if defined(COPS_HAVE_NEON_KERNELS)
  return &kNeon;
#else
  return nullptr;
#endif
}

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

void reselect() { slot().store(select(), std::memory_order_release); }

}  // namespace cops::kernels

#pragma once

// Dense arithmetic kernels used by the Newton solver and the Fisher
// information accumulation. Each kernel has a scalar reference and SIMD
// variants; the active table is chosen once at startup from the CPU's
// capabilities and can be pinned with COPS_SIMD=scalar|avx2|neon.

#include <cstddef>
#include <span>
#include <string_view>

namespace cops::kernels {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // a (n x n, row-major) += alpha * x x^T
  void (*rank1_update)(double alpha, const double* x, double* a, std::size_t n);
  // x^T a x for a (n x n, row-major)
  double (*quad_form)(const double* x, const double* a, std::size_t n);
};

const KernelTable& scalar_table();

/// nullptr when the variant was not compiled in or the CPU lacks it.
const KernelTable* avx2_table();
const KernelTable* neon_table();

/// The table every library routine uses.
const KernelTable& active();

/// Re-run the selection (honours COPS_SIMD); test hook.
void reselect();

// Span conveniences over the active table.
inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline void rank1_update(double alpha, std::span<const double> x, std::span<double> a) {
  active().rank1_update(alpha, x.data(), a.data(), x.size());
}
inline double quad_form(std::span<const double> x, std::span<const double> a) {
  return active().quad_form(x.data(), a.data(), x.size());
}

}  // namespace cops::kernels

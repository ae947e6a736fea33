#pragma once

#include <cstddef>

namespace cops::kernels {

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void rank1_update(double alpha, const double* x, double* a, std::size_t n);
double quad_form(const double* x, const double* a, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define COPS_HAVE_AVX2_KERNELS 1
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void rank1_update(double alpha, const double* x, double* a, std::size_t n);
double quad_form(const double* x, const double* a, std::size_t n);
}  // namespace avx2
#endif

#if defined(__aarch64__)
#define COPS_HAVE_NEON_KERNELS 1
namespace neon {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void rank1_update(double alpha, const double* x, double* a, std::size_t n);
double quad_form(const double* x, const double* a, std::size_t n);
}  // namespace neon
#endif

}  // namespace cops::kernels

#include "kernels_internal.hpp"

namespace cops::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void rank1_update(double alpha, const double* x, double* a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) axpy(alpha * x[i], x, a + i * n, n);
}

double quad_form(const double* x, const double* a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * dot(a + i * n, x, n);
  return s;
}

}  // namespace cops::kernels::scalar

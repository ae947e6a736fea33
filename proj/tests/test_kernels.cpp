#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <random>
#include <vector>

#include "cops/kernels.hpp"

using namespace cops::kernels;

namespace {

std::vector<const KernelTable*> simd_tables() {
  std::vector<const KernelTable*> out;
  if (avx2_table()) out.push_back(avx2_table());
  if (neon_table()) out.push_back(neon_table());
  return out;
}

std::vector<double> randn(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

double rel(double a, double b, double scale) { return std::abs(a - b) / std::max(scale, 1.0); }

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("scalar table is the plain loop") {
  const auto& t = scalar_table();
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  CHECK(t.dot(a.data(), b.data(), 3) == 32.0);
  std::vector<double> y{1, 1, 1};
  t.axpy(2.0, a.data(), y.data(), 3);
  CHECK(y == std::vector<double>{3, 5, 7});
  std::vector<double> m(9, 0.0);
  t.rank1_update(1.0, a.data(), m.data(), 3);
  CHECK(m == std::vector<double>{1, 2, 3, 2, 4, 6, 3, 6, 9});
  CHECK(t.quad_form(a.data(), m.data(), 3) == doctest::Approx(196.0));
}

TEST_CASE("SIMD variants match the scalar reference for every length 0..67") {
  std::mt19937_64 rng(11);
  const auto& ref = scalar_table();
  for (const KernelTable* t : simd_tables()) {
    CAPTURE(isa_name(t->isa));
    for (std::size_t n = 0; n <= 67; ++n) {
      CAPTURE(n);
      const auto a = randn(rng, n), b = randn(rng, n), m = randn(rng, n * n);
      double scale = 0.0;
      for (std::size_t i = 0; i < n; ++i) scale += std::abs(a[i] * b[i]);
      CHECK(rel(ref.dot(a.data(), b.data(), n), t->dot(a.data(), b.data(), n), scale) <= 1e-12);

      auto y1 = b, y2 = b;
      ref.axpy(-1.3, a.data(), y1.data(), n);
      t->axpy(-1.3, a.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(rel(y1[i], y2[i], std::abs(y1[i])) <= 1e-12);

      auto m1 = m, m2 = m;
      ref.rank1_update(0.4, a.data(), m1.data(), n);
      t->rank1_update(0.4, a.data(), m2.data(), n);
      for (std::size_t i = 0; i < n * n; ++i) CHECK(rel(m1[i], m2[i], std::abs(m1[i])) <= 1e-12);

      double qscale = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) qscale += std::abs(a[i] * m[i * n + j] * a[j]);
      CHECK(rel(ref.quad_form(a.data(), m.data(), n), t->quad_form(a.data(), m.data(), n), qscale) <= 1e-12);
    }
  }
}

TEST_CASE("COPS_SIMD=scalar pins the reference table") {
  const char* old = std::getenv("COPS_SIMD");
  const std::string saved = old ? old : "";
  setenv("COPS_SIMD", "scalar", 1);
  reselect();
  CHECK(active().isa == Isa::kScalar);
  if (old) setenv("COPS_SIMD", saved.c_str(), 1);
  else unsetenv("COPS_SIMD");
  reselect();
}

}

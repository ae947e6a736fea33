#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "commands.hpp"
#include "cops/kernels.hpp"
#include "cops/sampler.hpp"

namespace cops::cli {

namespace {

struct Instance {
  Coefficients beta;
  std::vector<double> x;
};

Instance random_instance(std::mt19937_64& rng, int K, int d) {
  std::normal_distribution<double> n01;
  Instance in{Coefficients::zeros(K, d), std::vector<double>(static_cast<std::size_t>(d))};
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < d; ++j) in.beta.beta(k, j) = n01(rng);
  for (auto& v : in.x) v = n01(rng);
  return in;
}

std::string io_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

CheckResult check(std::string name, double tol, double measured, bool pass, std::string note = {}) {
  return {std::move(name), tol, measured, pass, std::move(note)};
}

CheckResult label_average(std::mt19937_64& rng) {
  double worst = 0.0;
  for (int K : {1, 2, 5})
    for (int d : {1, 3, 8})
      for (int rep = 0; rep < 12; ++rep) {
        const Instance in = random_instance(rng, K, d);
        const Vector p = class_probabilities(in.beta, in.x);
        Matrix avg = Matrix::Zero(K, K);
        for (int y = 0; y <= K; ++y) avg += p[y] * psi(in.beta, {in.x, y});
        worst = std::max(worst, (avg - phi(in.beta, in.x)).cwiseAbs().maxCoeff());
      }
  return check("label_average", 1e-12, worst, worst <= 1e-12, "sum_y p_y psi = phi");
}

CheckResult gradient_fd(std::mt19937_64& rng) {
  const double h = 1e-5;
  double worst = 0.0;
  std::uniform_int_distribution<int> kd(1, 5), dd(1, 8);
  for (int rep = 0; rep < 100; ++rep) {
    const int K = kd(rng), d = dd(rng);
    const Instance in = random_instance(rng, K, d);
    const int y = std::uniform_int_distribution<int>(0, K)(rng);
    const Vector g = loss_gradient(in.beta, {in.x, y});
    const Vector b = in.beta.vectorized();
    Vector fd(b.size());
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      Vector bp = b, bm = b;
      bp[i] += h;
      bm[i] -= h;
      fd[i] = (cross_entropy(Coefficients::from_vector(bp, K, d), {in.x, y}) -
               cross_entropy(Coefficients::from_vector(bm, K, d), {in.x, y})) / (2 * h);
    }
    worst = std::max(worst, (g - fd).norm() / std::max(fd.norm(), 1e-3));
  }
  return check("gradient_fd", 1e-6, worst, worst <= 1e-6, "central differences, h=1e-5");
}

CheckResult hessian_fd(std::mt19937_64& rng) {
  const double h = 1e-5;
  double worst = 0.0;
  std::uniform_int_distribution<int> kd(1, 5), dd(1, 8);
  for (int rep = 0; rep < 100; ++rep) {
    const int K = kd(rng), d = dd(rng);
    const Instance in = random_instance(rng, K, d);
    const int y = std::uniform_int_distribution<int>(0, K)(rng);
    const Matrix H = loss_hessian(in.beta, in.x);
    const Vector b = in.beta.vectorized();
    Matrix fd(b.size(), b.size());
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      Vector bp = b, bm = b;
      bp[i] += h;
      bm[i] -= h;
      fd.col(i) = (loss_gradient(Coefficients::from_vector(bp, K, d), {in.x, y}) -
                   loss_gradient(Coefficients::from_vector(bm, K, d), {in.x, y})) / (2 * h);
    }
    worst = std::max(worst, (H - fd).norm() / std::max(fd.norm(), 1e-3));
  }
  return check("hessian_fd", 1e-5, worst, worst <= 1e-5, "differences of the gradient");
}

CheckResult phi_row_sums(std::mt19937_64& rng) {
  double worst = 0.0;
  double min_eig = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int K = 1 + rep % 5, d = 1 + rep % 8;
    const Instance in = random_instance(rng, K, d);
    const Vector p = class_probabilities(in.beta, in.x);
    const Matrix ph = phi(in.beta, in.x);
    const Vector rows = ph.rowwise().sum();
    for (int k = 0; k < K; ++k) worst = std::max(worst, std::abs(rows[k] - p[k + 1] * p[0]));
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Matrix>(ph).eigenvalues().minCoeff());
    const int y = rep % (K + 1);
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Matrix>(psi(in.beta, {in.x, y})).eigenvalues().minCoeff());
  }
  const bool ok = worst <= 1e-12 && min_eig >= -1e-12;
  return check("phi_row_sums_psd", 1e-12, worst, ok, "min eigenvalue " + io_g(min_eig));
}

CheckResult cauchy_schwarz(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.01, 1.0);
  std::vector<double> u(20);
  for (auto& v : u) v = unif(rng);
  double total = 0.0;
  for (double v : u) total += v;
  std::vector<double> opt(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) opt[i] = u[i] / total;
  const double best = subsample_objective(u, opt);
  int strictly = 0, violations = 0;
  std::exponential_distribution<double> ex(1.0);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> pi(u.size());
    double s = 0.0;
    for (auto& v : pi) s += (v = ex(rng));
    for (auto& v : pi) v /= s;
    const double obj = subsample_objective(u, pi);
    if (obj < best) ++violations;
    if (best < obj) ++strictly;
  }
  const double frac = strictly / 1000.0;
  return check("cauchy_schwarz", 0.99, frac, violations == 0 && frac >= 0.99,
               "fraction of random pi strictly worse than pi ~ u");
}

CheckResult binary_corollary(std::mt19937_64& rng) {
  double worst = 0.0;
  std::normal_distribution<double> n01;
  for (int rep = 0; rep < 100; ++rep) {
    const int d = 1 + rep % 6;
    const Instance in = random_instance(rng, 1, d);
    RowMatrix xs(4 * d, d);
    for (Eigen::Index i = 0; i < xs.size(); ++i) xs.data()[i] = n01(rng);
    const FisherInfo info = fisher_info(in.beta, Dataset::unlabeled(xs, 1));
    const InverseInfo inv(info);
    const Eigen::Map<const Vector> x(in.x.data(), d);
    Matrix m = info.m;
    m.diagonal().array() += inv.ridge();
    const double lev = x.dot(m.ldlt().solve(x));
    const double p1 = class_probabilities(in.beta, in.x)[1];
    for (int y : {0, 1}) {
      const double want = std::pow((y == 1 ? 1.0 : 0.0) - p1, 2) * lev;
      worst = std::max(worst, std::abs(exact_score_coreset(in.beta, inv, {in.x, y}) - want) / std::max(want, 1e-300));
    }
    const double want = (p1 - p1 * p1) * lev;
    worst = std::max(worst, std::abs(exact_score_active(in.beta, inv, in.x) - want) / std::max(want, 1e-300));
  }
  return check("binary_corollary", 1e-10, worst, worst <= 1e-10, "relative error");
}

CheckResult kernel_equivalence(std::mt19937_64& rng) {
  const auto& ref = kernels::scalar_table();
  const auto& act = kernels::active();
  std::normal_distribution<double> n01;
  double worst = 0.0;
  for (std::size_t n = 0; n <= 67; ++n) {
    std::vector<double> a(n), b(n), m(n * n), m2;
    for (auto& v : a) v = n01(rng);
    for (auto& v : b) v = n01(rng);
    for (auto& v : m) v = n01(rng);
    double scale = 1.0;
    for (double v : a) scale += std::abs(v);
    worst = std::max(worst, std::abs(ref.dot(a.data(), b.data(), n) - act.dot(a.data(), b.data(), n)) / scale);
    std::vector<double> y1 = b, y2 = b;
    ref.axpy(0.7, a.data(), y1.data(), n);
    act.axpy(0.7, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(y1[i] - y2[i]) / scale);
    m2 = m;
    std::vector<double> m1 = m;
    ref.rank1_update(0.3, a.data(), m1.data(), n);
    act.rank1_update(0.3, a.data(), m2.data(), n);
    for (std::size_t i = 0; i < n * n; ++i) worst = std::max(worst, std::abs(m1[i] - m2[i]) / (scale * scale));
    worst = std::max(worst, std::abs(ref.quad_form(a.data(), m.data(), n) - act.quad_form(a.data(), m.data(), n)) /
                                (scale * scale * static_cast<double>(n + 1)));
  }
  return check("kernel_equivalence", 1e-12, worst, worst <= 1e-12,
               std::string("scalar vs ") + std::string(kernels::isa_name(act.isa)));
}

// Well-specified d = 3, K = 2 data with an intercept.
Dataset well_specified_data(std::size_t n, std::uint64_t seed) {
  Coefficients beta = Coefficients::zeros(2, 3);
  beta.beta << 0.3, 0.8, -0.5, -0.2, 0.4, 0.9;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  RowMatrix x(static_cast<Eigen::Index>(n), 3);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x(r, 0) = 1.0;
    x(r, 1) = n01(rng);
    x(r, 2) = n01(rng);
    const Vector p = class_probabilities(beta, {x.data() + 3 * i, 3});
    double c = unif(rng);
    int k = 0;
    while (k < 2 && c >= p[k]) c -= p[k++];
    y[i] = k;
  }
  return Dataset::labeled(std::move(x), std::move(y), 2);
}

}  // namespace

std::vector<CheckResult> run_selfcheck(std::uint64_t seed, bool quick) {
  std::mt19937_64 rng(seed);
  std::vector<CheckResult> out;
  out.push_back(label_average(rng));
  out.push_back(gradient_fd(rng));
  out.push_back(hessian_fd(rng));
  out.push_back(phi_row_sums(rng));
  out.push_back(cauchy_schwarz(rng));
  out.push_back(binary_corollary(rng));
  out.push_back(kernel_equivalence(rng));
  if (quick) return out;

  const int members = 200;
  const std::size_t shard = 5000;
  const Dataset probe = well_specified_data(members * shard, seed + 1);
  const ProbeEnsemble e = train_ensemble(probe, members, EnsembleMode::kIndependentSplits, seed + 2);
  const FitReport big = fit_mle(probe);
  const InverseInfo inv(fisher_info(big.beta, probe));
  const Dataset eval = well_specified_data(500, seed + 3);
  std::vector<double> err_c, err_a;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    const double ec = exact_score_coreset(big.beta, inv, eval.sample(i));
    const double ea = exact_score_active(big.beta, inv, eval.row(i));
    err_c.push_back(std::abs(shard * ensemble_score_coreset(e, eval.sample(i)) - ec) / ec);
    err_a.push_back(std::abs(shard * ensemble_score_active(e, eval.row(i)) - ea) / ea);
  }
  const double mc = summarize(err_c).median;
  const double ma = summarize(err_a).median;
  out.push_back(check("ensemble_vs_exact", 0.15, std::max(mc, ma), mc <= 0.15 && ma <= 0.15,
                      "median relative error, coreset " + std::to_string(mc) + ", active " + std::to_string(ma)));
  return out;
}

}  // namespace cops::cli

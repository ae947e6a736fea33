#include <doctest.h>

#include <cmath>
#include <random>

#include "cops/error.hpp"
#include "cops/uncertainty.hpp"
#include "oracles.hpp"

using namespace cops;

namespace {

Dataset random_labeled(std::mt19937_64& rng, const Coefficients& beta, std::size_t n) {
  const int d = beta.dim();
  RowMatrix x(static_cast<Eigen::Index>(n), d);
  std::vector<int> y(n);
  std::uniform_real_distribution<double> unif;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = oracle::random_x(rng, d);
    for (int j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), j) = row[static_cast<std::size_t>(j)];
    const auto p = oracle::naive_probabilities(beta, row);
    double c = unif(rng);
    int k = 0;
    while (k < beta.classes() && c >= p[static_cast<std::size_t>(k)]) c -= p[static_cast<std::size_t>(k++)];
    y[i] = k;
  }
  return Dataset::labeled(std::move(x), std::move(y), beta.classes());
}

ProbeEnsemble random_ensemble(std::mt19937_64& rng, int M, int K, int d) {
  std::vector<Coefficients> members;
  for (int m = 0; m < M; ++m) members.push_back(oracle::random_beta(rng, K, d, 0.5));
  return ProbeEnsemble::from_members(std::move(members), 100, EnsembleMode::kIndependentSplits);
}

// Dense oracle: Tr((A (x) xx^T) (M + ridge I)^{-1}) via an explicit inverse.
double dense_trace(const Matrix& a, const std::vector<double>& x, const Matrix& m, double ridge) {
  Matrix reg = m;
  reg.diagonal().array() += ridge;
  return (oracle::kron(a, oracle::outer(x)) * reg.inverse()).trace();
}

}  // namespace

TEST_SUITE("uncertainty") {

TEST_CASE("ensemble mean and shape checks") {
  std::mt19937_64 rng(31);
  const ProbeEnsemble e = random_ensemble(rng, 5, 2, 3);
  RowMatrix sum = RowMatrix::Zero(2, 3);
  for (const auto& m : e.members) sum += m.beta;
  CHECK((e.mean.beta - sum / 5.0).cwiseAbs().maxCoeff() <= 1e-12);
  std::vector<Coefficients> bad{Coefficients::zeros(1, 2), Coefficients::zeros(2, 2)};
  CHECK_THROWS_AS(ProbeEnsemble::from_members(bad, 1, EnsembleMode::kBootstrap), ContractViolation);
  std::vector<Coefficients> one{Coefficients::zeros(1, 2)};
  CHECK_THROWS_AS(ProbeEnsemble::from_members(one, 1, EnsembleMode::kBootstrap), ContractViolation);
}

TEST_CASE("logit covariance: two-point variance, identical members, zero x") {
  Coefficients a = Coefficients::zeros(1, 2), b = Coefficients::zeros(1, 2);
  a.beta << 1.0, 2.0;
  b.beta << -0.5, 0.25;
  const ProbeEnsemble e = ProbeEnsemble::from_members({a, b}, 10, EnsembleMode::kIndependentSplits);
  const std::vector<double> x{0.7, -1.1};
  const double la = 0.7 * 1.0 - 1.1 * 2.0, lb = 0.7 * -0.5 - 1.1 * 0.25;
  CHECK(logit_covariance(e, x)(0, 0) == doctest::Approx((la - lb) * (la - lb) / 2).epsilon(1e-14));

  const std::vector<double> zero{0.0, 0.0};
  CHECK(logit_covariance(e, zero).isZero(0.0));
  const ProbeEnsemble same = ProbeEnsemble::from_members({a, a, a}, 10, EnsembleMode::kIndependentSplits);
  CHECK(logit_covariance(same, x).isZero(0.0));
  CHECK(ensemble_score_coreset(same, {x, 1}) == 0.0);
  CHECK(ensemble_score_active(same, x) == 0.0);
}

TEST_CASE("logit covariance is the M-1 sample covariance and PSD") {
  std::mt19937_64 rng(32);
  const ProbeEnsemble e = random_ensemble(rng, 7, 3, 4);
  const auto x = oracle::random_x(rng, 4);
  Matrix logits(7, 3);
  for (int m = 0; m < 7; ++m) logits.row(m) = e.members[static_cast<std::size_t>(m)].logits(x).transpose();
  const Matrix centered = logits.rowwise() - logits.colwise().mean();
  const Matrix want = centered.transpose() * centered / 6.0;
  const Matrix got = logit_covariance(e, x);
  CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(got).eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("ensemble scores: trace forms, label average, scaling") {
  std::mt19937_64 rng(33);
  for (int rep = 0; rep < 30; ++rep) {
    const int K = 1 + rep % 4, d = 1 + rep % 5;
    const ProbeEnsemble e = random_ensemble(rng, 4, K, d);
    const auto x = oracle::random_x(rng, d);
    const Matrix sigma = logit_covariance(e, x);
    const Vector p = class_probabilities(e.mean, x);
    double avg = 0.0;
    for (int y = 0; y <= K; ++y) {
      const double u = ensemble_score_coreset(e, {x, y});
      CHECK(u == doctest::Approx((psi(e.mean, {x, y}) * sigma).trace()).epsilon(1e-12));
      avg += p[y] * u;
    }
    const double ua = ensemble_score_active(e, x);
    CHECK(ua == doctest::Approx((phi(e.mean, x) * sigma).trace()).epsilon(1e-12));
    CHECK(std::abs(avg - ua) <= 1e-12 * std::max(1.0, ua));

    // Doubling every member's deviation from the mean quadruples Sigma;
    // scaling by sqrt(2) doubles it.
    std::vector<Coefficients> wide;
    for (const auto& m : e.members)
      wide.push_back(Coefficients{e.mean.beta + std::sqrt(2.0) * (m.beta - e.mean.beta)});
    const ProbeEnsemble e2 = ProbeEnsemble::from_members(wide, 4, e.mode);
    CHECK(ensemble_score_active(e2, x) == doctest::Approx(2.0 * ua).epsilon(1e-10));
  }
}

TEST_CASE("exact scores match the dense Kronecker oracle") {
  std::mt19937_64 rng(34);
  for (int rep = 0; rep < 30; ++rep) {
    const int K = 1 + rep % 3, d = 1 + rep % 4;
    const auto b = oracle::random_beta(rng, K, d);
    const Dataset data = random_labeled(rng, b, static_cast<std::size_t>(10 * K * d));
    const FisherInfo info = fisher_info(b, data);
    const InverseInfo inv(info);
    const auto x = oracle::random_x(rng, d);
    for (int y = 0; y <= K; ++y) {
      const double want = dense_trace(psi(b, {x, y}), x, info.m, inv.ridge());
      CHECK(std::abs(exact_score_coreset(b, inv, {x, y}) - want) <= 1e-10 * std::max(1.0, want));
    }
    const double want = dense_trace(phi(b, x), x, info.m, inv.ridge());
    CHECK(std::abs(exact_score_active(b, inv, x) - want) <= 1e-10 * std::max(1.0, want));
    CHECK(exact_score_active(b, info, x) == doctest::Approx(exact_score_active(b, inv, x)).epsilon(1e-14));
  }
}

TEST_CASE("exact scores: binary closed forms, label average, zero x, default ridge") {
  std::mt19937_64 rng(35);
  for (int rep = 0; rep < 50; ++rep) {
    const int d = 1 + rep % 5;
    const auto b = oracle::random_beta(rng, 1, d);
    const Dataset data = random_labeled(rng, b, static_cast<std::size_t>(20 * d));
    const FisherInfo info = fisher_info(b, data);
    const InverseInfo inv(info);
    CHECK(inv.ridge() == doctest::Approx(1e-10 * info.m.trace() / d).epsilon(1e-14));
    const auto x = oracle::random_x(rng, d);
    const Eigen::Map<const Vector> xv(x.data(), d);
    Matrix reg = info.m;
    reg.diagonal().array() += inv.ridge();
    const double lev = xv.dot(reg.inverse() * xv);
    const double p1 = oracle::naive_probabilities(b, x)[1];
    for (int y : {0, 1}) {
      const double want = std::pow((y == 1) - p1, 2) * lev;
      CHECK(std::abs(exact_score_coreset(b, inv, {x, y}) - want) <= 1e-10 * want);
    }
    const double want_a = (p1 - p1 * p1) * lev;
    CHECK(std::abs(exact_score_active(b, inv, x) - want_a) <= 1e-10 * want_a);
  }

  for (int rep = 0; rep < 20; ++rep) {
    const int K = 2 + rep % 3, d = 2 + rep % 3;
    const auto b = oracle::random_beta(rng, K, d);
    const Dataset data = random_labeled(rng, b, 200);
    const InverseInfo inv(fisher_info(b, data));
    const auto x = oracle::random_x(rng, d);
    const Vector p = class_probabilities(b, x);
    double avg = 0.0;
    for (int y = 0; y <= K; ++y) avg += p[y] * exact_score_coreset(b, inv, {x, y});
    CHECK(std::abs(avg - exact_score_active(b, inv, x)) <= 1e-10 * std::max(1.0, avg));
    const std::vector<double> zero(static_cast<std::size_t>(d), 0.0);
    CHECK(exact_score_coreset(b, inv, {zero, 1}) == 0.0);
    CHECK(exact_score_active(b, inv, zero) == 0.0);
  }
}

TEST_CASE("coreset score vanishes as the label becomes certain") {
  std::mt19937_64 rng(36);
  const auto b0 = oracle::random_beta(rng, 2, 2);
  const Dataset data = random_labeled(rng, b0, 200);
  const InverseInfo inv(fisher_info(b0, data));
  const std::vector<double> x{1.0, 0.5};
  double prev = INFINITY;
  for (double scale : {1.0, 5.0, 20.0, 60.0}) {
    Coefficients b = Coefficients::zeros(2, 2);
    b.beta << 0.0, 0.0, scale, scale;  // class 2 dominates at x
    const double u = exact_score_coreset(b, inv, {x, 2});
    CHECK(u <= prev);
    prev = u;
  }
  CHECK(prev < 1e-30);
}

TEST_CASE("singular information after the ridge is an error") {
  FisherInfo info;
  info.m = Matrix::Zero(2, 2);
  info.m(0, 0) = -1.0;
  CHECK_THROWS_AS(InverseInfo(info, 0.0), SingularInformation);
}

TEST_CASE("train_ensemble: shards, bootstrap, determinism, size check") {
  std::mt19937_64 rng(37);
  Coefficients b = Coefficients::zeros(2, 3);
  b.beta << 0.5, -0.3, 0.2, -0.4, 0.6, 0.1;
  const Dataset probe = random_labeled(rng, b, 1000);

  const ProbeEnsemble e1 = train_ensemble(probe, 4, EnsembleMode::kIndependentSplits, 9);
  const ProbeEnsemble e2 = train_ensemble(probe, 4, EnsembleMode::kIndependentSplits, 9);
  CHECK(e1.size() == 4);
  CHECK(e1.probe_size == 250);
  for (std::size_t m = 0; m < 4; ++m) CHECK(e1.members[m].beta == e2.members[m].beta);
  const ProbeEnsemble e3 = train_ensemble(probe, 4, EnsembleMode::kIndependentSplits, 10);
  CHECK(e3.members[0].beta != e1.members[0].beta);

  const ProbeEnsemble bs = train_ensemble(probe, 3, EnsembleMode::kBootstrap, 9);
  CHECK(bs.probe_size == probe.size());
  CHECK(bs.members[0].beta != bs.members[1].beta);

  // Fitting one shard twice gives identical members and zero covariance.
  const Coefficients fit = fit_mle(probe).beta;
  const ProbeEnsemble twins = ProbeEnsemble::from_members({fit, fit}, probe.size(), EnsembleMode::kIndependentSplits);
  const std::vector<double> x{0.3, 0.2, -0.1};
  CHECK(logit_covariance(twins, x).isZero(0.0));

  CHECK_THROWS_AS(train_ensemble(probe, 1, EnsembleMode::kIndependentSplits, 0), ContractViolation);
  CHECK_THROWS_AS(train_ensemble(probe.subset(std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8}), 2,
                                 EnsembleMode::kIndependentSplits, 0),
                  ContractViolation);
}

TEST_CASE("score_dataset: ensemble and exact, active ignores labels") {
  std::mt19937_64 rng(38);
  Coefficients b = Coefficients::zeros(1, 2);
  b.beta << 1.0, -1.0;
  const Dataset probe = random_labeled(rng, b, 2000);
  const ProbeEnsemble e = train_ensemble(probe, 5, EnsembleMode::kIndependentSplits, 1);
  const Dataset data = random_labeled(rng, b, 50);
  const ScoreSet sc = score_dataset(e, data, ScoreKind::kCoreset, Estimator::kEnsemble);
  const ScoreSet sa = score_dataset(e, data.without_labels(), ScoreKind::kActive, Estimator::kEnsemble);
  const ScoreSet sa2 = score_dataset(e, data, ScoreKind::kActive, Estimator::kEnsemble);
  CHECK(sa.u == sa2.u);
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(sc.u[i] == ensemble_score_coreset(e, data.sample(i)));
    CHECK(sc.u[i] >= 0.0);
  }
  const ScoreSet ex = score_dataset(e, data, ScoreKind::kActive, Estimator::kExact);
  const InverseInfo inv(fisher_info(e.mean, data));
  for (std::size_t i = 0; i < data.size(); ++i) CHECK(ex.u[i] == exact_score_active(e.mean, inv, data.row(i)));
  CHECK_THROWS_AS(score_dataset(e, data.without_labels(), ScoreKind::kCoreset, Estimator::kEnsemble), ContractViolation);
}

}

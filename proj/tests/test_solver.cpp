#include <doctest.h>

#include <cmath>
#include <random>

#include "cops/error.hpp"
#include "cops/simulation.hpp"
#include "cops/solver.hpp"
#include "oracles.hpp"

using namespace cops;

namespace {

Dataset softmax_data(std::mt19937_64& rng, const Coefficients& beta, std::size_t n) {
  const int d = beta.dim();
  RowMatrix x(static_cast<Eigen::Index>(n), d);
  std::vector<int> y(n);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> unif;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(static_cast<std::size_t>(d));
    for (auto& v : row) v = n01(rng);
    for (int j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), j) = row[static_cast<std::size_t>(j)];
    const auto p = oracle::naive_probabilities(beta, row);
    double c = unif(rng);
    int k = 0;
    while (k < beta.classes() && c >= p[static_cast<std::size_t>(k)]) c -= p[static_cast<std::size_t>(k++)];
    y[i] = k;
  }
  return Dataset::labeled(std::move(x), std::move(y), beta.classes());
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("labels independent of x give coefficients near zero") {
  std::mt19937_64 rng(21);
  const std::size_t n = 4000;
  RowMatrix x(n, 2);
  std::vector<int> y(n);
  std::normal_distribution<double> n01;
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < n; ++i) {
    x(static_cast<Eigen::Index>(i), 0) = n01(rng);
    x(static_cast<Eigen::Index>(i), 1) = n01(rng);
    y[i] = coin(rng);
  }
  const FitReport r = fit_mle(Dataset::labeled(x, y, 1));
  REQUIRE(r.converged);
  // Standard error of each coefficient is about 2 / sqrt(n).
  const double se = 2.0 / std::sqrt(static_cast<double>(n));
  CHECK(r.beta.beta.cwiseAbs().maxCoeff() <= 3.0 * se);
}

TEST_CASE("well-specified simulation data recovers beta* within 0.1") {
  SimulationSpec spec = default_spec();
  const Dataset data = generate_dataset(spec, {}, 123);
  const FitReport r = fit_mle(data);
  REQUIRE(r.converged);
  CHECK(std::abs(r.beta.beta(0, 0) - 2.0) <= 0.1);
  CHECK(std::abs(r.beta.beta(0, 1) - 2.0) <= 0.1);
}

TEST_CASE("converged fits are first-order stationary") {
  std::mt19937_64 rng(22);
  for (int rep = 0; rep < 10; ++rep) {
    const auto beta = oracle::random_beta(rng, 1 + rep % 3, 2 + rep % 3);
    const Dataset data = softmax_data(rng, beta, 500);
    const FitReport r = fit_mle(data);
    REQUIRE(r.converged);
    CHECK(r.final_grad_norm <= FitConfig{}.grad_tol);
    const ObjectiveTerms t = evaluate_objective(r.beta, data, {}, false);
    CHECK(t.gradient.cwiseAbs().maxCoeff() / t.total_weight <= 1e-8);
    CHECK(r.final_loss == doctest::Approx(dataset_loss(r.beta, data)).epsilon(1e-12));
  }
}

TEST_CASE("loss never increases across Newton iterations") {
  std::mt19937_64 rng(23);
  const auto beta = oracle::random_beta(rng, 3, 4, 2.0);
  const Dataset data = softmax_data(rng, beta, 300);
  double prev = dataset_loss(Coefficients::zeros(3, 4), data);
  for (int iters = 1; iters <= 12; ++iters) {
    FitConfig cfg;
    cfg.max_iters = iters;
    const FitReport r = fit_mle(data, cfg);
    CHECK(r.final_loss <= prev);
    prev = r.final_loss;
  }
}

TEST_CASE("weights: equal weights, zero weights, rescaling") {
  std::mt19937_64 rng(24);
  const auto beta = oracle::random_beta(rng, 2, 3);
  const Dataset data = softmax_data(rng, beta, 400);
  const FitReport plain = fit_mle(data);
  const std::vector<double> threes(data.size(), 3.0);
  const FitReport equal = fit_weighted_mle(data, threes);
  CHECK((plain.beta.beta - equal.beta.beta).cwiseAbs().maxCoeff() <= 1e-8);

  std::vector<double> w(data.size());
  std::uniform_real_distribution<double> unif(0.1, 5.0);
  for (auto& v : w) v = unif(rng);
  const FitReport a = fit_weighted_mle(data, w);
  for (double c : {1e-3, 7.0, 1e4}) {
    std::vector<double> scaled = w;
    for (auto& v : scaled) v *= c;
    CHECK((fit_weighted_mle(data, scaled).beta.beta - a.beta.beta).cwiseAbs().maxCoeff() < 1e-8);
  }

  std::vector<double> drop = w;
  drop[0] = drop[5] = 0.0;
  std::vector<std::size_t> keep;
  std::vector<double> kept_w;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (drop[i] != 0.0) {
      keep.push_back(i);
      kept_w.push_back(drop[i]);
    }
  const FitReport zeroed = fit_weighted_mle(data, drop);
  const FitReport deleted = fit_weighted_mle(data.subset(keep), kept_w);
  CHECK((zeroed.beta.beta - deleted.beta.beta).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("merged duplicate rows give the row-wise fit") {
  SimulationSpec spec = default_spec();
  const Dataset data = generate_dataset(spec, spec.cases[2].zeta, 5);
  std::vector<std::size_t> idx;
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  for (int i = 0; i < 2000; ++i) idx.push_back(pick(rng));
  const Dataset sub = data.subset(idx);
  std::vector<double> w(sub.size());
  std::uniform_real_distribution<double> unif(0.5, 2.0);
  for (auto& v : w) v = unif(rng);
  const FitReport rows = fit_weighted_mle(sub, w);
  const WeightedRows merged = compress_duplicates(sub, w);
  const FitReport atoms = fit_weighted_mle(merged.data, merged.weights);
  CHECK(merged.data.size() <= 6);
  CHECK((rows.beta.beta - atoms.beta.beta).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("preconditions and non-convergence") {
  RowMatrix x(3, 1);
  x << 1, 2, 3;
  CHECK_THROWS_AS(fit_mle(Dataset::labeled(x, {1, 1, 1}, 1)), ContractViolation);
  const Dataset two = Dataset::labeled(x, {0, 1, 0}, 1);
  const std::vector<double> zeros(3, 0.0), short_w(2, 1.0), neg{1.0, -1.0, 1.0};
  CHECK_THROWS_AS(fit_weighted_mle(two, zeros), ContractViolation);
  CHECK_THROWS_AS(fit_weighted_mle(two, short_w), ContractViolation);
  CHECK_THROWS_AS(fit_weighted_mle(two, neg), ContractViolation);
  // Only one class survives the zero weights.
  const std::vector<double> one_class{1.0, 0.0, 1.0};
  CHECK_THROWS_AS(fit_weighted_mle(two, one_class), ContractViolation);

  // Separable data: the MLE does not exist, so the iteration cannot converge.
  RowMatrix sx(4, 1);
  sx << -2, -1, 1, 2;
  FitConfig cfg;
  cfg.max_iters = 5;
  const FitReport r = fit_mle(Dataset::labeled(sx, {0, 0, 1, 1}, 1), cfg);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 5);

  FitConfig bad;
  bad.ridge = 0.0;
  CHECK_THROWS_AS(fit_mle(two, bad), ContractViolation);
}

TEST_CASE("fits are deterministic") {
  std::mt19937_64 rng(25);
  const auto beta = oracle::random_beta(rng, 2, 3);
  const Dataset data = softmax_data(rng, beta, 300);
  const FitReport a = fit_mle(data);
  const FitReport b = fit_mle(data);
  CHECK(a.beta.beta == b.beta.beta);
  CHECK(a.iterations == b.iterations);
  CHECK(a.final_grad_norm == b.final_grad_norm);
  CHECK(a.final_loss == b.final_loss);
}

TEST_CASE("subsample estimates concentrate as r grows") {
  SimulationSpec spec = default_spec();
  const Dataset data = generate_dataset(spec, {}, 77);
  const FitReport full = fit_mle(data);
  const std::size_t n = data.size();
  // pi alternates between 0.5/n and 1.5/n (mean 1/n), then is renormalized.
  std::vector<double> pi(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += (pi[i] = (i % 2 ? 1.5 : 0.5));
  for (auto& v : pi) v /= total;
  auto median_error = [&](std::size_t r) {
    std::vector<double> err;
    for (int t = 0; t < 30; ++t) {
      std::discrete_distribution<std::size_t> pick(pi.begin(), pi.end());
      std::mt19937_64 rng(1000 * r + static_cast<std::size_t>(t));
      std::vector<std::size_t> idx(r);
      std::vector<double> w(r);
      for (std::size_t j = 0; j < r; ++j) {
        idx[j] = pick(rng);
        w[j] = 1.0 / pi[idx[j]];
      }
      const WeightedRows merged = compress_duplicates(data.subset(idx), w);
      err.push_back((fit_weighted_mle(merged.data, merged.weights).beta.beta - full.beta.beta).norm());
    }
    return summarize(err).median;
  };
  CHECK(median_error(8000) < median_error(500));
}

}

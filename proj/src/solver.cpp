#include "cops/solver.hpp"

#include <cmath>
#include <string>

#include "cops/error.hpp"

namespace cops {

void FitConfig::validate() const {
  require(grad_tol > 0.0 && max_iters > 0 && ridge > 0.0 && step_halving_max > 0,
          "fit configuration values must all be positive");
}

namespace {

Vector newton_direction(const Matrix& hessian, const Vector& gradient, double ridge) {
  Matrix system = hessian;
  system.diagonal().array() += ridge;
  Eigen::LLT<Matrix> llt(system);
  if (llt.info() == Eigen::Success) return llt.solve(gradient);
  Eigen::LDLT<Matrix> ldlt(system);
  return ldlt.solve(gradient);
}

void check_classes(const Dataset& data, std::span<const double> weights) {
  std::vector<bool> seen(static_cast<std::size_t>(data.classes()) + 1, false);
  int distinct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!weights.empty() && weights[i] == 0.0) continue;
    const auto y = static_cast<std::size_t>(data.label(i));
    if (!seen[y]) {
      seen[y] = true;
      ++distinct;
    }
  }
  require(distinct >= 2, "fitting needs at least two distinct classes (found " +
                             std::to_string(distinct) + ")");
}

}  // namespace

FitReport fit_weighted_mle(const Dataset& data, std::span<const double> weights,
                           const FitConfig& config) {
  config.validate();
  require(data.is_labeled(), "fitting needs a labeled dataset");
  require(!data.empty(), "fitting on an empty dataset");
  require(weights.empty() || weights.size() == data.size(), "weights length differs from dataset size");
  double total = 0.0;
  for (double w : weights) {
    require(std::isfinite(w) && w >= 0.0, "weights must be finite and nonnegative");
    total += w;
  }
  require(weights.empty() || total > 0.0, "weights are all zero");
  check_classes(data, weights);

  const int K = data.classes();
  const int d = data.dim();
  // Normalized weight sum over (1/n) scaling, to report the caller's loss.
  const double loss_scale = (weights.empty() ? static_cast<double>(data.size()) : total) /
                            static_cast<double>(data.size());

  FitReport report;
  report.beta = Coefficients::zeros(K, d);
  ObjectiveTerms terms = evaluate_objective(report.beta, data, weights, true);

  for (int iter = 0; iter < config.max_iters; ++iter) {
    report.final_grad_norm = terms.gradient.lpNorm<Eigen::Infinity>();
    if (report.final_grad_norm <= config.grad_tol) {
      report.converged = true;
      break;
    }
    const Vector step = newton_direction(terms.hessian, terms.gradient, config.ridge);
    const Vector current = report.beta.vectorized();
    double scale = 1.0;
    bool accepted = false;
    for (int h = 0; h <= config.step_halving_max; ++h, scale *= 0.5) {
      Coefficients trial = Coefficients::from_vector(current - scale * step, K, d);
      ObjectiveTerms trial_terms = evaluate_objective(trial, data, weights, true);
      if (std::isfinite(trial_terms.loss) && trial_terms.loss <= terms.loss) {
        report.beta = std::move(trial);
        terms = std::move(trial_terms);
        accepted = true;
        break;
      }
    }
    report.iterations = iter + 1;
    if (!accepted) break;
  }
  report.final_grad_norm = terms.gradient.lpNorm<Eigen::Infinity>();
  report.converged = report.final_grad_norm <= config.grad_tol;
  report.final_loss = terms.loss * loss_scale;
  return report;
}

FitReport fit_mle(const Dataset& data, const FitConfig& config) {
  return fit_weighted_mle(data, {}, config);
}

}  // namespace cops

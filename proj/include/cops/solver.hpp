#pragma once

// Damped Newton fitting of softmax regression, unweighted or with
// inverse-probability weights.

#include <span>

#include "cops/model.hpp"

namespace cops {

struct FitConfig {
  double grad_tol = 1e-8;   // on the inf-norm of the weight-normalized gradient
  int max_iters = 100;
  double ridge = 1e-8;      // added to the Newton system, numerical only
  int step_halving_max = 30;

  void validate() const;
};

struct FitReport {
  Coefficients beta;
  int iterations = 0;
  double final_grad_norm = 0.0;
  bool converged = false;
  double final_loss = 0.0;  // (1/n) sum_i w_i l_i at beta
};

/// MLE of the average cross-entropy, starting from beta = 0.
FitReport fit_mle(const Dataset& data, const FitConfig& config = {});

/// Minimizer of (1/n) sum_i w_i l_i. Only the argmin matters, so the
/// iteration works on sum_i w_i l_i / sum_i w_i and is invariant to a
/// common rescaling of the weights.
FitReport fit_weighted_mle(const Dataset& data, std::span<const double> weights,
                           const FitConfig& config = {});

}  // namespace cops

#pragma once

// Softmax-regression calculus: class probabilities, cross-entropy, score
// vectors, the phi/psi matrices, per-sample gradients and Hessians, and the
// Fisher information averaged over a dataset.
//
// Class 0 is the reference class with coefficients fixed at zero; the
// remaining K classes own the rows of a K x d coefficient matrix. The
// canonical vectorization concatenates the rows [beta_1; beta_2; ...; beta_K]
// so that block (k, l) of phi (x) xx^T is phi_kl * xx^T.

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cops {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using FeatureView = std::span<const double>;

struct Coefficients {
  RowMatrix beta;  // K x d

  static Coefficients zeros(int classes, int dim);
  static Coefficients from_vector(const Vector& vec, int classes, int dim);

  int classes() const { return static_cast<int>(beta.rows()); }
  int dim() const { return static_cast<int>(beta.cols()); }
  Vector vectorized() const;
  /// K logits x^T beta_k (the reference logit 0 is implicit).
  Vector logits(FeatureView x) const;
};

struct LabeledSample {
  FeatureView x;
  int y = 0;
};

/// n rows of dimension d; labels in [0, K] when labeled.
class Dataset {
 public:
  Dataset() = default;
  static Dataset labeled(RowMatrix x, std::vector<int> y, int classes);
  static Dataset unlabeled(RowMatrix x, int classes);

  int dim() const { return static_cast<int>(x_.cols()); }
  int classes() const { return classes_; }
  std::size_t size() const { return static_cast<std::size_t>(x_.rows()); }
  bool empty() const { return size() == 0; }
  bool is_labeled() const { return labeled_; }

  FeatureView row(std::size_t i) const {
    return {x_.data() + i * static_cast<std::size_t>(x_.cols()), static_cast<std::size_t>(x_.cols())};
  }
  int label(std::size_t i) const { return y_[i]; }
  LabeledSample sample(std::size_t i) const { return {row(i), y_[i]}; }

  const RowMatrix& features() const { return x_; }
  const std::vector<int>& labels() const { return y_; }

  Dataset without_labels() const;
  Dataset subset(std::span<const std::size_t> indices) const;
  /// Number of distinct labels present (labeled datasets only).
  int distinct_labels() const;

 private:
  RowMatrix x_;
  std::vector<int> y_;
  int classes_ = 0;
  bool labeled_ = false;
};

struct FisherInfo {
  Matrix m;  // Kd x Kd
  std::size_t n = 0;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  bool near_singular = false;
};

/// Receives non-fatal diagnostics (near-singular information, ...). The
/// default sink writes "warning: <message>" to stderr.
void set_diagnostic_sink(std::function<void(const std::string&)> sink);
void emit_diagnostic(const std::string& message);

/// p_0..p_K, stabilized by subtracting the largest logit.
Vector class_probabilities(const Coefficients& beta, FeatureView x);
/// Same from precomputed K logits.
Vector probabilities_from_logits(const Vector& logits);

/// -log p_y via log-sum-exp.
double cross_entropy(const Coefficients& beta, const LabeledSample& sample);

/// (1/n) sum_i w_i l_i; unit weights when `weights` is empty.
double dataset_loss(const Coefficients& beta, const Dataset& data,
                    std::span<const double> weights = {});

/// s_k = delta_k(y) - p_k for k = 1..K.
Vector score_vector(const Coefficients& beta, const LabeledSample& sample);

/// -s (x) x under the canonical vectorization.
Vector loss_gradient(const Coefficients& beta, const LabeledSample& sample);

/// diag(p_1..p_K) - p p^T over the non-reference classes.
Matrix phi(const Coefficients& beta, FeatureView x);
Matrix phi_from_probabilities(const Vector& p);

/// s s^T.
Matrix psi(const Coefficients& beta, const LabeledSample& sample);

/// phi (x) xx^T.
Matrix loss_hessian(const Coefficients& beta, FeatureView x);

/// (1/n) sum_i phi(beta; x_i) (x) x_i x_i^T. Emits a diagnostic when the
/// smallest eigenvalue falls below 1e-10 times the largest.
FisherInfo fisher_info(const Coefficients& beta, const Dataset& data);

/// Dense Kronecker product; reference construction used by tests and the
/// self-check.
Matrix kronecker(const Matrix& a, const Matrix& b);

/// Loss, gradient and (optionally) Hessian of the weight-normalized
/// objective sum_i w_i l_i / sum_i w_i in one pass.
struct ObjectiveTerms {
  double loss = 0.0;
  Vector gradient;
  Matrix hessian;
  double total_weight = 0.0;
};
ObjectiveTerms evaluate_objective(const Coefficients& beta, const Dataset& data,
                                  std::span<const double> weights, bool with_hessian);


/// Identical (x, y) rows merged into one row carrying the summed weight, in
/// order of first appearance. Fits and losses on the result agree with the
/// row-wise computation up to summation order.
struct WeightedRows {
  Dataset data;
  std::vector<double> weights;
  std::vector<std::size_t> group;  // source row -> merged row
};
WeightedRows compress_duplicates(const Dataset& data, std::span<const double> weights = {});

}  // namespace cops

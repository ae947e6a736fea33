#include "cops/model.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <utility>

#include "cops/error.hpp"
#include "cops/kernels.hpp"

namespace cops {

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

std::function<void(const std::string&)>& sink() {
  static std::function<void(const std::string&)> s = [](const std::string& msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return s;
}

void check_dims(const Coefficients& beta, FeatureView x) {
  if (static_cast<std::size_t>(beta.dim()) != x.size()) {
    std::ostringstream os;
    os << "dimension mismatch: coefficients have d=" << beta.dim() << ", feature vector has "
       << x.size();
    throw ContractViolation(os.str());
  }
}

void check_label(const Coefficients& beta, int y) {
  if (y < 0 || y > beta.classes()) {
    throw ContractViolation("label " + std::to_string(y) + " outside [0, " +
                            std::to_string(beta.classes()) + "]");
  }
}

void check_dataset(const Coefficients& beta, const Dataset& data) {
  require(beta.dim() == data.dim() && beta.classes() == data.classes(),
          "dimension mismatch between coefficients (K=" + std::to_string(beta.classes()) +
              ", d=" + std::to_string(beta.dim()) + ") and dataset (K=" +
              std::to_string(data.classes()) + ", d=" + std::to_string(data.dim()) + ")");
}

// Neumaier-compensated running sum. Plain summation over ~1e5 rows loses
// enough digits to hide the decrease of a late Newton step.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    comp_ += std::abs(sum_) >= std::abs(v) ? (sum_ - t) + v : (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// log(1 + sum_k exp(z_k)) without overflow.
double log_partition(const Vector& z) {
  const double m = std::max(0.0, z.size() ? z.maxCoeff() : 0.0);
  double s = std::exp(-m);
  for (Eigen::Index k = 0; k < z.size(); ++k) s += std::exp(z[k] - m);
  return m + std::log(s);
}

// H (row-major Kd x Kd, upper blocks only) += w * phi (x) xx^T, where xx is
// the d x d outer product already formed in `outer`.
void add_kron_block(const Vector& p, double w, std::span<const double> outer, int d,
                    std::span<double> h) {
  const int K = static_cast<int>(p.size()) - 1;
  const std::size_t kd = static_cast<std::size_t>(K) * d;
  const auto& kt = kernels::active();
  for (int k = 0; k < K; ++k) {
    const double pk = p[k + 1];
    for (int l = k; l < K; ++l) {
      const double phi_kl = (k == l ? pk : 0.0) - pk * p[l + 1];
      const double c = w * phi_kl;
      if (c == 0.0) continue;
      for (int i = 0; i < d; ++i) {
        double* dst = h.data() + (static_cast<std::size_t>(k) * d + i) * kd +
                      static_cast<std::size_t>(l) * d;
        kt.axpy(c, outer.data() + static_cast<std::size_t>(i) * d, dst, d);
      }
    }
  }
}

Matrix symmetrize_upper_blocks(const RowMatrix& h, int K, int d) {
  Matrix out = h;
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < k; ++l) out.block(k * d, l * d, d, d) = h.block(l * d, k * d, d, d).transpose();
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

Coefficients Coefficients::zeros(int classes, int dim) {
  require(classes >= 1 && dim >= 1, "coefficients need K >= 1 and d >= 1");
  return {RowMatrix::Zero(classes, dim)};
}

Coefficients Coefficients::from_vector(const Vector& vec, int classes, int dim) {
  require(vec.size() == static_cast<Eigen::Index>(classes) * dim,
          "vectorized coefficients have the wrong length");
  Coefficients c{RowMatrix(classes, dim)};
  std::copy(vec.data(), vec.data() + vec.size(), c.beta.data());
  return c;
}

Vector Coefficients::vectorized() const {
  return Eigen::Map<const Vector>(beta.data(), beta.size());
}

Vector Coefficients::logits(FeatureView x) const {
  check_dims(*this, x);
  const auto& kt = kernels::active();
  Vector z(classes());
  for (int k = 0; k < classes(); ++k) z[k] = kt.dot(beta.data() + static_cast<std::size_t>(k) * dim(), x.data(), x.size());
  return z;
}

// ---------------------------------------------------------------------------

Dataset Dataset::labeled(RowMatrix x, std::vector<int> y, int classes) {
  require(classes >= 1, "dataset needs K >= 1");
  require(static_cast<std::size_t>(x.rows()) == y.size(), "feature rows and labels differ in count");
  require(x.allFinite(), "features must be finite");
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0 || y[i] > classes)
      throw ContractViolation("label " + std::to_string(y[i]) + " at row " + std::to_string(i) +
                              " outside [0, " + std::to_string(classes) + "]");
  }
  Dataset d;
  d.x_ = std::move(x);
  d.y_ = std::move(y);
  d.classes_ = classes;
  d.labeled_ = true;
  return d;
}

Dataset Dataset::unlabeled(RowMatrix x, int classes) {
  require(classes >= 1, "dataset needs K >= 1");
  require(x.allFinite(), "features must be finite");
  Dataset d;
  d.x_ = std::move(x);
  d.classes_ = classes;
  return d;
}

Dataset Dataset::without_labels() const { return unlabeled(x_, classes_); }

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  RowMatrix x(static_cast<Eigen::Index>(indices.size()), x_.cols());
  std::vector<int> y;
  if (labeled_) y.reserve(indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    require(indices[j] < size(), "subset index out of range");
    x.row(static_cast<Eigen::Index>(j)) = x_.row(static_cast<Eigen::Index>(indices[j]));
    if (labeled_) y.push_back(y_[indices[j]]);
  }
  return labeled_ ? labeled(std::move(x), std::move(y), classes_) : unlabeled(std::move(x), classes_);
}

int Dataset::distinct_labels() const {
  std::vector<bool> seen(static_cast<std::size_t>(classes_) + 1, false);
  int count = 0;
  for (int v : y_) {
    if (!seen[static_cast<std::size_t>(v)]) {
      seen[static_cast<std::size_t>(v)] = true;
      ++count;
    }
  }
  return count;
}

// ---------------------------------------------------------------------------

void set_diagnostic_sink(std::function<void(const std::string&)> s) {
  std::lock_guard lock(sink_mutex());
  sink() = std::move(s);
}

void emit_diagnostic(const std::string& message) {
  std::lock_guard lock(sink_mutex());
  if (sink()) sink()(message);
}

Vector probabilities_from_logits(const Vector& z) {
  const double m = std::max(0.0, z.size() ? z.maxCoeff() : 0.0);
  Vector p(z.size() + 1);
  p[0] = std::exp(-m);
  for (Eigen::Index k = 0; k < z.size(); ++k) p[k + 1] = std::exp(z[k] - m);
  p /= p.sum();
  return p;
}

Vector class_probabilities(const Coefficients& beta, FeatureView x) {
  return probabilities_from_logits(beta.logits(x));
}

double cross_entropy(const Coefficients& beta, const LabeledSample& sample) {
  check_label(beta, sample.y);
  const Vector z = beta.logits(sample.x);
  const double zy = sample.y == 0 ? 0.0 : z[sample.y - 1];
  return std::max(0.0, log_partition(z) - zy);
}

double dataset_loss(const Coefficients& beta, const Dataset& data, std::span<const double> weights) {
  check_dataset(beta, data);
  require(data.is_labeled(), "dataset_loss needs labels");
  require(!data.empty(), "dataset_loss on an empty dataset");
  require(weights.empty() || weights.size() == data.size(), "weights length differs from dataset size");
  CompensatedSum total;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    require(w >= 0.0 && std::isfinite(w), "weights must be finite and nonnegative");
    if (w == 0.0) continue;
    total.add(w * cross_entropy(beta, data.sample(i)));
  }
  return total.value() / static_cast<double>(data.size());
}

Vector score_vector(const Coefficients& beta, const LabeledSample& sample) {
  check_label(beta, sample.y);
  const Vector p = class_probabilities(beta, sample.x);
  Vector s = -p.tail(beta.classes());
  if (sample.y > 0) s[sample.y - 1] += 1.0;
  return s;
}

Vector loss_gradient(const Coefficients& beta, const LabeledSample& sample) {
  const Vector s = score_vector(beta, sample);
  const int d = beta.dim();
  Vector g(static_cast<Eigen::Index>(beta.classes()) * d);
  for (int k = 0; k < beta.classes(); ++k)
    for (int j = 0; j < d; ++j) g[k * d + j] = -s[k] * sample.x[static_cast<std::size_t>(j)];
  return g;
}

Matrix phi_from_probabilities(const Vector& p) {
  const Eigen::Index K = p.size() - 1;
  const Vector q = p.tail(K);
  Matrix out = -q * q.transpose();
  out.diagonal() += q;
  return out;
}

Matrix phi(const Coefficients& beta, FeatureView x) {
  return phi_from_probabilities(class_probabilities(beta, x));
}

Matrix psi(const Coefficients& beta, const LabeledSample& sample) {
  const Vector s = score_vector(beta, sample);
  return s * s.transpose();
}

Matrix loss_hessian(const Coefficients& beta, FeatureView x) {
  const Vector p = class_probabilities(beta, x);
  const int K = beta.classes();
  const int d = beta.dim();
  std::vector<double> outer(static_cast<std::size_t>(d) * d, 0.0);
  kernels::rank1_update(1.0, x, outer);
  RowMatrix h = RowMatrix::Zero(K * d, K * d);
  add_kron_block(p, 1.0, outer, d, {h.data(), static_cast<std::size_t>(h.size())});
  return symmetrize_upper_blocks(h, K, d);
}

FisherInfo fisher_info(const Coefficients& beta, const Dataset& data) {
  check_dataset(beta, data);
  require(!data.empty(), "fisher_info on an empty dataset");
  const int K = beta.classes();
  const int d = beta.dim();
  RowMatrix h = RowMatrix::Zero(K * d, K * d);
  std::vector<double> outer(static_cast<std::size_t>(d) * d);
  const std::span<double> hs{h.data(), static_cast<std::size_t>(h.size())};
  for (std::size_t i = 0; i < data.size(); ++i) {
    const FeatureView x = data.row(i);
    const Vector p = class_probabilities(beta, x);
    std::fill(outer.begin(), outer.end(), 0.0);
    kernels::rank1_update(1.0, x, outer);
    add_kron_block(p, 1.0, outer, d, hs);
  }
  FisherInfo info;
  info.m = symmetrize_upper_blocks(h, K, d) / static_cast<double>(data.size());
  info.n = data.size();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(info.m, Eigen::EigenvaluesOnly);
  info.min_eigenvalue = eig.eigenvalues().minCoeff();
  info.max_eigenvalue = eig.eigenvalues().maxCoeff();
  info.near_singular = !(info.min_eigenvalue >= 1e-10 * info.max_eigenvalue) || info.max_eigenvalue <= 0.0;
  if (info.near_singular) {
    std::ostringstream os;
    os << "Fisher information is near-singular (min eigenvalue " << info.min_eigenvalue
       << ", max " << info.max_eigenvalue << "); scores rely on the ridge";
    emit_diagnostic(os.str());
  }
  return info;
}

Matrix kronecker(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

ObjectiveTerms evaluate_objective(const Coefficients& beta, const Dataset& data,
                                  std::span<const double> weights, bool with_hessian) {
  check_dataset(beta, data);
  require(data.is_labeled(), "objective needs labels");
  require(weights.empty() || weights.size() == data.size(), "weights length differs from dataset size");
  const int K = beta.classes();
  const int d = beta.dim();
  const std::size_t kd = static_cast<std::size_t>(K) * d;
  const auto& kt = kernels::active();

  ObjectiveTerms out;
  out.gradient = Vector::Zero(static_cast<Eigen::Index>(kd));
  RowMatrix h;
  if (with_hessian) h = RowMatrix::Zero(static_cast<Eigen::Index>(kd), static_cast<Eigen::Index>(kd));
  std::vector<double> outer(static_cast<std::size_t>(d) * d);
  Vector z(K);
  CompensatedSum loss;
  CompensatedSum total;

  for (std::size_t i = 0; i < data.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    if (w == 0.0) continue;
    const FeatureView x = data.row(i);
    for (int k = 0; k < K; ++k) z[k] = kt.dot(beta.beta.data() + static_cast<std::size_t>(k) * d, x.data(), x.size());
    const int y = data.label(i);
    const double lp = log_partition(z);
    loss.add(w * (lp - (y == 0 ? 0.0 : z[y - 1])));
    total.add(w);
    const Vector p = probabilities_from_logits(z);
    for (int k = 0; k < K; ++k) {
      const double resid = p[k + 1] - (y == k + 1 ? 1.0 : 0.0);
      kt.axpy(w * resid, x.data(), out.gradient.data() + static_cast<std::size_t>(k) * d, x.size());
    }
    if (with_hessian) {
      std::fill(outer.begin(), outer.end(), 0.0);
      kt.rank1_update(1.0, x.data(), outer.data(), x.size());
      add_kron_block(p, w, outer, d, {h.data(), static_cast<std::size_t>(h.size())});
    }
  }
  out.total_weight = total.value();
  if (out.total_weight > 0.0) {
    out.loss = loss.value() / out.total_weight;
    out.gradient /= out.total_weight;
    if (with_hessian) out.hessian = symmetrize_upper_blocks(h, K, d) / out.total_weight;
  } else if (with_hessian) {
    out.hessian = Matrix::Zero(static_cast<Eigen::Index>(kd), static_cast<Eigen::Index>(kd));
  }
  return out;
}


WeightedRows compress_duplicates(const Dataset& data, std::span<const double> weights) {
  require(weights.empty() || weights.size() == data.size(), "weights length differs from dataset size");
  const int d = data.dim();
  std::map<std::pair<std::vector<double>, int>, std::size_t> slot;
  std::vector<std::size_t> first;
  std::vector<double> summed;
  std::vector<std::size_t> group(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.row(i);
    const int y = data.is_labeled() ? data.label(i) : 0;
    auto [it, inserted] = slot.try_emplace({std::vector<double>(x.begin(), x.end()), y}, first.size());
    if (inserted) {
      first.push_back(i);
      summed.push_back(0.0);
    }
    summed[it->second] += weights.empty() ? 1.0 : weights[i];
    group[i] = it->second;
  }
  RowMatrix x(static_cast<Eigen::Index>(first.size()), d);
  std::vector<int> y;
  y.reserve(first.size());
  for (std::size_t j = 0; j < first.size(); ++j) {
    x.row(static_cast<Eigen::Index>(j)) = data.features().row(static_cast<Eigen::Index>(first[j]));
    if (data.is_labeled()) y.push_back(data.label(first[j]));
  }
  WeightedRows out;
  out.data = data.is_labeled() ? Dataset::labeled(std::move(x), std::move(y), data.classes())
                               : Dataset::unlabeled(std::move(x), data.classes());
  out.weights = std::move(summed);
  out.group = std::move(group);
  return out;
}

}  // namespace cops

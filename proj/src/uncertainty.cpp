#include "cops/uncertainty.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include "cops/error.hpp"
#include "cops/kernels.hpp"

namespace cops {

namespace {

double clamp_score(double u) { return u > 0.0 ? u : 0.0; }

// v (x) x under the canonical layout.
Vector kron_vec(const Vector& v, FeatureView x) {
  const auto d = static_cast<Eigen::Index>(x.size());
  Vector out(v.size() * d);
  for (Eigen::Index k = 0; k < v.size(); ++k)
    for (Eigen::Index j = 0; j < d; ++j) out[k * d + j] = v[k] * x[static_cast<std::size_t>(j)];
  return out;
}

void check_shape(const ProbeEnsemble& e, FeatureView x) {
  require(e.size() >= 2, "ensemble needs at least two members");
  require(static_cast<std::size_t>(e.dim()) == x.size(), "dimension mismatch between ensemble and x");
}

}  // namespace

std::string_view to_string(EnsembleMode mode) {
  return mode == EnsembleMode::kBootstrap ? "bootstrap" : "independent_splits";
}
std::string_view to_string(ScoreKind kind) { return kind == ScoreKind::kActive ? "active" : "coreset"; }
std::string_view to_string(Estimator e) { return e == Estimator::kExact ? "exact" : "ensemble"; }

EnsembleMode parse_ensemble_mode(std::string_view t) {
  if (t == "independent_splits" || t == "splits") return EnsembleMode::kIndependentSplits;
  if (t == "bootstrap") return EnsembleMode::kBootstrap;
  throw ContractViolation("unknown ensemble mode '" + std::string(t) + "'");
}
ScoreKind parse_score_kind(std::string_view t) {
  if (t == "coreset") return ScoreKind::kCoreset;
  if (t == "active") return ScoreKind::kActive;
  throw ContractViolation("unknown score kind '" + std::string(t) + "'");
}
Estimator parse_estimator(std::string_view t) {
  if (t == "exact") return Estimator::kExact;
  if (t == "ensemble") return Estimator::kEnsemble;
  throw ContractViolation("unknown estimator '" + std::string(t) + "'");
}

ProbeEnsemble ProbeEnsemble::from_members(std::vector<Coefficients> members, std::size_t probe_size,
                                          EnsembleMode mode) {
  require(members.size() >= 2, "ensemble needs at least two members");
  const int K = members.front().classes();
  const int d = members.front().dim();
  // Averaging offsets from the first member keeps identical members'
  // mean bit-exact.
  const RowMatrix& base = members.front().beta;
  RowMatrix offset = RowMatrix::Zero(K, d);
  for (const auto& m : members) {
    require(m.classes() == K && m.dim() == d, "ensemble members disagree on (K, d)");
    require(m.beta.allFinite(), "ensemble member has non-finite coefficients");
    offset += m.beta - base;
  }
  ProbeEnsemble e;
  e.mean = Coefficients{base + offset / static_cast<double>(members.size())};
  e.members = std::move(members);
  e.probe_size = probe_size;
  e.mode = mode;
  return e;
}

ProbeEnsemble train_ensemble(const Dataset& probe, int members, EnsembleMode mode,
                             std::uint64_t seed, const FitConfig& config) {
  require(members >= 2, "ensemble needs at least two members");
  require(probe.is_labeled(), "probe set must be labeled");
  const std::size_t n = probe.size();
  const auto m_count = static_cast<std::size_t>(members);
  std::vector<Coefficients> fitted;
  fitted.reserve(m_count);

  if (mode == EnsembleMode::kIndependentSplits) {
    const std::size_t shard = n / m_count;
    require(shard >= static_cast<std::size_t>(probe.classes() + probe.dim()),
            "probe set too small: " + std::to_string(members) + " shards of " +
                std::to_string(shard) + " rows each, need at least K + d = " +
                std::to_string(probe.classes() + probe.dim()));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t m = 0; m < m_count; ++m) {
      const std::span<const std::size_t> idx(order.data() + m * shard, shard);
      fitted.push_back(fit_mle(probe.subset(idx), config).beta);
    }
    return ProbeEnsemble::from_members(std::move(fitted), shard, mode);
  }

  require(n >= static_cast<std::size_t>(probe.classes() + probe.dim()),
          "probe set too small for bootstrap resampling");
  std::vector<std::size_t> idx(n);
  for (std::size_t m = 0; m < m_count; ++m) {
    std::mt19937_64 rng(seed + m);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (auto& i : idx) i = pick(rng);
    fitted.push_back(fit_mle(probe.subset(idx), config).beta);
  }
  return ProbeEnsemble::from_members(std::move(fitted), n, mode);
}

Matrix logit_covariance(const ProbeEnsemble& ensemble, FeatureView x) {
  check_shape(ensemble, x);
  const Vector center = ensemble.mean.logits(x);
  const int K = ensemble.classes();
  Matrix sigma = Matrix::Zero(K, K);
  for (const auto& member : ensemble.members) {
    const Vector diff = member.logits(x) - center;
    sigma.noalias() += diff * diff.transpose();
  }
  return sigma / static_cast<double>(ensemble.size() - 1);
}

double ensemble_score_coreset(const ProbeEnsemble& ensemble, const LabeledSample& sample) {
  const Matrix sigma = logit_covariance(ensemble, sample.x);
  const Vector s = score_vector(ensemble.mean, sample);
  // sigma is symmetric, so its column-major storage reads as row-major.
  return clamp_score(kernels::quad_form({s.data(), static_cast<std::size_t>(s.size())},
                                        {sigma.data(), static_cast<std::size_t>(sigma.size())}));
}

double ensemble_score_active(const ProbeEnsemble& ensemble, FeatureView x) {
  const Matrix sigma = logit_covariance(ensemble, x);
  const Matrix ph = phi(ensemble.mean, x);
  return clamp_score((ph.cwiseProduct(sigma)).sum());
}

InverseInfo::InverseInfo(const FisherInfo& info, std::optional<double> ridge) {
  require(info.m.rows() == info.m.cols() && info.m.rows() > 0, "Fisher information must be square");
  size_ = info.m.rows();
  ridge_ = ridge.value_or(1e-10 * info.m.trace() / static_cast<double>(size_));
  require(ridge_ >= 0.0, "ridge must be nonnegative");
  Matrix system = info.m;
  system.diagonal().array() += ridge_;
  llt_.compute(system);
  if (llt_.info() != Eigen::Success)
    throw SingularInformation("Fisher information is not positive definite even with ridge " +
                              std::to_string(ridge_));
}

double InverseInfo::quadratic(const Vector& v) const {
  require(v.size() == size_, "vector length differs from the information matrix");
  return llt_.matrixL().solve(v).squaredNorm();
}

double exact_score_coreset(const Coefficients& beta, const InverseInfo& inverse,
                           const LabeledSample& sample) {
  require(static_cast<Eigen::Index>(beta.classes()) * beta.dim() == inverse.size(),
          "information matrix does not match (K, d)");
  return clamp_score(inverse.quadratic(kron_vec(score_vector(beta, sample), sample.x)));
}

double exact_score_active(const Coefficients& beta, const InverseInfo& inverse, FeatureView x) {
  require(static_cast<Eigen::Index>(beta.classes()) * beta.dim() == inverse.size(),
          "information matrix does not match (K, d)");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(phi(beta, x));
  double total = 0.0;
  for (Eigen::Index j = 0; j < eig.eigenvalues().size(); ++j) {
    const double lambda = eig.eigenvalues()[j];
    if (lambda <= 0.0) continue;
    total += lambda * inverse.quadratic(kron_vec(eig.eigenvectors().col(j), x));
  }
  return clamp_score(total);
}

double exact_score_coreset(const Coefficients& beta, const FisherInfo& info,
                           const LabeledSample& sample, std::optional<double> ridge) {
  return exact_score_coreset(beta, InverseInfo(info, ridge), sample);
}

double exact_score_active(const Coefficients& beta, const FisherInfo& info, FeatureView x,
                          std::optional<double> ridge) {
  return exact_score_active(beta, InverseInfo(info, ridge), x);
}

ScoreSet score_dataset(const ProbeEnsemble& ensemble, const Dataset& data, ScoreKind kind,
                       Estimator estimator) {
  require(ensemble.classes() == data.classes() && ensemble.dim() == data.dim(),
          "ensemble (K, d) does not match the dataset");
  require(kind == ScoreKind::kActive || data.is_labeled(), "coreset scores need labels");
  ScoreSet out;
  out.kind = kind;
  out.estimator = estimator;
  out.u.resize(data.size());
  if (estimator == Estimator::kEnsemble) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      out.u[i] = kind == ScoreKind::kCoreset ? ensemble_score_coreset(ensemble, data.sample(i))
                                             : ensemble_score_active(ensemble, data.row(i));
    }
    return out;
  }
  const InverseInfo inverse(fisher_info(ensemble.mean, data));
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.u[i] = kind == ScoreKind::kCoreset ? exact_score_coreset(ensemble.mean, inverse, data.sample(i))
                                           : exact_score_active(ensemble.mean, inverse, data.row(i));
  }
  return out;
}

}  // namespace cops

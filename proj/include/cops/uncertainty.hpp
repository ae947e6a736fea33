#pragma once

// Per-sample uncertainty scores. The exact route evaluates the trace of
// (psi or phi) (x) xx^T against the inverse Fisher information; the ensemble
// route replaces the inverse by the covariance of logits across M models
// fitted on independent probe shards. With n' samples per shard,
// n' * ensemble score approximates the exact score.

#include <Eigen/Cholesky>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "cops/model.hpp"
#include "cops/solver.hpp"

namespace cops {

enum class EnsembleMode { kIndependentSplits, kBootstrap };
enum class ScoreKind { kCoreset, kActive };
enum class Estimator { kExact, kEnsemble };

std::string_view to_string(EnsembleMode mode);
std::string_view to_string(ScoreKind kind);
std::string_view to_string(Estimator estimator);
EnsembleMode parse_ensemble_mode(std::string_view text);
ScoreKind parse_score_kind(std::string_view text);
Estimator parse_estimator(std::string_view text);

struct ProbeEnsemble {
  std::vector<Coefficients> members;
  Coefficients mean;
  std::size_t probe_size = 0;  // per-member training-set size n'
  EnsembleMode mode = EnsembleMode::kIndependentSplits;

  /// Validates shapes and recomputes the mean.
  static ProbeEnsemble from_members(std::vector<Coefficients> members, std::size_t probe_size,
                                    EnsembleMode mode);
  int classes() const { return mean.classes(); }
  int dim() const { return mean.dim(); }
  std::size_t size() const { return members.size(); }
};

/// Fits M members. Independent splits shuffle the probe set with `seed` and
/// cut it into M disjoint equal shards; bootstrap draws member m's resample of
/// the full probe set with seed + m.
ProbeEnsemble train_ensemble(const Dataset& probe, int members, EnsembleMode mode,
                             std::uint64_t seed, const FitConfig& config = {});

/// Sample covariance (M - 1 divisor) of the members' K logits at x.
Matrix logit_covariance(const ProbeEnsemble& ensemble, FeatureView x);

/// s^T Sigma_M(x) s with s evaluated at the ensemble mean.
double ensemble_score_coreset(const ProbeEnsemble& ensemble, const LabeledSample& sample);
/// Tr(phi Sigma_M(x)) with phi evaluated at the ensemble mean.
double ensemble_score_active(const ProbeEnsemble& ensemble, FeatureView x);

/// Cholesky factor of M_X + ridge * I, shared across many exact scores.
class InverseInfo {
 public:
  /// ridge defaults to 1e-10 * Tr(M_X) / (Kd).
  explicit InverseInfo(const FisherInfo& info, std::optional<double> ridge = std::nullopt);

  /// v^T (M_X + ridge I)^{-1} v.
  double quadratic(const Vector& v) const;
  double ridge() const { return ridge_; }
  Eigen::Index size() const { return size_; }

 private:
  Eigen::LLT<Matrix> llt_;
  double ridge_ = 0.0;
  Eigen::Index size_ = 0;
};

double exact_score_coreset(const Coefficients& beta, const InverseInfo& inverse,
                           const LabeledSample& sample);
double exact_score_active(const Coefficients& beta, const InverseInfo& inverse, FeatureView x);

double exact_score_coreset(const Coefficients& beta, const FisherInfo& info,
                           const LabeledSample& sample, std::optional<double> ridge = std::nullopt);
double exact_score_active(const Coefficients& beta, const FisherInfo& info, FeatureView x,
                          std::optional<double> ridge = std::nullopt);

struct ScoreSet {
  std::vector<double> u;
  ScoreKind kind = ScoreKind::kCoreset;
  Estimator estimator = Estimator::kEnsemble;
};

/// Scores every row of `data`. The exact estimator uses the ensemble mean as
/// the plug-in coefficients and M_X evaluated on `data` itself. Active scores
/// never read labels.
ScoreSet score_dataset(const ProbeEnsemble& ensemble, const Dataset& data, ScoreKind kind,
                       Estimator estimator);

}  // namespace cops

#pragma once

// Monte-Carlo harness for the corrupted two-dimensional logistic experiment:
// atom-structured data, a probe ensemble trained on corrupted data, several
// sampling methods sharing each trial's data, and regret / parameter error
// measured on a clean test set.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cops/model.hpp"
#include "cops/sampler.hpp"
#include "cops/solver.hpp"
#include "cops/uncertainty.hpp"

namespace cops {

struct Atom {
  std::vector<double> x;
  std::size_t count = 0;
};

struct CorruptionCase {
  std::string name;
  std::vector<double> zeta;  // logit offset per atom
};

enum class SamplingMethod { kUniform, kVanilla, kClip };
enum class LabelAccess { kWithLabels, kWithoutLabels };

struct MethodSpec {
  SamplingMethod method = SamplingMethod::kUniform;
  double clip_multiplier = 0.0;  // kClip only
  LabelAccess access = LabelAccess::kWithLabels;

  /// Stable identifier, e.g. "uniform", "vanilla.with_labels",
  /// "clip3.without_labels". Draw seeds are keyed by it.
  std::string id() const;
};

/// uniform, then vanilla and one clip per multiplier for each label access.
std::vector<MethodSpec> default_methods(std::span<const double> clip_multipliers);

struct SimulationSpec {
  std::vector<Atom> atoms;
  Coefficients beta_star;
  std::vector<CorruptionCase> cases;
  std::size_t r = 1000;
  std::vector<double> clip_multipliers{3.0, 10.0};
  int trials = 50;
  std::uint64_t seed = 0;
  int members = 10;
  EnsembleMode ensemble_mode = EnsembleMode::kIndependentSplits;
  std::optional<std::vector<std::size_t>> probe_counts;  // default: atom counts
  double beta_floor = 0.1;
  ScoreTransform transform = ScoreTransform::kSqrt;
  FitConfig fit;

  void validate() const;
  int dim() const { return beta_star.dim(); }
};

/// Atoms [1, 0] x 1000, [0.1, 0.1] x 1e5, [0, 1] x 1e5; beta* = [2, 2];
/// zeta(x1) in {0, -1, -3}; r = 1000.
SimulationSpec default_spec();

/// Atom j repeated counts[j] times with y ~ Bernoulli(sigmoid(x_j^T beta* +
/// zeta_j)); an empty zeta gives clean labels. counts defaults to the atom
/// counts.
Dataset generate_dataset(const SimulationSpec& spec, std::span<const double> zeta, std::uint64_t seed,
                         std::span<const std::size_t> counts = {});

/// L(beta_bar; test) - L(beta*; test).
double regret(const Coefficients& beta_bar, const Coefficients& beta_star, const Dataset& test);
/// Same on merged rows: weighted mean losses sum w l / sum w.
double regret(const Coefficients& beta_bar, const Coefficients& beta_star, const WeightedRows& test);

struct TrialResult {
  std::string method;
  std::string corruption;
  int trial = 0;
  std::vector<double> param_error;  // |beta_bar - beta*| per dimension
  double param_error_l2 = 0.0;
  double regret = 0.0;
  std::uint64_t seed = 0;  // draw seed
  bool ok = true;
  std::string error;
};

/// splitmix64-style mixing of a base seed with a tag.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag);
/// FNV-1a of a method id or case name.
std::uint64_t fnv1a(std::string_view text);

/// One trial of one corruption case for several methods on shared data.
std::vector<TrialResult> run_trial(const SimulationSpec& spec, const CorruptionCase& corruption,
                                   std::span<const MethodSpec> methods, int trial);
TrialResult run_trial(const SimulationSpec& spec, const CorruptionCase& corruption,
                      const MethodSpec& method, int trial);

struct Summary {
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for one trial
};
Summary summarize(std::span<const double> values);

struct MethodAggregate {
  std::string method;
  std::string corruption;
  int trials = 0;  // successful trials
  int failures = 0;
  Summary regret;
  Summary param_error_l2;
  std::vector<Summary> param_error;  // per dimension
};

struct ExperimentReport {
  std::vector<MethodAggregate> aggregates;  // case-major, methods in given order
  std::vector<TrialResult> trials;          // case, trial, method order
  int trial_count = 0;

  const MethodAggregate* find(std::string_view corruption, std::string_view method) const;
};

/// trials x cases x methods; trials run on up to `threads` workers, results
/// are assembled in a fixed order so the report does not depend on it.
ExperimentReport run_experiment(const SimulationSpec& spec, std::span<const MethodSpec> methods,
                                int threads = 1);

}  // namespace cops

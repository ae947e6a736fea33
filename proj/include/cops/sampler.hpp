#pragma once

// From uncertainty scores to a weighted subsample: sampling distribution
// (optionally alpha-clipped), reweighting distribution (beta-floored, never
// clipped), with-replacement draws, and the two end-to-end pipelines.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cops/model.hpp"
#include "cops/solver.hpp"
#include "cops/uncertainty.hpp"

namespace cops {

enum class ScoreTransform { kSqrt, kIdentity };

std::string_view to_string(ScoreTransform t);
ScoreTransform parse_score_transform(std::string_view text);

struct SamplingConfig {
  ScoreTransform transform = ScoreTransform::kSqrt;
  std::optional<double> alpha_multiplier;  // alpha = multiplier * min positive v
  double beta_floor = 0.1;
  std::size_t r = 1000;
  std::uint64_t seed = 0;
  Estimator estimator = Estimator::kEnsemble;  // used by the pipelines

  void validate() const;
};

struct SamplingPlan {
  std::vector<double> pi;
  std::vector<double> pi_reweight;
  std::optional<double> alpha;    // the realized clip level, if any
  bool uniform_fallback = false;  // every transformed score was zero
};

struct Subsample {
  std::vector<std::size_t> indices;
  std::vector<double> weights;  // 1 / pi_reweight(index)
};

SamplingPlan make_plan(std::span<const double> u, const SamplingConfig& config);
SamplingPlan make_plan(const ScoreSet& scores, const SamplingConfig& config);
SamplingPlan uniform_plan(std::size_t n);

/// r independent categorical draws from plan.pi, deterministic in seed.
Subsample draw_subsample(const SamplingPlan& plan, std::size_t n, std::size_t r, std::uint64_t seed);

/// sum_i u_i^2 / pi_i, the pi-dependent part of the subsampling variance.
double subsample_objective(std::span<const double> u, std::span<const double> pi);

struct ScoreHistogram {
  std::vector<double> edges;  // bins + 1 edges over [min u, max u]
  std::vector<std::size_t> counts;
};
ScoreHistogram score_histogram(std::span<const double> u, int bins = 20);

struct PipelineReport {
  ScoreHistogram histogram;
  std::optional<double> alpha;
  bool uniform_fallback = false;
  std::size_t labels_queried = 0;  // distinct drawn indices (active only)
  FitReport fit;
};

struct PipelineResult {
  Subsample subsample;
  Coefficients beta_bar;
  PipelineReport report;
};

/// Algorithm for labeled data: coreset scores, plan, draw, weighted fit.
PipelineResult cops_coreset(const Dataset& data, const ProbeEnsemble& ensemble,
                            const SamplingConfig& config, const FitConfig& fit = {});

using LabelOracle = std::function<int(std::size_t)>;

/// Algorithm for unlabeled data: active scores, plan, draw, query labels for
/// the drawn indices only, weighted fit. Oracle failures abort with
/// LabelingError.
PipelineResult cops_active(const Dataset& data_x, const LabelOracle& oracle,
                           const ProbeEnsemble& ensemble, const SamplingConfig& config,
                           const FitConfig& fit = {});

/// Draws from an existing plan and fits on the drawn labeled rows, merging
/// duplicate rows first. Shared by the pipelines and the simulation.
PipelineResult fit_from_plan(const Dataset& labeled, const SamplingPlan& plan,
                             const SamplingConfig& config, const FitConfig& fit);

}  // namespace cops

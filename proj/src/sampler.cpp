#include "cops/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <unordered_map>

#include "cops/error.hpp"

namespace cops {

namespace {

std::vector<double> normalized(std::vector<double> v) {
  double total = 0.0;
  for (double x : v) total += x;
  for (double& x : v) x /= total;
  return v;
}

}  // namespace

std::string_view to_string(ScoreTransform t) { return t == ScoreTransform::kIdentity ? "identity" : "sqrt"; }

ScoreTransform parse_score_transform(std::string_view text) {
  if (text == "sqrt") return ScoreTransform::kSqrt;
  if (text == "identity") return ScoreTransform::kIdentity;
  throw ContractViolation("unknown score transform '" + std::string(text) + "'");
}

void SamplingConfig::validate() const {
  require(r >= 1, "subsample size r must be at least 1");
  require(!alpha_multiplier || (std::isfinite(*alpha_multiplier) && *alpha_multiplier > 1.0),
          "alpha multiplier must be greater than 1");
  require(std::isfinite(beta_floor) && beta_floor >= 0.0, "beta floor must be nonnegative");
}

SamplingPlan uniform_plan(std::size_t n) {
  require(n > 0, "cannot build a plan over zero samples");
  SamplingPlan plan;
  plan.pi.assign(n, 1.0 / static_cast<double>(n));
  plan.pi_reweight = plan.pi;
  return plan;
}

SamplingPlan make_plan(std::span<const double> u, const SamplingConfig& config) {
  config.validate();
  require(!u.empty(), "cannot build a plan over zero samples");
  std::vector<double> v(u.size());
  double min_positive = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < u.size(); ++i) {
    require(std::isfinite(u[i]) && u[i] >= 0.0,
            "score " + std::to_string(i) + " is negative or not finite");
    v[i] = config.transform == ScoreTransform::kSqrt ? std::sqrt(u[i]) : u[i];
    if (v[i] > 0.0) min_positive = std::min(min_positive, v[i]);
  }
  if (!std::isfinite(min_positive)) {
    SamplingPlan plan = uniform_plan(u.size());
    plan.uniform_fallback = true;
    return plan;
  }

  SamplingPlan plan;
  std::vector<double> sampling = v;
  if (config.alpha_multiplier) {
    const double alpha = *config.alpha_multiplier * min_positive;
    plan.alpha = alpha;
    for (double& x : sampling) x = std::min(alpha, x);
  }
  std::vector<double> reweight = v;
  for (double& x : reweight) x = std::max(config.beta_floor, x);
  plan.pi = normalized(std::move(sampling));
  plan.pi_reweight = normalized(std::move(reweight));
  return plan;
}

SamplingPlan make_plan(const ScoreSet& scores, const SamplingConfig& config) {
  return make_plan(std::span<const double>(scores.u), config);
}

Subsample draw_subsample(const SamplingPlan& plan, std::size_t n, std::size_t r, std::uint64_t seed) {
  require(plan.pi.size() == n && plan.pi_reweight.size() == n, "plan length differs from n");
  require(r >= 1, "subsample size r must be at least 1");
  for (std::size_t i = 0; i < n; ++i) {
    require(!std::isnan(plan.pi[i]) && plan.pi[i] >= 0.0, "sampling distribution has NaN or negative mass");
  }
  std::discrete_distribution<std::size_t> pick(plan.pi.begin(), plan.pi.end());
  std::mt19937_64 rng(seed);
  Subsample out;
  out.indices.resize(r);
  out.weights.resize(r);
  for (std::size_t j = 0; j < r; ++j) {
    const std::size_t i = pick(rng);
    require(plan.pi_reweight[i] > 0.0, "drawn index " + std::to_string(i) + " has zero reweighting mass");
    out.indices[j] = i;
    out.weights[j] = 1.0 / plan.pi_reweight[i];
  }
  return out;
}

double subsample_objective(std::span<const double> u, std::span<const double> pi) {
  require(u.size() == pi.size(), "scores and distribution differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] == 0.0) continue;
    require(pi[i] > 0.0, "zero probability at positive-score sample " + std::to_string(i));
    total += u[i] * u[i] / pi[i];
  }
  return total;
}

ScoreHistogram score_histogram(std::span<const double> u, int bins) {
  require(bins >= 1, "histogram needs at least one bin");
  ScoreHistogram h;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  if (u.empty()) return h;
  const auto [lo_it, hi_it] = std::minmax_element(u.begin(), u.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  const double width = hi > lo ? (hi - lo) / bins : 1.0;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b) h.edges[static_cast<std::size_t>(b)] = lo + width * b;
  for (double x : u) {
    auto b = static_cast<std::size_t>((x - lo) / width);
    h.counts[std::min(b, h.counts.size() - 1)]++;
  }
  return h;
}

PipelineResult fit_from_plan(const Dataset& labeled, const SamplingPlan& plan,
                             const SamplingConfig& config, const FitConfig& fit) {
  require(labeled.is_labeled(), "fitting needs labels");
  PipelineResult out;
  out.subsample = draw_subsample(plan, labeled.size(), config.r, config.seed);
  const WeightedRows merged = compress_duplicates(labeled.subset(out.subsample.indices), out.subsample.weights);
  out.report.fit = fit_weighted_mle(merged.data, merged.weights, fit);
  out.beta_bar = out.report.fit.beta;
  out.report.alpha = plan.alpha;
  out.report.uniform_fallback = plan.uniform_fallback;
  return out;
}

PipelineResult cops_coreset(const Dataset& data, const ProbeEnsemble& ensemble,
                            const SamplingConfig& config, const FitConfig& fit) {
  require(data.is_labeled(), "coreset selection needs labeled data");
  const ScoreSet scores = score_dataset(ensemble, data, ScoreKind::kCoreset, config.estimator);
  const SamplingPlan plan = make_plan(scores, config);
  PipelineResult out = fit_from_plan(data, plan, config, fit);
  out.report.histogram = score_histogram(scores.u);
  return out;
}

PipelineResult cops_active(const Dataset& data_x, const LabelOracle& oracle,
                           const ProbeEnsemble& ensemble, const SamplingConfig& config,
                           const FitConfig& fit) {
  require(static_cast<bool>(oracle), "label oracle is empty");
  const Dataset unlabeled = data_x.is_labeled() ? data_x.without_labels() : data_x;
  const ScoreSet scores = score_dataset(ensemble, unlabeled, ScoreKind::kActive, config.estimator);
  const SamplingPlan plan = make_plan(scores, config);

  PipelineResult out;
  out.subsample = draw_subsample(plan, unlabeled.size(), config.r, config.seed);
  std::unordered_map<std::size_t, int> queried;
  std::vector<int> labels;
  labels.reserve(config.r);
  for (std::size_t i : out.subsample.indices) {
    auto it = queried.find(i);
    if (it == queried.end()) {
      int y = 0;
      try {
        y = oracle(i);
      } catch (const std::exception& e) {
        throw LabelingError("label oracle failed for index " + std::to_string(i) + ": " + e.what());
      }
      if (y < 0 || y > unlabeled.classes())
        throw LabelingError("label oracle returned " + std::to_string(y) + " for index " +
                            std::to_string(i) + ", outside [0, " + std::to_string(unlabeled.classes()) + "]");
      it = queried.emplace(i, y).first;
    }
    labels.push_back(it->second);
  }
  const Dataset drawn_x = unlabeled.subset(out.subsample.indices);
  const Dataset drawn = Dataset::labeled(drawn_x.features(), std::move(labels), unlabeled.classes());
  const WeightedRows merged = compress_duplicates(drawn, out.subsample.weights);
  out.report.fit = fit_weighted_mle(merged.data, merged.weights, fit);
  out.beta_bar = out.report.fit.beta;
  out.report.alpha = plan.alpha;
  out.report.uniform_fallback = plan.uniform_fallback;
  out.report.labels_queried = queried.size();
  out.report.histogram = score_histogram(scores.u);
  return out;
}

}  // namespace cops

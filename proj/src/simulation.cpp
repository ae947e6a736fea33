#include "cops/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <random>
#include <thread>

#include "cops/error.hpp"

namespace cops {

namespace {

double sigmoid(double z) { return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

std::string format_multiplier(double m) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", m);
  return buf;
}

double weighted_mean_loss(const Coefficients& beta, const WeightedRows& rows) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < rows.data.size(); ++i) {
    num += rows.weights[i] * cross_entropy(beta, rows.data.sample(i));
    den += rows.weights[i];
  }
  return num / den;
}

// Scores every row by scoring each distinct row once.
std::vector<double> scores_by_group(const ProbeEnsemble& ensemble, const Dataset& data, ScoreKind kind) {
  const WeightedRows distinct =
      compress_duplicates(kind == ScoreKind::kActive ? data.without_labels() : data);
  const ScoreSet s = score_dataset(ensemble, distinct.data, kind, Estimator::kEnsemble);
  std::vector<double> u(data.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = s.u[distinct.group[i]];
  return u;
}

}  // namespace

std::string MethodSpec::id() const {
  std::string base;
  switch (method) {
    case SamplingMethod::kUniform:
      return "uniform";
    case SamplingMethod::kVanilla:
      base = "vanilla";
      break;
    case SamplingMethod::kClip:
      base = "clip" + format_multiplier(clip_multiplier);
      break;
  }
  return base + (access == LabelAccess::kWithLabels ? ".with_labels" : ".without_labels");
}

std::vector<MethodSpec> default_methods(std::span<const double> clip_multipliers) {
  std::vector<MethodSpec> out{{SamplingMethod::kUniform, 0.0, LabelAccess::kWithLabels}};
  for (LabelAccess access : {LabelAccess::kWithLabels, LabelAccess::kWithoutLabels}) {
    out.push_back({SamplingMethod::kVanilla, 0.0, access});
    for (double m : clip_multipliers) out.push_back({SamplingMethod::kClip, m, access});
  }
  return out;
}

void SimulationSpec::validate() const {
  require(!atoms.empty(), "simulation needs at least one atom");
  require(beta_star.classes() == 1, "simulation supports the binary model only (K = 1)");
  require(beta_star.beta.allFinite(), "beta_star must be finite");
  for (const auto& a : atoms) {
    require(a.x.size() == static_cast<std::size_t>(dim()), "atom dimension differs from beta_star");
    require(a.count >= 1, "atom counts must be at least 1");
    for (double v : a.x) require(std::isfinite(v), "atom coordinates must be finite");
  }
  require(!cases.empty(), "simulation needs at least one corruption case");
  for (const auto& c : cases) {
    require(c.zeta.size() == atoms.size(), "case '" + c.name + "' needs one zeta per atom");
    for (double z : c.zeta) require(std::isfinite(z), "zeta must be finite");
  }
  require(r >= 1, "r must be at least 1");
  require(trials >= 1, "trials must be at least 1");
  require(members >= 2, "ensemble needs at least two members");
  for (double m : clip_multipliers) require(m > 1.0, "clip multipliers must exceed 1");
  if (probe_counts) {
    require(probe_counts->size() == atoms.size(), "probe_counts needs one entry per atom");
    for (auto c : *probe_counts) require(c >= 1, "probe counts must be at least 1");
  }
  require(beta_floor >= 0.0, "beta floor must be nonnegative");
  fit.validate();
}

SimulationSpec default_spec() {
  SimulationSpec s;
  s.atoms = {{{1.0, 0.0}, 1000}, {{0.1, 0.1}, 100000}, {{0.0, 1.0}, 100000}};
  s.beta_star = Coefficients::zeros(1, 2);
  s.beta_star.beta << 2.0, 2.0;
  s.cases = {{"zeta0", {0.0, 0.0, 0.0}}, {"zeta-1", {-1.0, 0.0, 0.0}}, {"zeta-3", {-3.0, 0.0, 0.0}}};
  return s;
}

Dataset generate_dataset(const SimulationSpec& spec, std::span<const double> zeta, std::uint64_t seed,
                         std::span<const std::size_t> counts) {
  require(zeta.empty() || zeta.size() == spec.atoms.size(), "zeta needs one entry per atom");
  require(counts.empty() || counts.size() == spec.atoms.size(), "counts need one entry per atom");
  const int d = spec.dim();
  std::size_t n = 0;
  for (std::size_t j = 0; j < spec.atoms.size(); ++j) n += counts.empty() ? spec.atoms[j].count : counts[j];
  RowMatrix x(static_cast<Eigen::Index>(n), d);
  std::vector<int> y;
  y.reserve(n);
  std::mt19937_64 rng(seed);
  Eigen::Index row = 0;
  for (std::size_t j = 0; j < spec.atoms.size(); ++j) {
    const auto& atom = spec.atoms[j];
    const double logit = spec.beta_star.logits(atom.x)[0] + (zeta.empty() ? 0.0 : zeta[j]);
    std::bernoulli_distribution coin(sigmoid(logit));
    const std::size_t c = counts.empty() ? atom.count : counts[j];
    for (std::size_t i = 0; i < c; ++i, ++row) {
      for (int k = 0; k < d; ++k) x(row, k) = atom.x[static_cast<std::size_t>(k)];
      y.push_back(coin(rng) ? 1 : 0);
    }
  }
  return Dataset::labeled(std::move(x), std::move(y), 1);
}

double regret(const Coefficients& beta_bar, const Coefficients& beta_star, const Dataset& test) {
  return dataset_loss(beta_bar, test) - dataset_loss(beta_star, test);
}

double regret(const Coefficients& beta_bar, const Coefficients& beta_star, const WeightedRows& test) {
  return weighted_mean_loss(beta_bar, test) - weighted_mean_loss(beta_star, test);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<TrialResult> run_trial(const SimulationSpec& spec, const CorruptionCase& corruption,
                                   std::span<const MethodSpec> methods, int trial) {
  spec.validate();
  const std::uint64_t trial_seed =
      derive_seed(derive_seed(spec.seed, fnv1a(corruption.name)), static_cast<std::uint64_t>(trial));

  std::vector<TrialResult> results;
  results.reserve(methods.size());
  for (const auto& m : methods) {
    TrialResult t;
    t.method = m.id();
    t.corruption = corruption.name;
    t.trial = trial;
    t.seed = derive_seed(trial_seed, fnv1a(t.method));
    results.push_back(std::move(t));
  }
  auto fail_all = [&](const std::string& msg) {
    for (auto& t : results) {
      t.ok = false;
      t.error = msg;
    }
    return results;
  };

  Dataset sampling;
  WeightedRows test;
  ProbeEnsemble ensemble;
  try {
    sampling = generate_dataset(spec, corruption.zeta, derive_seed(trial_seed, 1));
    const Dataset probe =
        generate_dataset(spec, corruption.zeta, derive_seed(trial_seed, 2),
                         spec.probe_counts ? std::span<const std::size_t>(*spec.probe_counts)
                                           : std::span<const std::size_t>{});
    ensemble = train_ensemble(probe, spec.members, spec.ensemble_mode, derive_seed(trial_seed, 3), spec.fit);
    test = compress_duplicates(generate_dataset(spec, {}, derive_seed(trial_seed, 4)));
  } catch (const std::exception& e) {
    return fail_all(e.what());
  }

  std::vector<double> u_coreset;
  std::vector<double> u_active;
  for (std::size_t i = 0; i < methods.size(); ++i) {
    const MethodSpec& m = methods[i];
    TrialResult& t = results[i];
    try {
      SamplingConfig cfg;
      cfg.transform = spec.transform;
      cfg.beta_floor = spec.beta_floor;
      cfg.r = spec.r;
      cfg.seed = t.seed;
      if (m.method == SamplingMethod::kClip) cfg.alpha_multiplier = m.clip_multiplier;

      SamplingPlan plan;
      if (m.method == SamplingMethod::kUniform) {
        plan = uniform_plan(sampling.size());
      } else if (m.access == LabelAccess::kWithLabels) {
        if (u_coreset.empty()) u_coreset = scores_by_group(ensemble, sampling, ScoreKind::kCoreset);
        plan = make_plan(u_coreset, cfg);
      } else {
        if (u_active.empty()) u_active = scores_by_group(ensemble, sampling, ScoreKind::kActive);
        plan = make_plan(u_active, cfg);
      }
      // Without labels only the drawn rows' labels are read, which is what
      // fitting on the drawn subset does.
      const PipelineResult fit = fit_from_plan(sampling, plan, cfg, spec.fit);
      const Vector diff = fit.beta_bar.vectorized() - spec.beta_star.vectorized();
      t.param_error.assign(diff.data(), diff.data() + diff.size());
      for (double& e : t.param_error) e = std::abs(e);
      t.param_error_l2 = diff.norm();
      t.regret = regret(fit.beta_bar, spec.beta_star, test);
    } catch (const std::exception& e) {
      t.ok = false;
      t.error = e.what();
    }
  }
  return results;
}

TrialResult run_trial(const SimulationSpec& spec, const CorruptionCase& corruption, const MethodSpec& method,
                      int trial) {
  return run_trial(spec, corruption, std::span<const MethodSpec>(&method, 1), trial).front();
}

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  const auto n = static_cast<double>(values.size());
  for (double v : values) s.mean += v;
  s.mean /= n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  s.median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  return s;
}

const MethodAggregate* ExperimentReport::find(std::string_view corruption, std::string_view method) const {
  for (const auto& a : aggregates)
    if (a.corruption == corruption && a.method == method) return &a;
  return nullptr;
}

ExperimentReport run_experiment(const SimulationSpec& spec, std::span<const MethodSpec> methods, int threads) {
  spec.validate();
  require(!methods.empty(), "no methods to run");
  require(threads >= 1, "threads must be at least 1");
  const std::size_t n_cases = spec.cases.size();
  const auto n_trials = static_cast<std::size_t>(spec.trials);
  const std::size_t units = n_cases * n_trials;
  std::vector<std::vector<TrialResult>> slots(units);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t u = next++; u < units; u = next++) {
      slots[u] = run_trial(spec, spec.cases[u / n_trials], methods, static_cast<int>(u % n_trials));
    }
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(threads), units);
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  ExperimentReport report;
  report.trial_count = spec.trials;
  for (auto& slot : slots)
    for (auto& t : slot) report.trials.push_back(std::move(t));

  const auto dims = static_cast<std::size_t>(spec.beta_star.classes() * spec.dim());
  for (const auto& c : spec.cases) {
    for (const auto& m : methods) {
      MethodAggregate agg;
      agg.method = m.id();
      agg.corruption = c.name;
      std::vector<double> reg;
      std::vector<double> l2;
      std::vector<std::vector<double>> comp(dims);
      for (const auto& t : report.trials) {
        if (t.corruption != c.name || t.method != agg.method) continue;
        if (!t.ok) {
          ++agg.failures;
          continue;
        }
        reg.push_back(t.regret);
        l2.push_back(t.param_error_l2);
        for (std::size_t k = 0; k < dims; ++k) comp[k].push_back(t.param_error[k]);
      }
      agg.trials = static_cast<int>(reg.size());
      agg.regret = summarize(reg);
      agg.param_error_l2 = summarize(l2);
      for (const auto& v : comp) agg.param_error.push_back(summarize(v));
      report.aggregates.push_back(std::move(agg));
    }
  }
  return report;
}

}  // namespace cops

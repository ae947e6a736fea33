#include "commands.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <ostream>
#include <set>

#include "cops/error.hpp"
#include "cops/io.hpp"
#include "cops/kernels.hpp"
#include "cops/sampler.hpp"
#include "cops/solver.hpp"

namespace cops::cli {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

// Field access with file:line messages. Lines come from the first
// occurrence of the quoted key, which is exact for the flat documents used
// here and a close pointer otherwise.
class Doc {
 public:
  Doc(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {
    try {
      root_ = json::parse(text_);
    } catch (const json::parse_error& e) {
      throw ConfigError(source_ + ":" + std::to_string(io::line_of_offset(text_, e.byte)) +
                        ": invalid JSON: " + e.what());
    }
    if (!root_.is_object()) throw ConfigError(source_ + ":1: top level must be an object");
  }

  const json& root() const { return root_; }

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    throw ConfigError(source_ + ":" + std::to_string(line_of(key)) + ": " + message);
  }

  const json& required(const json& obj, const std::string& key) const {
    auto it = obj.find(key);
    if (it == obj.end()) {
      throw ConfigError(source_ + ":" + std::to_string(line_of(key)) + ": missing required field '" +
                        key + "'");
    }
    return *it;
  }

  double number(const json& v, const std::string& key) const {
    if (!v.is_number()) fail(key, "field '" + key + "' must be a number");
    return v.get<double>();
  }

  std::int64_t integer(const json& v, const std::string& key) const {
    if (!v.is_number_integer()) fail(key, "field '" + key + "' must be an integer");
    return v.get<std::int64_t>();
  }

  std::vector<double> numbers(const json& v, const std::string& key) const {
    if (!v.is_array()) fail(key, "field '" + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) out.push_back(number(e, key));
    return out;
  }

  std::string string(const json& v, const std::string& key) const {
    if (!v.is_string()) fail(key, "field '" + key + "' must be a string");
    return v.get<std::string>();
  }

  void only_keys(const json& obj, std::initializer_list<const char*> allowed) const {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, _] : obj.items())
      if (!ok.count(k)) fail(k, "unknown field '" + k + "'");
  }

  const std::string& source() const { return source_; }

 private:
  std::size_t line_of(const std::string& key) const {
    const auto pos = text_.find("\"" + key + "\"");
    return pos == std::string::npos ? 1 : io::line_of_offset(text_, pos);
  }

  const std::string& text_;
  std::string source_;
  json root_;
};

Coefficients parse_beta(const Doc& doc, const json& v, const std::string& key) {
  if (!v.is_array() || v.empty()) doc.fail(key, "field '" + key + "' must be a non-empty array");
  if (v.front().is_number()) {
    const auto row = doc.numbers(v, key);
    Coefficients b = Coefficients::zeros(1, static_cast<int>(row.size()));
    for (std::size_t j = 0; j < row.size(); ++j) b.beta(0, static_cast<Eigen::Index>(j)) = row[j];
    return b;
  }
  std::vector<std::vector<double>> rows;
  for (const auto& r : v) rows.push_back(doc.numbers(r, key));
  const auto d = rows.front().size();
  for (const auto& r : rows)
    if (r.size() != d || d == 0) doc.fail(key, "field '" + key + "' rows must share a non-zero length");
  Coefficients b = Coefficients::zeros(static_cast<int>(rows.size()), static_cast<int>(d));
  for (std::size_t k = 0; k < rows.size(); ++k)
    for (std::size_t j = 0; j < d; ++j) b.beta(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = rows[k][j];
  return b;
}

json beta_json(const Coefficients& b) {
  json rows = json::array();
  for (int k = 0; k < b.classes(); ++k) {
    json row = json::array();
    for (int j = 0; j < b.dim(); ++j) row.push_back(b.beta(k, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json spec_json(const SimulationSpec& s) {
  json atoms = json::array();
  for (const auto& a : s.atoms) atoms.push_back({{"x", a.x}, {"count", a.count}});
  json cases = json::array();
  for (const auto& c : s.cases) cases.push_back({{"name", c.name}, {"zeta", c.zeta}});
  json j = {{"atoms", atoms},
            {"beta_star", beta_json(s.beta_star)},
            {"cases", cases},
            {"r", s.r},
            {"clip_multipliers", s.clip_multipliers},
            {"trials", s.trials},
            {"seed", s.seed},
            {"members", s.members},
            {"ensemble_mode", std::string(to_string(s.ensemble_mode))}};
  j["probe_counts"] = s.probe_counts ? json(*s.probe_counts) : json(nullptr);
  j["beta_floor"] = s.beta_floor;
  j["transform"] = std::string(to_string(s.transform));
  j["fit"] = {{"grad_tol", s.fit.grad_tol},
              {"max_iters", s.fit.max_iters},
              {"ridge", s.fit.ridge},
              {"step_halving_max", s.fit.step_halving_max}};
  return j;
}

json summary_json(const Summary& s) { return {{"mean", s.mean}, {"median", s.median}, {"std", s.std}}; }

json manifest_core(const std::string& command, std::uint64_t seed, const std::vector<std::string>& inputs,
                   const std::vector<std::string>& outputs) {
  return {{"tool", "copsamp"},
          {"version", kVersion},
          {"command", command},
          {"seed", seed},
          {"inputs", inputs},
          {"outputs", outputs}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string filename(const std::string& path) { return fs::path(path).filename().string(); }

struct Globals {
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string out = ".";
};

fs::path out_dir(const Globals& g) {
  fs::path dir(g.out);
  fs::create_directories(dir);
  return dir;
}

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::optional<int> trials;
};

int cmd_simulate(const Globals& g, const SimulateArgs& a, std::ostream& out) {
  SimulationSpec spec = load_simulation_spec(a.config);
  if (g.seed) spec.seed = *g.seed;
  if (a.trials) spec.trials = *a.trials;
  try {
    spec.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(a.config + ": " + e.what());
  }
  const auto methods = default_methods(spec.clip_multipliers);

  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentReport report = run_experiment(spec, methods, g.threads);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::vector<std::string> outputs{"report.json", "trials.csv", "manifest.json"};
  json manifest = manifest_core("simulate", spec.seed, {filename(a.config)}, outputs);
  manifest["config"] = spec_json(spec);

  json methods_json = json::array();
  for (const auto& m : methods) methods_json.push_back(m.id());
  json aggs = json::array();
  for (const auto& agg : report.aggregates) {
    json comps = json::array();
    for (const auto& s : agg.param_error) comps.push_back(summary_json(s));
    aggs.push_back({{"corruption", agg.corruption},
                    {"method", agg.method},
                    {"trials", agg.trials},
                    {"failures", agg.failures},
                    {"regret", summary_json(agg.regret)},
                    {"param_error_l2", summary_json(agg.param_error_l2)},
                    {"param_error", comps}});
  }
  json trials = json::array();
  for (const auto& t : report.trials) {
    json row = {{"corruption", t.corruption}, {"method", t.method}, {"trial", t.trial}, {"seed", t.seed}, {"ok", t.ok}};
    if (t.ok) {
      row["param_error"] = t.param_error;
      row["param_error_l2"] = t.param_error_l2;
      row["regret"] = t.regret;
    } else {
      row["error"] = t.error;
    }
    trials.push_back(std::move(row));
  }
  const json report_doc = {{"manifest", manifest},
                           {"trial_count", report.trial_count},
                           {"methods", methods_json},
                           {"aggregates", aggs},
                           {"trials", trials}};

  const auto dims = static_cast<std::size_t>(spec.beta_star.classes() * spec.dim());
  std::string csv = "method,corruption,trial";
  for (std::size_t k = 0; k < dims; ++k) csv += ",param_error_d" + std::to_string(k + 1);
  csv += ",param_error_l2,regret,seed,status\n";
  for (const auto& t : report.trials) {
    csv += t.method + "," + t.corruption + "," + std::to_string(t.trial);
    for (std::size_t k = 0; k < dims; ++k) csv += "," + (t.ok ? io::format_double(t.param_error[k]) : "nan");
    csv += "," + (t.ok ? io::format_double(t.param_error_l2) : "nan");
    csv += "," + (t.ok ? io::format_double(t.regret) : "nan");
    csv += "," + std::to_string(t.seed) + (t.ok ? ",ok\n" : ",failed\n");
  }

  json full_manifest = manifest;
  full_manifest["duration_seconds"] = seconds;
  full_manifest["threads"] = g.threads;
  full_manifest["kernels"] = std::string(kernels::isa_name(kernels::active().isa));

  const fs::path dir = out_dir(g);
  io::write_atomic(dir / "trials.csv", csv);
  io::write_atomic(dir / "report.json", dump(report_doc));
  io::write_atomic(dir / "manifest.json", dump(full_manifest));

  int failures = 0;
  for (const auto& agg : report.aggregates) {
    char line[160];
    std::snprintf(line, sizeof line, "%-8s %-24s regret %.6g  l2 %.6g  (%d trials)\n", agg.corruption.c_str(),
                  agg.method.c_str(), agg.regret.mean, agg.param_error_l2.mean, agg.trials);
    out << line;
    failures += agg.failures;
  }
  if (failures) out << failures << " trial(s) failed; see trials.csv\n";
  return 0;
}

// --- fit --------------------------------------------------------------------

struct FitArgs {
  std::string data;
  std::string output;
  std::optional<std::string> weights_col;
  std::optional<int> classes;
  std::optional<int> members;
  std::string mode = "independent_splits";
  std::optional<int> max_iters;
  bool strict = false;
};

int cmd_fit(const Globals& g, const FitArgs& a, std::ostream& out) {
  io::DatasetOptions opt;
  opt.classes = a.classes;
  opt.weights_column = a.weights_col;
  const io::LoadedDataset loaded = io::read_dataset(a.data, opt);
  const fs::path dir = out_dir(g);
  const std::uint64_t seed = g.seed.value_or(0);

  if (a.members) {
    if (a.weights_col) throw ConfigError("--weights-col cannot be combined with --members");
    const EnsembleMode mode = parse_ensemble_mode(a.mode);
    const ProbeEnsemble e = train_ensemble(loaded.data, *a.members, mode, seed);
    json members = json::array();
    for (const auto& m : e.members) members.push_back(beta_json(m));
    const fs::path path = a.output.empty() ? dir / "ensemble.json" : fs::path(a.output);
    const json doc = {{"manifest", manifest_core("fit", seed, {filename(a.data)}, {path.filename().string()})},
                      {"classes", e.classes()},
                      {"dim", e.dim()},
                      {"mode", std::string(to_string(e.mode))},
                      {"probe_size", e.probe_size},
                      {"members", members},
                      {"mean", beta_json(e.mean)}};
    io::write_atomic(path, dump(doc));
    out << "ensemble of " << e.size() << " members (" << e.probe_size << " rows each) -> " << path.string() << "\n";
    return 0;
  }

  FitConfig fc;
  if (a.max_iters) fc.max_iters = *a.max_iters;
  const FitReport r = a.weights_col ? fit_weighted_mle(loaded.data, loaded.weights, fc) : fit_mle(loaded.data, fc);
  const fs::path path = a.output.empty() ? dir / "fit.json" : fs::path(a.output);
  const json doc = {{"manifest", manifest_core("fit", seed, {filename(a.data)}, {path.filename().string()})},
                    {"classes", r.beta.classes()},
                    {"dim", r.beta.dim()},
                    {"beta", beta_json(r.beta)},
                    {"iterations", r.iterations},
                    {"final_grad_norm", r.final_grad_norm},
                    {"converged", r.converged},
                    {"final_loss", r.final_loss}};
  io::write_atomic(path, dump(doc));
  out << (r.converged ? "converged" : "NOT converged") << " after " << r.iterations
      << " iterations, gradient norm " << io::format_double(r.final_grad_norm) << " -> " << path.string() << "\n";
  return (!r.converged && a.strict) ? 1 : 0;
}

// --- score ------------------------------------------------------------------

struct ScoreArgs {
  std::string data;
  std::string ensemble;
  std::string kind = "coreset";
  std::string estimator = "ensemble";
  std::string output;
};

int cmd_score(const Globals& g, const ScoreArgs& a, std::ostream& out) {
  const ScoreKind kind = parse_score_kind(a.kind);
  const Estimator estimator = parse_estimator(a.estimator);
  const ProbeEnsemble e = load_ensemble(a.ensemble);
  io::DatasetOptions opt;
  opt.classes = e.classes();
  opt.read_labels = kind == ScoreKind::kCoreset;
  opt.require_labels = kind == ScoreKind::kCoreset;
  const io::LoadedDataset loaded = io::read_dataset(a.data, opt);
  if (loaded.data.dim() != e.dim())
    throw ConfigError(a.data + ": dimension d=" + std::to_string(loaded.data.dim()) +
                      " does not match the ensemble's d=" + std::to_string(e.dim()));
  const ScoreSet s = score_dataset(e, loaded.data, kind, estimator);
  std::string csv = "index,u\n";
  for (std::size_t i = 0; i < s.u.size(); ++i) csv += std::to_string(i) + "," + io::format_double(s.u[i]) + "\n";
  const fs::path path = a.output.empty() ? out_dir(g) / "scores.csv" : fs::path(a.output);
  io::write_atomic(path, csv);
  out << s.u.size() << " " << to_string(kind) << " scores (" << to_string(estimator) << ") -> " << path.string()
      << "\n";
  return 0;
}

// --- sample -----------------------------------------------------------------

struct SampleArgs {
  std::string scores;
  long long r = 0;
  std::optional<double> alpha_mult;
  double beta_floor = 0.1;
  std::string transform = "sqrt";
};

int cmd_sample(const Globals& g, const SampleArgs& a, std::ostream& out) {
  if (a.r <= 0) throw ConfigError("--r must be a positive integer (got " + std::to_string(a.r) + ")");
  if (a.alpha_mult && !(*a.alpha_mult > 1.0)) throw ConfigError("--alpha-mult must be greater than 1");
  if (!(a.beta_floor >= 0.0)) throw ConfigError("--beta-floor must be nonnegative");
  const io::CsvTable table = io::read_csv(a.scores);
  const auto u_col = table.column("u");
  if (!u_col) throw ConfigError(a.scores + ":1: header has no column 'u'");
  std::vector<double> u;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const std::string& t = table.rows[i][*u_col];
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || *end != '\0' || !std::isfinite(v) || v < 0.0)
      throw ConfigError(a.scores + ":" + std::to_string(table.lines[i]) + ": score '" + t +
                        "' is not a nonnegative number");
    u.push_back(v);
  }
  if (u.empty()) throw ConfigError(a.scores + ": no scores");

  SamplingConfig cfg;
  cfg.transform = parse_score_transform(a.transform);
  cfg.alpha_multiplier = a.alpha_mult;
  cfg.beta_floor = a.beta_floor;
  cfg.r = static_cast<std::size_t>(a.r);
  cfg.seed = g.seed.value_or(0);
  const SamplingPlan plan = make_plan(u, cfg);
  const Subsample sub = draw_subsample(plan, u.size(), cfg.r, cfg.seed);

  std::string csv = "draw_index,source_row,weight\n";
  for (std::size_t j = 0; j < sub.indices.size(); ++j)
    csv += std::to_string(j) + "," + std::to_string(sub.indices[j]) + "," + io::format_double(sub.weights[j]) + "\n";
  const fs::path dir = out_dir(g);
  json doc = {{"manifest", manifest_core("sample", cfg.seed, {filename(a.scores)}, {"subsample.csv", "plan.json"})},
              {"n", u.size()},
              {"r", cfg.r},
              {"transform", std::string(to_string(cfg.transform))}};
  doc["alpha_multiplier"] = a.alpha_mult ? json(*a.alpha_mult) : json(nullptr);
  doc["alpha"] = plan.alpha ? json(*plan.alpha) : json(nullptr);
  doc["beta_floor"] = cfg.beta_floor;
  doc["uniform_fallback"] = plan.uniform_fallback;
  doc["pi"] = plan.pi;
  doc["pi_reweight"] = plan.pi_reweight;
  io::write_atomic(dir / "subsample.csv", csv);
  io::write_atomic(dir / "plan.json", dump(doc));
  if (plan.uniform_fallback) out << "warning: all scores are zero, sampling uniformly\n";
  out << cfg.r << " draws from " << u.size() << " rows -> " << (dir / "subsample.csv").string() << "\n";
  return 0;
}

// --- selfcheck --------------------------------------------------------------

int cmd_selfcheck(const Globals& g, bool quick, std::ostream& out) {
  const auto results = run_selfcheck(g.seed.value_or(0), quick);
  bool all = true;
  for (const auto& r : results) {
    char line[256];
    std::snprintf(line, sizeof line, "%s  %-22s tol %-9.3g measured %-11.4g %s\n", r.pass ? "PASS" : "FAIL",
                  r.name.c_str(), r.tolerance, r.measured, r.note.c_str());
    out << line;
    all = all && r.pass;
  }
  out << (all ? "all checks passed\n" : "some checks FAILED\n");
  return all ? 0 : 1;
}

}  // namespace

SimulationSpec parse_simulation_spec(const std::string& text, const std::string& source) {
  const Doc doc(text, source);
  const json& root = doc.root();
  doc.only_keys(root, {"atoms", "beta_star", "cases", "r", "clip_multipliers", "trials", "seed", "members",
                       "ensemble_mode", "probe_counts", "beta_floor", "transform", "fit"});
  SimulationSpec s;

  const json& atoms = doc.required(root, "atoms");
  if (!atoms.is_array() || atoms.empty()) doc.fail("atoms", "field 'atoms' must be a non-empty array");
  for (const auto& a : atoms) {
    if (!a.is_object()) doc.fail("atoms", "each atom must be an object with 'x' and 'count'");
    doc.only_keys(a, {"x", "count"});
    Atom atom;
    atom.x = doc.numbers(doc.required(a, "x"), "x");
    const auto c = doc.integer(doc.required(a, "count"), "count");
    if (c < 1) doc.fail("count", "atom counts must be at least 1");
    atom.count = static_cast<std::size_t>(c);
    s.atoms.push_back(std::move(atom));
  }

  s.beta_star = parse_beta(doc, doc.required(root, "beta_star"), "beta_star");

  const json& cases = doc.required(root, "cases");
  if (!cases.is_array() || cases.empty()) doc.fail("cases", "field 'cases' must be a non-empty array");
  std::set<std::string> names;
  for (const auto& c : cases) {
    if (!c.is_object()) doc.fail("cases", "each case must be an object with 'name' and 'zeta'");
    doc.only_keys(c, {"name", "zeta"});
    CorruptionCase cc;
    cc.name = doc.string(doc.required(c, "name"), "name");
    if (cc.name.empty() || cc.name.find_first_of(",\n\"") != std::string::npos)
      doc.fail("name", "case names must be non-empty and free of commas, quotes and newlines");
    if (!names.insert(cc.name).second) doc.fail("name", "duplicate case name '" + cc.name + "'");
    cc.zeta = doc.numbers(doc.required(c, "zeta"), "zeta");
    s.cases.push_back(std::move(cc));
  }

  const auto r = doc.integer(doc.required(root, "r"), "r");
  if (r < 1) doc.fail("r", "field 'r' must be at least 1");
  s.r = static_cast<std::size_t>(r);

  if (root.contains("clip_multipliers")) s.clip_multipliers = doc.numbers(root["clip_multipliers"], "clip_multipliers");
  if (root.contains("trials")) s.trials = static_cast<int>(doc.integer(root["trials"], "trials"));
  if (root.contains("seed")) {
    if (!root["seed"].is_number_unsigned()) doc.fail("seed", "field 'seed' must be a nonnegative integer");
    s.seed = root["seed"].get<std::uint64_t>();
  }
  if (root.contains("members")) s.members = static_cast<int>(doc.integer(root["members"], "members"));
  if (root.contains("ensemble_mode")) {
    try {
      s.ensemble_mode = parse_ensemble_mode(doc.string(root["ensemble_mode"], "ensemble_mode"));
    } catch (const ContractViolation& e) {
      doc.fail("ensemble_mode", e.what());
    }
  }
  if (root.contains("probe_counts") && !root["probe_counts"].is_null()) {
    std::vector<std::size_t> counts;
    for (double c : doc.numbers(root["probe_counts"], "probe_counts")) {
      if (c < 1 || c != std::floor(c)) doc.fail("probe_counts", "probe counts must be positive integers");
      counts.push_back(static_cast<std::size_t>(c));
    }
    s.probe_counts = std::move(counts);
  }
  if (root.contains("beta_floor")) s.beta_floor = doc.number(root["beta_floor"], "beta_floor");
  if (root.contains("transform")) {
    try {
      s.transform = parse_score_transform(doc.string(root["transform"], "transform"));
    } catch (const ContractViolation& e) {
      doc.fail("transform", e.what());
    }
  }
  if (root.contains("fit")) {
    const json& f = root["fit"];
    if (!f.is_object()) doc.fail("fit", "field 'fit' must be an object");
    doc.only_keys(f, {"grad_tol", "max_iters", "ridge", "step_halving_max"});
    if (f.contains("grad_tol")) s.fit.grad_tol = doc.number(f["grad_tol"], "grad_tol");
    if (f.contains("max_iters")) s.fit.max_iters = static_cast<int>(doc.integer(f["max_iters"], "max_iters"));
    if (f.contains("ridge")) s.fit.ridge = doc.number(f["ridge"], "ridge");
    if (f.contains("step_halving_max"))
      s.fit.step_halving_max = static_cast<int>(doc.integer(f["step_halving_max"], "step_halving_max"));
  }

  try {
    s.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return s;
}

SimulationSpec load_simulation_spec(const fs::path& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const io::InputError& e) {
    throw ConfigError(e.what());
  }
  return parse_simulation_spec(text, path.string());
}

ProbeEnsemble load_ensemble(const fs::path& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const io::InputError& e) {
    throw ConfigError(e.what());
  }
  const Doc doc(text, path.string());
  const json& root = doc.root();
  const auto K = doc.integer(doc.required(root, "classes"), "classes");
  const auto d = doc.integer(doc.required(root, "dim"), "dim");
  const json& members = doc.required(root, "members");
  if (!members.is_array() || members.size() < 2) doc.fail("members", "field 'members' needs at least two entries");
  std::vector<Coefficients> betas;
  for (const auto& m : members) {
    Coefficients b = parse_beta(doc, m, "members");
    if (b.classes() != K || b.dim() != d) doc.fail("members", "member shape differs from (classes, dim)");
    betas.push_back(std::move(b));
  }
  EnsembleMode mode = EnsembleMode::kIndependentSplits;
  if (root.contains("mode")) {
    try {
      mode = parse_ensemble_mode(doc.string(root["mode"], "mode"));
    } catch (const ContractViolation& e) {
      doc.fail("mode", e.what());
    }
  }
  std::size_t probe_size = 0;
  if (root.contains("probe_size")) probe_size = static_cast<std::size_t>(doc.integer(root["probe_size"], "probe_size"));
  return ProbeEnsemble::from_members(std::move(betas), probe_size, mode);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"copsamp: uncertainty-based optimal subsampling for softmax regression", "copsamp"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output directory");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run the corruption simulation experiment");
  simulate->add_option("config", sim.config, "Simulation config (JSON)")->required();
  simulate->add_option("--trials", sim.trials, "Override the config's trial count")->check(CLI::PositiveNumber);

  FitArgs fit;
  auto* fitc = app.add_subcommand("fit", "Fit softmax regression (or a probe ensemble) to a dataset CSV");
  fitc->add_option("data", fit.data, "Dataset CSV")->required();
  fitc->add_option("-o,--output", fit.output, "Output document (default <out>/fit.json or ensemble.json)");
  fitc->add_option("--weights-col", fit.weights_col, "Column of per-row weights");
  fitc->add_option("--classes", fit.classes, "Number of non-reference classes K")->check(CLI::PositiveNumber);
  fitc->add_option("--members", fit.members, "Train an ensemble of M members instead")->check(CLI::Range(2, 1 << 20));
  fitc->add_option("--mode", fit.mode, "Ensemble mode: shards | bootstrap")
      ->transform(CLI::Transformer({{"shards", "independent_splits"}}));
  fitc->add_option("--max-iters", fit.max_iters, "Newton iteration limit")->check(CLI::PositiveNumber);
  fitc->add_flag("--strict", fit.strict, "Exit 1 when the fit does not converge");

  ScoreArgs sc;
  auto* score = app.add_subcommand("score", "Score every row of a dataset");
  score->add_option("data", sc.data, "Dataset CSV")->required();
  score->add_option("--ensemble", sc.ensemble, "Ensemble document")->required();
  score->add_option("--kind", sc.kind, "coreset | active")->check(CLI::IsMember({"coreset", "active"}));
  score->add_option("--estimator", sc.estimator, "ensemble | exact")->check(CLI::IsMember({"ensemble", "exact"}));
  score->add_option("-o,--output", sc.output, "Scores CSV (default <out>/scores.csv)");

  SampleArgs sa;
  auto* sample = app.add_subcommand("sample", "Build a sampling plan from scores and draw a subsample");
  sample->add_option("scores", sa.scores, "Scores CSV with a 'u' column")->required();
  sample->add_option("--r", sa.r, "Subsample size")->required();
  sample->add_option("--alpha-mult", sa.alpha_mult, "Clip at this multiple of the smallest positive score");
  sample->add_option("--beta-floor", sa.beta_floor, "Floor of the reweighting scores");
  sample->add_option("--transform", sa.transform, "sqrt | identity")->check(CLI::IsMember({"sqrt", "identity"}));

  bool quick = false;
  auto* selfcheck = app.add_subcommand("selfcheck", "Run the invariant oracles");
  selfcheck->add_flag("--quick", quick, "Skip the ensemble/exact Monte Carlo");

  for (auto* sub : {simulate, fitc, score, sample, selfcheck}) sub->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(g, sim, out);
    if (fitc->parsed()) return cmd_fit(g, fit, out);
    if (score->parsed()) return cmd_score(g, sc, out);
    if (sample->parsed()) return cmd_sample(g, sa, out);
    if (selfcheck->parsed()) return cmd_selfcheck(g, quick, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const io::InputError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ContractViolation& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace cops::cli

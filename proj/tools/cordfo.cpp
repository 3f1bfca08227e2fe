// cordfo: command-line driver for single runs, benchmark grids and SPSA tuning.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "cordfo/cordfo.hpp"

namespace fs = std::filesystem;
using namespace cordfo;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> parallel;
  std::optional<std::string> problem;
  std::optional<double> sigma;
  std::optional<std::uint64_t> budget_pairs;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "JSON configuration file");
  app->add_option("--seed", f.seed, "master seed");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--parallel", f.parallel, "worker threads")->check(CLI::PositiveNumber);
  app->add_option("--problem", f.problem, "problem name");
  app->add_option("--sigma", f.sigma, "noise standard deviation")->check(CLI::NonNegativeNumber);
  app->add_option("--budget-pairs", f.budget_pairs, "budget in evaluation pairs per dimension")
      ->check(CLI::PositiveNumber);
}

json load_or_empty(const std::string& path) { return path.empty() ? json::object() : load_json_file(path); }

ProblemSpec problem_from(const json& j, const CommonFlags& f) {
  ProblemSpec ps;
  if (auto it = j.find("problem"); it != j.end()) ps = parse_problem_spec(*it);
  if (f.problem) ps.name = *f.problem;
  if (f.sigma) ps.sigma = *f.sigma;
  return ps;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

// Single run. Config: {"problem": ..., "config": {run config}}.
int cmd_run(const CommonFlags& f) {
  const json j = load_or_empty(f.config);
  detail::check_keys(j, {"problem", "config"}, "run");
  const Problem p = make_problem(problem_from(j, f));
  RunConfig c = default_run_config(p);
  if (auto it = j.find("config"); it != j.end()) c = parse_run_config(*it, c);
  if (f.seed) c.seed = *f.seed;
  if (f.budget_pairs) c.budget = 2 * *f.budget_pairs * p.dim;
  validate_run_config(c);

  const Trajectory t = run(p, c);
  const Metrics m = compute_metrics(p, t);

  std::printf("%s sigma=%g %s: evals=%llu iterations=%zu error=%.6g gap=%.6g osc=%zu success=%s\n", p.name.c_str(),
              p.noise_std(p.x0), std::string(to_string(c.algorithm)).c_str(),
              static_cast<unsigned long long>(t.evals_used), t.records.size(), m.solution_error, m.optimality_gap,
              m.oscillatory_period, m.success ? "true" : "false");
  if (f.out.empty()) return 0;

  const fs::path dir(f.out);
  fs::create_directories(dir);
  std::ostringstream csv;
  csv << "k,evals_cumulative,n_k,n_ls,step,ls_certified,ls_safeguard";
  for (std::size_t i = 0; i < p.dim; ++i) csv << ",x" << i + 1;
  csv << '\n';
  for (const auto& r : t.records) {
    csv << r.k << ',' << r.s << ',' << r.n_k << ',' << r.n_ls << ',' << detail::fmt_double(r.step) << ','
        << (r.ls_certified ? "true" : "false") << ',' << (r.ls_safeguard ? "true" : "false");
    for (double v : r.x) csv << ',' << detail::fmt_double(v);
    csv << '\n';
  }
  write_file(dir / "trajectory.csv", csv.str());

  json fx = json::array();
  for (double v : t.final_x) fx.push_back(detail::json_number(v));
  const json summary{{"problem", p.name},
                     {"algorithm", to_string(c.algorithm)},
                     {"seed", c.seed},
                     {"budget", c.budget},
                     {"evals_used", t.evals_used},
                     {"iterations", t.records.size()},
                     {"termination", to_string(t.termination)},
                     {"final_x", fx},
                     {"solution_error", detail::json_number(m.solution_error)},
                     {"optimality_gap", detail::json_number(m.optimality_gap)},
                     {"oscillatory_period", m.oscillatory_period},
                     {"success", m.success}};
  write_file(dir / "run.json", summary.dump(2) + "\n");
  return 0;
}

// Experiment grid. Flags override the config: --problem/--sigma filter the
// problem list, --budget-pairs replaces the budget list.
int cmd_bench(const CommonFlags& f) {
  if (f.config.empty()) throw ConfigError("bench needs --config");
  ExperimentSpec s = parse_experiment(load_json_file(f.config));
  if (f.seed) s.seed = *f.seed;
  if (f.parallel) s.parallel = *f.parallel;
  if (f.budget_pairs) s.budget_pairs = {*f.budget_pairs};
  if (f.problem || f.sigma) {
    std::vector<ProblemSpec> kept;
    for (const auto& ps : s.problems)
      if ((!f.problem || ps.name == *f.problem) && (!f.sigma || ps.sigma == *f.sigma)) kept.push_back(ps);
    if (kept.empty()) throw ConfigError("no problem in the config matches --problem/--sigma");
    s.problems = std::move(kept);
  }
  s.validate();

  const ExperimentResult r = run_experiment(s);
  const fs::path dir = f.out.empty() ? fs::path(s.output_dir) : fs::path(f.out);
  write_results(r, dir, s.name);
  std::size_t failed = 0;
  for (const auto& row : r.rows) failed += row.failed();
  std::printf("%s: %zu replications written to %s (%zu failed)\n", s.name.c_str(), r.rows.size(),
              dir.string().c_str(), failed);
  return 0;
}

// Config: {"problem": ..., "replications": 20, "grid": {"theta_a": [...], "theta_c": [...]}}.
int cmd_tune(const CommonFlags& f) {
  const json j = load_or_empty(f.config);
  detail::check_keys(j, {"problem", "replications", "grid"}, "tune-spsa");
  const Problem p = make_problem(problem_from(j, f));
  TuneOptions o;
  detail::read(j, "replications", o.replications, "tune-spsa");
  if (auto it = j.find("grid"); it != j.end()) {
    detail::check_keys(*it, {"theta_a", "theta_c"}, "grid");
    detail::read(*it, "theta_a", o.grid.theta_a, "grid");
    detail::read(*it, "theta_c", o.grid.theta_c, "grid");
  }
  if (o.replications == 0 || o.grid.theta_a.empty() || o.grid.theta_c.empty())
    throw ConfigError("tune-spsa: need replications >= 1 and a nonempty grid");
  if (f.seed) o.seed = *f.seed;
  if (f.parallel) o.threads = *f.parallel;
  if (f.budget_pairs) o.budget = 2 * *f.budget_pairs * p.dim;

  const TuneResult r = tune_spsa(p, o);
  std::printf("%s sigma=%g: theta_a=%g theta_c=%g mean_og=%.6g%s\n", p.name.c_str(), p.noise_std(p.x0), r.theta_a,
              r.theta_c, r.mean_og, r.flagged ? " (every cell diverged)" : "");
  if (f.out.empty()) return 0;

  json cells = json::array();
  for (const auto& c : r.cells)
    cells.push_back({{"theta_a", c.theta_a},
                     {"theta_c", c.theta_c},
                     {"mean_og", detail::json_number(c.mean_og)},
                     {"nonfinite", c.nonfinite}});
  const json out{{"problem", p.name},        {"sigma", p.noise_std(p.x0)}, {"theta_a", r.theta_a},
                 {"theta_c", r.theta_c},     {"mean_og", detail::json_number(r.mean_og)},
                 {"flagged", r.flagged},     {"cells", cells}};
  fs::create_directories(f.out);
  write_file(fs::path(f.out) / "tuning.json", out.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive derivative-free optimisation with correlated finite differences"};
  app.require_subcommand(1);
  CommonFlags run_f, bench_f, tune_f;
  auto* run_cmd = app.add_subcommand("run", "one optimisation run");
  auto* bench_cmd = app.add_subcommand("bench", "replicated experiment grid from a config");
  auto* tune_cmd = app.add_subcommand("tune-spsa", "grid-search SPSA gains on one problem");
  add_common(run_cmd, run_f);
  add_common(bench_cmd, bench_f);
  add_common(tune_cmd, tune_f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run_cmd) return cmd_run(run_f);
    if (*bench_cmd) return cmd_bench(bench_f);
    return cmd_tune(tune_f);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

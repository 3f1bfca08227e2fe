#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "cordfo/bench.hpp"
#include "cordfo/config.hpp"

namespace cordfo {

struct ReplicationRow {
  std::string problem;
  double sigma = 0.0;
  std::string algorithm;
  std::uint64_t replication = 0;
  std::uint64_t budget_pairs = 0;
  Metrics metrics;
  std::uint64_t evals_used = 0;
  double wall_ms = 0.0;
  std::string error;  // nonempty when the replication threw

  bool failed() const { return !error.empty(); }
};

struct TuningRecord {
  std::string problem;
  double sigma = 0.0;
  std::uint64_t budget_evals = 0;
  TuneResult result;
};

struct ExperimentResult {
  std::vector<ReplicationRow> rows;
  std::vector<TuningRecord> tuning;
};

namespace detail {

inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip form
  return std::string(buf, res.ptr);
}

// JSON has no infinities; they are written as strings so they survive a round trip.
inline json json_number(double v) {
  if (std::isfinite(v)) return v;
  return fmt_double(v);
}

}  // namespace detail

/// Every (problem, sigma) x algorithm x budget x replication run is independent;
/// replication r always draws from the stream keyed by (seed, r).
inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  ExperimentResult out;

  std::vector<Problem> problems;
  for (const auto& ps : spec.problems) problems.push_back(make_problem(ps));

  // Tuned SPSA gains, one grid search per (problem, sigma).
  std::map<std::size_t, GainSchedule> tuned;
  const bool any_tune = std::any_of(spec.algorithms.begin(), spec.algorithms.end(), [](const auto& a) { return a.tune; });
  if (any_tune) {
    for (std::size_t p = 0; p < problems.size(); ++p) {
      TuneOptions opt;
      opt.budget = 2000 * problems[p].dim;
      opt.replications = spec.tune_replications;
      opt.threads = spec.parallel;
      opt.seed = spec.seed;
      TuningRecord rec{problems[p].name, spec.problems[p].sigma, opt.budget, tune_spsa(problems[p], opt)};
      tuned[p] = GainSchedule{rec.result.theta_a, rec.result.theta_c, GainForm::spsa};
      out.tuning.push_back(std::move(rec));
    }
  }

  struct Cell {
    std::size_t problem;
    std::size_t algorithm;
    std::uint64_t pairs;
    RunConfig config;
  };
  std::vector<Cell> cells;
  for (std::size_t p = 0; p < problems.size(); ++p) {
    for (std::size_t a = 0; a < spec.algorithms.size(); ++a) {
      RunConfig base = parse_run_config(spec.algorithms[a].overrides, default_run_config(problems[p]));
      if (spec.algorithms[a].tune) base.gains = tuned.at(p);
      base.seed = spec.seed;
      base.record_iterates = problems[p].bounded();
      for (std::uint64_t pairs : spec.budget_pairs) {
        RunConfig c = base;
        c.budget = spec.budget_evals(pairs, problems[p].dim);
        cells.push_back({p, a, pairs, c});
      }
    }
  }

  const std::size_t reps = spec.replications;
  out.rows.resize(cells.size() * reps);
  parallel_for(out.rows.size(), spec.parallel, [&](std::size_t job) {
    const Cell& cell = cells[job / reps];
    const Problem& problem = problems[cell.problem];
    ReplicationRow& row = out.rows[job];
    row.problem = problem.name;
    row.sigma = spec.problems[cell.problem].sigma;
    row.algorithm = spec.algorithms[cell.algorithm].label;
    row.replication = job % reps;
    row.budget_pairs = cell.pairs;
    RunConfig c = cell.config;
    c.replication = row.replication;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const Trajectory t = run(problem, c);
      row.metrics = compute_metrics(problem, t);
      row.evals_used = t.evals_used;
    } catch (const std::exception& e) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.metrics = {nan, nan, 0, false};
      row.error = e.what();
    }
    if (spec.record_wall_time)
      row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  });
  return out;
}

inline void write_csv(const std::vector<ReplicationRow>& rows, std::ostream& os) {
  os << "problem,sigma,algorithm,replication,budget_pairs,solution_error,optimality_gap,"
        "oscillatory_period,success,evals_used,wall_ms\n";
  for (const auto& r : rows) {
    os << r.problem << ',' << detail::fmt_double(r.sigma) << ',' << r.algorithm << ',' << r.replication << ','
       << r.budget_pairs << ',' << detail::fmt_double(r.metrics.solution_error) << ','
       << detail::fmt_double(r.metrics.optimality_gap) << ',' << r.metrics.oscillatory_period << ','
       << (r.metrics.success ? "true" : "false") << ',' << r.evals_used << ',' << detail::fmt_double(r.wall_ms)
       << '\n';
  }
}

inline json summary_json(const Summary& s) {
  return {{"mean", detail::json_number(s.mean)},
          {"median", detail::json_number(s.median)},
          {"q05", detail::json_number(s.q05)},
          {"q95", detail::json_number(s.q95)}};
}

/// Aggregates per (problem, sigma, algorithm, budget) in first-seen order.
/// Failed replications are counted but excluded from the statistics.
inline json aggregate_json(const ExperimentResult& result, const std::string& name = "experiment") {
  struct Group {
    const ReplicationRow* first = nullptr;
    std::vector<double> err, og, osc, og_success;
    std::size_t successes = 0, failures = 0, count = 0;
  };
  std::vector<Group> groups;
  std::map<std::tuple<std::string, double, std::string, std::uint64_t>, std::size_t> index;
  for (const auto& r : result.rows) {
    const auto key = std::make_tuple(r.problem, r.sigma, r.algorithm, r.budget_pairs);
    auto [it, inserted] = index.try_emplace(key, groups.size());
    if (inserted) groups.emplace_back().first = &r;
    Group& g = groups[it->second];
    ++g.count;
    if (r.failed()) {
      ++g.failures;
      continue;
    }
    g.err.push_back(r.metrics.solution_error);
    g.og.push_back(r.metrics.optimality_gap);
    g.osc.push_back(static_cast<double>(r.metrics.oscillatory_period));
    if (r.metrics.success) {
      ++g.successes;
      g.og_success.push_back(r.metrics.optimality_gap);
    }
  }

  json cells = json::array();
  for (const auto& g : groups) {
    const std::size_t completed = g.count - g.failures;
    const double rate = completed ? static_cast<double>(g.successes) / static_cast<double>(completed) : 0.0;
    cells.push_back({{"problem", g.first->problem},
                     {"sigma", g.first->sigma},
                     {"algorithm", g.first->algorithm},
                     {"budget_pairs", g.first->budget_pairs},
                     {"replications", g.count},
                     {"failures", g.failures},
                     {"solution_error", summary_json(summarize(g.err))},
                     {"optimality_gap", summary_json(summarize(g.og))},
                     {"oscillatory_period", summary_json(summarize(g.osc))},
                     {"success_rate", rate},
                     {"optimality_gap_successful", summary_json(summarize(g.og_success))}});
  }

  json tuning = json::array();
  for (const auto& t : result.tuning) {
    tuning.push_back({{"problem", t.problem},
                      {"sigma", t.sigma},
                      {"budget_evals", t.budget_evals},
                      {"theta_a", t.result.theta_a},
                      {"theta_c", t.result.theta_c},
                      {"mean_optimality_gap", detail::json_number(t.result.mean_og)},
                      {"flagged", t.result.flagged}});
  }

  json failures = json::array();
  for (const auto& r : result.rows) {
    if (r.failed())
      failures.push_back({{"problem", r.problem},
                          {"sigma", r.sigma},
                          {"algorithm", r.algorithm},
                          {"budget_pairs", r.budget_pairs},
                          {"replication", r.replication},
                          {"error", r.error}});
  }
  return {{"name", name}, {"cells", cells}, {"tuning", tuning}, {"failures", failures}};
}

/// Writes <dir>/replications.csv and <dir>/aggregate.json.
inline void write_results(const ExperimentResult& result, const std::filesystem::path& dir,
                          const std::string& name = "experiment") {
  std::filesystem::create_directories(dir);
  {
    std::ofstream csv(dir / "replications.csv", std::ios::binary);
    write_csv(result.rows, csv);
    if (!csv) throw std::runtime_error("failed writing " + (dir / "replications.csv").string());
  }
  std::ofstream js(dir / "aggregate.json", std::ios::binary);
  js << aggregate_json(result, name).dump(2) << '\n';
  if (!js) throw std::runtime_error("failed writing " + (dir / "aggregate.json").string());
}

}  // namespace cordfo

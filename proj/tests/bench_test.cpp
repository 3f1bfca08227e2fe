#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "cordfo/experiment.hpp"

using namespace cordfo;

TEST(Oscillation, CountsBoundaryFlips) {
  const Problem p = problems::power4(0.0);
  const std::vector<Vector> xs{{30.0}, {-50.0}, {50.0}, {-50.0}, {3.2}};
  EXPECT_EQ(oscillatory_period(xs, p), 2u);
  EXPECT_EQ(oscillatory_period({{30.0}, {10.0}, {0.5}}, p), 0u);
  EXPECT_EQ(oscillatory_period({{30.0}, {50.0}, {50.0}, {50.0}}, p), 0u);
  EXPECT_EQ(oscillatory_period(xs, problems::rosenbrock(0.0)), 0u);
}

TEST(Metrics, KnownValues) {
  const Problem p = problems::power4(0.0);
  Metrics m = compute_metrics(p, Vector{0.0});
  EXPECT_EQ(m.solution_error, 0.0);
  EXPECT_EQ(m.optimality_gap, 0.0);
  EXPECT_TRUE(m.success);
  m = compute_metrics(p, Vector{0.42});
  EXPECT_DOUBLE_EQ(m.solution_error, 0.42);
  EXPECT_NEAR(m.optimality_gap, 0.0311, 1e-4);
  const Problem r = problems::rosenbrock(0.0);
  m = compute_metrics(r, r.x0);
  EXPECT_NEAR(m.optimality_gap, 267.62, 1e-9);
  EXPECT_FALSE(m.success);
  m = compute_metrics(r, Vector{NAN, 1.0});
  EXPECT_TRUE(std::isinf(m.optimality_gap));
  EXPECT_FALSE(m.success);
}

TEST(ParallelFor, VisitsEveryIndexAndPropagatesErrors) {
  std::vector<int> hit(100, 0);
  parallel_for(100, 4, [&](std::size_t i) { hit[i]++; });
  for (int h : hit) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 7) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}

TEST(Tune, SingleCellGrid) {
  TuneOptions o;
  o.grid = {{0.01}, {0.1}};
  o.replications = 2;
  o.budget = 100;
  const TuneResult r = tune_spsa(problems::rosenbrock(1.0), o);
  EXPECT_EQ(r.theta_a, 0.01);
  EXPECT_EQ(r.theta_c, 0.1);
  EXPECT_EQ(r.cells.size(), 1u);
}

TEST(Tune, DivergingStepLoses) {
  TuneOptions o;
  o.grid = {{1e3, 1e-3}, {1.0}};
  o.replications = 3;
  o.budget = 200;
  const TuneResult r = tune_spsa(problems::quadratic(2, 0.0, 1.0), o);
  EXPECT_EQ(r.theta_a, 1e-3);
  EXPECT_FALSE(r.flagged);
}

TEST(Tune, TiesGoToSmallerGains) {
  TuneOptions o;
  o.grid = {{1e-2, 0.0}, {1.0, 0.5}};
  o.replications = 2;
  o.budget = 20;
  Problem p = problems::quadratic(1, 0.0, 0.0);  // started at the optimum: every cell scores 0
  const TuneResult r = tune_spsa(p, o);
  EXPECT_EQ(r.theta_a, 0.0);
  EXPECT_EQ(r.theta_c, 0.5);
}

TEST(Tune, AllDivergingIsFlagged) {
  TuneOptions o;
  o.grid = {{1e200}, {1.0}};
  o.replications = 2;
  o.budget = 2000;
  const TuneResult r = tune_spsa(problems::quadratic(2, 0.0, 1.0), o);
  EXPECT_TRUE(r.flagged);
  EXPECT_THROW(tune_spsa(problems::quadratic(2, 0.0), TuneOptions{0, 1, 1, 0, TuneGrid{}}), std::invalid_argument);
}

TEST(Summary, NearestRankTriples) {
  std::vector<double> v;
  for (int i = 1; i <= 200; ++i) v.push_back(i);
  const Summary s = summarize(v);
  EXPECT_EQ(s.q05, 10.0);
  EXPECT_EQ(s.median, 100.0);
  EXPECT_EQ(s.q95, 190.0);
  EXPECT_DOUBLE_EQ(s.mean, 100.5);
  std::reverse(v.begin(), v.end());
  const Summary t = summarize(v);
  EXPECT_EQ(t.median, s.median);
  EXPECT_EQ(t.mean, s.mean);
}

namespace {

ExperimentSpec small_spec() {
  ExperimentSpec s;
  s.seed = 4;
  s.replications = 1;
  ProblemSpec ps;
  ps.name = "power4";
  ps.sigma = 0.1;
  s.problems = {ps};
  s.algorithms = {AlgorithmSpec{"AdaDFO", json{{"algorithm", "adadfo_ls"}}, false}};
  s.budget_pairs = {100};
  return s;
}

}  // namespace

TEST(Experiment, OneRowPerRun) {
  const ExperimentResult r = run_experiment(small_spec());
  std::ostringstream os;
  write_csv(r.rows, os);
  const std::string csv = os.str();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "problem,sigma,algorithm,replication,budget_pairs,solution_error,optimality_gap,oscillatory_period,"
            "success,evals_used,wall_ms");
  EXPECT_EQ(r.rows[0].evals_used >= 200, true);
}

TEST(Experiment, GridLayout) {
  ExperimentSpec s = small_spec();
  s.replications = 2;
  s.problems.clear();
  for (double sigma : {0.1, 1.0, 10.0}) {
    ProblemSpec ps;
    ps.sigma = sigma;
    s.problems.push_back(ps);
  }
  s.algorithms.push_back(AlgorithmSpec{"KWSA", json{{"algorithm", "kwsa"}}, false});
  s.budget_pairs = {100, 1000, 10000};
  const json agg = aggregate_json(run_experiment(s));
  EXPECT_EQ(agg["cells"].size(), 18u);
  for (const auto& cell : agg["cells"]) {
    EXPECT_TRUE(cell["solution_error"].contains("q05"));
    EXPECT_TRUE(cell["solution_error"].contains("median"));
    EXPECT_TRUE(cell["solution_error"].contains("q95"));
  }
}

TEST(Experiment, ByteIdenticalAndOrderInvariant) {
  ExperimentSpec s = small_spec();
  s.replications = 4;
  auto render = [](const ExperimentSpec& spec) {
    const ExperimentResult r = run_experiment(spec);
    std::ostringstream os;
    write_csv(r.rows, os);
    return os.str() + aggregate_json(r).dump();
  };
  const std::string a = render(s);
  EXPECT_EQ(a, render(s));
  s.parallel = 3;
  EXPECT_EQ(a, render(s));

  ExperimentResult r = run_experiment(s);
  const json forward = aggregate_json(r);
  std::reverse(r.rows.begin(), r.rows.end());
  const json backward = aggregate_json(r);
  EXPECT_EQ(forward["cells"][0]["optimality_gap"], backward["cells"][0]["optimality_gap"]);
}

TEST(Experiment, FailedReplicationIsRecorded) {
  ExperimentResult r;
  ReplicationRow ok;
  ok.problem = "p";
  ok.algorithm = "a";
  ok.metrics = {1.0, 2.0, 0, true};
  ReplicationRow bad = ok;
  bad.replication = 1;
  bad.error = "boom";
  r.rows = {ok, bad};
  const json agg = aggregate_json(r);
  EXPECT_EQ(agg["cells"][0]["failures"], 1);
  EXPECT_EQ(agg["cells"][0]["replications"], 2);
  EXPECT_EQ(agg["failures"].size(), 1u);
  EXPECT_EQ(agg["cells"][0]["success_rate"], 1.0);
}

TEST(Experiment, WritesFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "cordfo_bench_test";
  std::filesystem::remove_all(dir);
  write_results(run_experiment(small_spec()), dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "replications.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "aggregate.json"));
  std::filesystem::remove_all(dir);
}

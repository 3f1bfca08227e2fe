#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cordfo/corcfd.hpp"
#include "cordfo/fd.hpp"
#include "cordfo/linesearch.hpp"
#include "cordfo/problem.hpp"
#include "cordfo/sampling.hpp"

namespace cordfo {

enum class Algorithm { adadfo_const, adadfo_ls, kwsa, spsa };

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::adadfo_const: return "adadfo_const";
    case Algorithm::adadfo_ls: return "adadfo_ls";
    case Algorithm::kwsa: return "kwsa";
    case Algorithm::spsa: return "spsa";
  }
  return "unknown";
}

inline Algorithm algorithm_from_string(std::string_view s) {
  if (s == "adadfo_const") return Algorithm::adadfo_const;
  if (s == "adadfo_ls" || s == "adadfo") return Algorithm::adadfo_ls;
  if (s == "kwsa") return Algorithm::kwsa;
  if (s == "spsa") return Algorithm::spsa;
  throw std::invalid_argument("unknown algorithm: " + std::string(s));
}

struct RunConfig {
  Algorithm algorithm = Algorithm::adadfo_ls;
  std::uint64_t budget = 2000;  // function evaluations S
  std::size_t n0 = 10;
  double step = 0.5;  // constant step a (adadfo_const)
  double theta = 0.7;
  std::size_t max_pairs_per_iteration = 10000;
  CorCfdConfig corcfd;
  LineSearchConfig ls;
  GainSchedule gains;
  std::uint64_t seed = 0;
  std::uint64_t replication = 0;
  // Refuse evaluations beyond `budget` and drop an iteration cut short,
  // instead of letting the last iteration overshoot.
  bool strict_budget = false;
  bool record_iterates = true;
};

enum class Termination { budget_reached, budget_exhausted, diverged };

inline std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::budget_reached: return "budget_reached";
    case Termination::budget_exhausted: return "budget_exhausted";
    case Termination::diverged: return "diverged";
  }
  return "unknown";
}

struct IterationRecord {
  std::size_t k = 0;
  Vector x;  // iterate after this iteration's update (empty unless recorded)
  double step = 0.0;
  std::size_t n_k = 0;
  std::uint64_t n_ls = 0;
  std::uint64_t evals = 0;  // evaluations spent in this iteration
  std::uint64_t s = 0;      // cumulative evaluations after the update
  bool ls_certified = false;
  bool ls_safeguard = false;
  bool degenerate_gradient = false;
};

struct Trajectory {
  Vector start;
  std::vector<IterationRecord> records;
  Vector final_x;
  Termination termination = Termination::budget_reached;
  std::uint64_t evals_used = 0;

  /// x_1 = start, x_2, ... (needs record_iterates).
  std::vector<Vector> iterates() const {
    std::vector<Vector> out;
    out.reserve(records.size() + 1);
    out.push_back(start);
    for (const auto& r : records) out.push_back(r.x);
    return out;
  }
};

namespace detail {

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline EvaluationBudget make_budget(const RunConfig& c) {
  return EvaluationBudget(c.budget, c.strict_budget ? c.budget : EvaluationBudget::unlimited);
}

inline RngStream run_stream(const RunConfig& c) {
  return RngStream(c.seed, StreamKey{c.replication, static_cast<std::uint64_t>(StreamPurpose::run), 0});
}

inline void step_from(const Problem& problem, Vector& x, std::span<const double> g, double a) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] -= a * g[i];
  x = project(problem, x);
}

// Gradient plus the one-shot adaptive growth shared by both AdaDFO drivers.
inline std::optional<GradientEstimate> adaptive_gradient(const Problem& problem, const Vector& x,
                                                         std::size_t& n_k, const RunConfig& c,
                                                         EvaluationBudget& budget, RngStream& stream,
                                                         bool& degenerate) {
  RngStream grad_stream = stream.fork(StreamPurpose::evaluation);
  GradientEstimate est = cor_cfd_gradient(problem, x, n_k, c.corcfd, budget, grad_stream);
  if (!est.complete) return std::nullopt;

  const SamplingRule rule{c.theta, c.corcfd.num_perturbations, c.max_pairs_per_iteration};
  const NormCheck check = norm_condition_holds(est, rule);
  degenerate = check.degenerate;
  if (!check.holds) {
    const std::size_t cap =
        std::max(round_up_to_multiple(c.max_pairs_per_iteration, c.corcfd.num_perturbations), est.n_k);
    const auto wanted = required_pairs(est, rule);
    const std::size_t target = wanted ? std::min(*wanted, cap) : cap;
    if (target > est.n_k) {
      est = augment_gradient(est, target, problem, x, c.corcfd, budget, grad_stream);
      if (!est.complete) return std::nullopt;
    }
  }
  n_k = est.n_k;
  return est;
}

inline void validate_adadfo(const Problem& problem, const RunConfig& c) {
  problem.validate();
  c.corcfd.validate();
  if (!(c.theta > 0.0)) throw std::invalid_argument("theta must be positive");
  if (c.n0 < 2 * c.corcfd.num_perturbations) throw std::invalid_argument("n0 must be at least 2K");
}

}  // namespace detail

/// Cor-CFD gradient descent with adaptive batch size and constant step.
inline Trajectory run_adadfo_const(const Problem& problem, const RunConfig& c) {
  detail::validate_adadfo(problem, c);
  if (!(c.step > 0.0)) throw std::invalid_argument("step must be positive");

  EvaluationBudget budget = detail::make_budget(c);
  RngStream stream = detail::run_stream(c);
  Trajectory t;
  t.start = problem.x0;
  Vector x = problem.x0;
  std::size_t n_k = round_up_to_multiple(c.n0, c.corcfd.num_perturbations);

  for (std::size_t k = 1; !budget.target_reached(); ++k) {
    const std::uint64_t before = budget.used();
    bool degenerate = false;
    const auto est = detail::adaptive_gradient(problem, x, n_k, c, budget, stream, degenerate);
    if (!est) {
      t.termination = Termination::budget_exhausted;
      break;
    }
    detail::step_from(problem, x, est->g, c.step);
    IterationRecord r;
    r.k = k;
    if (c.record_iterates) r.x = x;
    r.step = c.step;
    r.n_k = n_k;
    r.evals = budget.used() - before;
    r.s = budget.used();
    r.degenerate_gradient = degenerate;
    t.records.push_back(std::move(r));
    if (!detail::all_finite(x)) {
      t.termination = Termination::diverged;
      break;
    }
  }
  t.final_x = x;
  t.evals_used = budget.used();
  return t;
}

/// Cor-CFD gradient descent with adaptive batch size and the two-phase
/// stochastic line search, restarted from a_init every iteration.
inline Trajectory run_adadfo_ls(const Problem& problem, const RunConfig& c) {
  detail::validate_adadfo(problem, c);
  c.ls.validate();

  EvaluationBudget budget = detail::make_budget(c);
  RngStream stream = detail::run_stream(c);
  Trajectory t;
  t.start = problem.x0;
  Vector x = problem.x0;
  std::size_t n_k = round_up_to_multiple(c.n0, c.corcfd.num_perturbations);

  for (std::size_t k = 1; !budget.target_reached(); ++k) {
    const std::uint64_t before = budget.used();
    bool degenerate = false;
    const auto est = detail::adaptive_gradient(problem, x, n_k, c, budget, stream, degenerate);
    if (!est) {
      t.termination = Termination::budget_exhausted;
      break;
    }
    const double sigma_f = c.ls.sigma_f ? *c.ls.sigma_f : estimate_sigma_f(*est);
    RngStream ls_stream = stream.fork(StreamPurpose::line_search);
    const LineSearchResult ls = search(problem, x, est->g, sigma_f, c.ls, budget, ls_stream);
    detail::step_from(problem, x, est->g, ls.step);

    IterationRecord r;
    r.k = k;
    if (c.record_iterates) r.x = x;
    r.step = ls.step;
    r.n_k = n_k;
    r.n_ls = ls.evals;
    r.evals = budget.used() - before;
    r.s = budget.used();
    r.ls_certified = ls.certified;
    r.ls_safeguard = ls.safeguard;
    r.degenerate_gradient = degenerate;
    t.records.push_back(std::move(r));
    if (!detail::all_finite(x)) {
      t.termination = Termination::diverged;
      break;
    }
    if (ls.budget_exhausted) {
      t.termination = Termination::budget_exhausted;
      break;
    }
  }
  t.final_x = x;
  t.evals_used = budget.used();
  return t;
}

/// Kiefer-Wolfowitz recursion: one central-difference pair per coordinate
/// per iteration with gains theta_a / k and theta_c / k^(1/4).
inline Trajectory run_kwsa(const Problem& problem, const RunConfig& c) {
  problem.validate();
  GainSchedule gains = c.gains;
  gains.form = GainForm::kwsa;

  EvaluationBudget budget = detail::make_budget(c);
  RngStream stream = detail::run_stream(c);
  Trajectory t;
  t.start = problem.x0;
  Vector x = problem.x0;
  Vector g(problem.dim);

  for (std::size_t k = 1; !budget.target_reached(); ++k) {
    const std::uint64_t before = budget.used();
    const Gains gk = kwsa_gains(gains, k);
    bool cut = false;
    for (std::size_t i = 0; i < problem.dim && !cut; ++i) {
      const auto q = central_quotient(problem, x, i, gk.perturbation, budget, stream);
      if (!q) cut = true;
      else g[i] = *q;
    }
    if (cut) {
      t.termination = Termination::budget_exhausted;
      break;
    }
    detail::step_from(problem, x, g, gk.step);
    IterationRecord r;
    r.k = k;
    if (c.record_iterates) r.x = x;
    r.step = gk.step;
    r.n_k = 1;
    r.evals = budget.used() - before;
    r.s = budget.used();
    t.records.push_back(std::move(r));
    if (!detail::all_finite(x)) {
      t.termination = Termination::diverged;
      break;
    }
  }
  t.final_x = x;
  t.evals_used = budget.used();
  return t;
}

/// SPSA with a_k = theta_a / (k + 50)^0.602 and c_k = theta_c / k^0.101.
inline Trajectory run_spsa(const Problem& problem, const RunConfig& c) {
  problem.validate();
  GainSchedule gains = c.gains;
  gains.form = GainForm::spsa;

  EvaluationBudget budget = detail::make_budget(c);
  RngStream stream = detail::run_stream(c);
  Trajectory t;
  t.start = problem.x0;
  Vector x = problem.x0;

  for (std::size_t k = 1; !budget.target_reached(); ++k) {
    const std::uint64_t before = budget.used();
    const auto g = spsa_gradient(problem, x, gains, k, budget, stream);
    if (!g) {
      t.termination = Termination::budget_exhausted;
      break;
    }
    const Gains gk = spsa_gains(gains, k);
    detail::step_from(problem, x, *g, gk.step);
    IterationRecord r;
    r.k = k;
    if (c.record_iterates) r.x = x;
    r.step = gk.step;
    r.n_k = 1;
    r.evals = budget.used() - before;
    r.s = budget.used();
    t.records.push_back(std::move(r));
    if (!detail::all_finite(x)) {
      t.termination = Termination::diverged;
      break;
    }
  }
  t.final_x = x;
  t.evals_used = budget.used();
  return t;
}

/// Returns an approximate gradient at x; lets the constant-step recursion be
/// driven by errors of known size instead of a finite-difference estimator.
using GradientOracle = std::function<Vector(std::span<const double>, RngStream&)>;

/// x_{k+1} = project(x_k - a g_k) for `iterations` steps; returns x_1..x_{K+1}.
inline std::vector<Vector> run_with_oracle(const Problem& problem, const GradientOracle& oracle, double a,
                                           std::size_t iterations, RngStream& stream) {
  problem.validate();
  if (!(a > 0.0)) throw std::invalid_argument("step must be positive");
  std::vector<Vector> xs{problem.x0};
  xs.reserve(iterations + 1);
  Vector x = problem.x0;
  for (std::size_t k = 0; k < iterations; ++k) {
    const Vector g = oracle(x, stream);
    if (g.size() != problem.dim) throw std::invalid_argument("oracle returned wrong dimension");
    detail::step_from(problem, x, g, a);
    xs.push_back(x);
  }
  return xs;
}

inline Trajectory run(const Problem& problem, const RunConfig& c) {
  switch (c.algorithm) {
    case Algorithm::adadfo_const: return run_adadfo_const(problem, c);
    case Algorithm::adadfo_ls: return run_adadfo_ls(problem, c);
    case Algorithm::kwsa: return run_kwsa(problem, c);
    case Algorithm::spsa: return run_spsa(problem, c);
  }
  throw std::invalid_argument("unknown algorithm");
}

}  // namespace cordfo

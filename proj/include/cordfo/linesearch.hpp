#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>

#include "cordfo/corcfd.hpp"
#include "cordfo/problem.hpp"
#include "cordfo/stats.hpp"

namespace cordfo {

struct LineSearchConfig {
  double l1 = 1e-4;
  double l2 = 0.5;
  double a_init = 1.0;
  double a_lb = 0.0;
  std::size_t max_samples = 10;  // N0
  // Noise level used in both tests; estimated from the pilot fits when unset.
  std::optional<double> sigma_f;
  std::size_t max_shrinks = 60;

  void validate() const {
    if (!(l1 > 0.0 && l1 < l2 && l2 < 1.0)) throw std::invalid_argument("line search needs 0 < l1 < l2 < 1");
    if (!(a_init > 0.0)) throw std::invalid_argument("initial step must be positive");
    if (!(a_lb >= 0.0 && a_lb < a_init)) throw std::invalid_argument("step lower bound must lie in [0, a_init)");
    if (max_samples == 0) throw std::invalid_argument("N0 must be positive");
    if (max_shrinks == 0) throw std::invalid_argument("max_shrinks must be positive");
    if (sigma_f && !(*sigma_f >= 0.0)) throw std::invalid_argument("sigma_f must be nonnegative");
  }
};

/// Relaxed Armijo test: true means the step is "bad" and must shrink.
inline bool reject_step(double f_next, double f_curr, double a, double g_norm_sq, double l1, double sigma_f) {
  return f_next > f_curr - l1 * a * g_norm_sq + 2.0 * sigma_f;
}

/// Averaged strong-decrease test over N paired evaluations.
inline bool accept_step(double mean_next, double mean_curr, std::size_t n, double a, double g_norm_sq,
                        double l1, double sigma_f) {
  return mean_next <= mean_curr - l1 * a * g_norm_sq - 2.0 * sigma_f / std::sqrt(static_cast<double>(n));
}

/// sqrt of the mean pilot noise-variance estimate across coordinates.
inline double estimate_sigma_f(const GradientEstimate& est) {
  if (est.fits.empty()) return 0.0;
  double s = 0.0;
  for (const auto& fit : est.fits) s += fit.sigma2_hat;
  return std::sqrt(s / static_cast<double>(est.fits.size()));
}

struct LineSearchResult {
  double step = 0.0;
  std::uint64_t evals = 0;
  bool certified = false;       // the averaged test passed
  bool safeguard = false;       // max_shrinks reached
  bool budget_exhausted = false;
};

/// Two-phase search from a_init along -g: shrink by l2 while the relaxed
/// Armijo test rejects, then shrink until the averaged test passes for some
/// N <= N0 or the step reaches a_lb. Candidates are projected onto the box.
inline LineSearchResult search(const Problem& problem, std::span<const double> x, std::span<const double> g,
                               double sigma_f, const LineSearchConfig& config, EvaluationBudget& budget,
                               RngStream& stream) {
  config.validate();
  if (g.size() != problem.dim) throw std::invalid_argument("search: gradient has wrong dimension");
  const double g2 = stats::squared_norm(g);
  const std::uint64_t start = budget.used();

  LineSearchResult out;
  double a = config.a_init;
  std::size_t shrinks = 0;
  Vector trial(problem.dim);
  auto place = [&](double step) {
    for (std::size_t i = 0; i < problem.dim; ++i) trial[i] = x[i] - step * g[i];
    trial = project(problem, trial);
  };
  auto finish = [&](double step) {
    out.step = step;
    out.evals = budget.used() - start;
    return out;
  };

  // Phase 1: discard clearly bad steps.
  for (;;) {
    place(a);
    const auto f_next = evaluate(problem, trial, budget, stream, EvalKind::line_search);
    const auto f_curr = f_next ? evaluate(problem, x, budget, stream, EvalKind::line_search) : std::nullopt;
    if (!f_curr) {
      out.budget_exhausted = true;
      return finish(a);
    }
    if (!reject_step(*f_next, *f_curr, a, g2, config.l1, sigma_f)) break;
    if (shrinks == config.max_shrinks) {
      out.safeguard = true;
      return finish(std::max(a, config.a_lb));
    }
    a *= config.l2;
    ++shrinks;
  }

  // Phase 2: certify a good step with up to N0 paired evaluations.
  while (a > config.a_lb) {
    place(a);
    double sum_next = 0.0;
    double sum_curr = 0.0;
    for (std::size_t n = 1; n <= config.max_samples; ++n) {
      const auto f_next = evaluate(problem, trial, budget, stream, EvalKind::line_search);
      const auto f_curr = f_next ? evaluate(problem, x, budget, stream, EvalKind::line_search) : std::nullopt;
      if (!f_curr) {
        out.budget_exhausted = true;
        return finish(a);
      }
      sum_next += *f_next;
      sum_curr += *f_curr;
      const auto nn = static_cast<double>(n);
      if (accept_step(sum_next / nn, sum_curr / nn, n, a, g2, config.l1, sigma_f)) {
        out.certified = true;
        return finish(a);
      }
    }
    if (shrinks == config.max_shrinks) {
      out.safeguard = true;
      return finish(std::max(a, config.a_lb));
    }
    a *= config.l2;
    ++shrinks;
  }
  return finish(config.a_lb);
}

}  // namespace cordfo

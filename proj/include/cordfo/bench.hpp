#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "cordfo/optim.hpp"
#include "cordfo/problem.hpp"
#include "cordfo/stats.hpp"

namespace cordfo {

struct Metrics {
  double solution_error = 0.0;
  double optimality_gap = 0.0;
  std::size_t oscillatory_period = 0;
  bool success = false;
};

inline bool on_boundary(const Problem& problem, std::span<const double> x) {
  for (std::size_t i = 0; i < problem.dim; ++i) {
    const Interval& iv = problem.box[i];
    if ((std::isfinite(iv.lo) && x[i] == iv.lo) || (std::isfinite(iv.hi) && x[i] == iv.hi)) return true;
  }
  return false;
}

/// |{k >= 2 : x_{k-1}, x_k on the boundary and x_k != x_{k-1}}| with x_1 the
/// start point. Zero for an unbounded box.
inline std::size_t oscillatory_period(const std::vector<Vector>& iterates, const Problem& problem) {
  if (!problem.bounded()) return 0;
  std::size_t count = 0;
  for (std::size_t j = 1; j < iterates.size(); ++j) {
    const Vector& prev = iterates[j - 1];
    const Vector& curr = iterates[j];
    if (prev.empty() || curr.empty()) continue;
    if (on_boundary(problem, prev) && on_boundary(problem, curr) && curr != prev) ++count;
  }
  return count;
}

inline Metrics compute_metrics(const Problem& problem, std::span<const double> final_x,
                               std::size_t oscillation = 0) {
  Metrics m;
  m.oscillatory_period = oscillation;
  const bool finite = std::all_of(final_x.begin(), final_x.end(), [](double v) { return std::isfinite(v); });
  if (!finite) {
    m.solution_error = kInf;
    m.optimality_gap = kInf;
    return m;
  }
  double e2 = 0.0;
  for (std::size_t i = 0; i < problem.dim; ++i) e2 += (final_x[i] - problem.x_star[i]) * (final_x[i] - problem.x_star[i]);
  m.solution_error = std::sqrt(e2);
  const double f_star = evaluate_true(problem, problem.x_star);
  m.optimality_gap = evaluate_true(problem, final_x) - f_star;
  if (!std::isfinite(m.optimality_gap)) m.optimality_gap = kInf;
  m.success = m.optimality_gap < evaluate_true(problem, problem.x0) - f_star;
  return m;
}

inline Metrics compute_metrics(const Problem& problem, const Trajectory& t) {
  const bool have_iterates = std::all_of(t.records.begin(), t.records.end(), [](const auto& r) { return !r.x.empty(); });
  const std::size_t osc = have_iterates ? oscillatory_period(t.iterates(), problem) : 0;
  return compute_metrics(problem, t.final_x, osc);
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers. The first
/// exception thrown by any task is rethrown after all workers join.
template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct TuneGrid {
  std::vector<double> theta_a;
  std::vector<double> theta_c;

  /// theta_a in {1e-9, ..., 1e2}, theta_c in {1e-4, ..., 1e2}.
  static TuneGrid standard() {
    TuneGrid g;
    for (int e = -9; e <= 2; ++e) g.theta_a.push_back(std::pow(10.0, e));
    for (int e = -4; e <= 2; ++e) g.theta_c.push_back(std::pow(10.0, e));
    return g;
  }
};

struct TuneCell {
  double theta_a = 0.0;
  double theta_c = 0.0;
  double mean_og = kInf;  // over finite outcomes only when nonfinite > 0
  std::size_t nonfinite = 0;
};

struct TuneResult {
  double theta_a = 0.0;
  double theta_c = 0.0;
  double mean_og = kInf;
  bool flagged = false;  // every cell had a non-finite outcome
  std::vector<TuneCell> cells;
};

struct TuneOptions {
  std::uint64_t budget = 0;  // evaluations per run; 0 means 2000 d
  std::size_t replications = 20;
  std::size_t threads = 1;
  std::uint64_t seed = 0;
  TuneGrid grid = TuneGrid::standard();
};

/// Grid search for SPSA gains: the cell with the smallest average optimality
/// gap over `replications` runs wins; ties go to the smaller theta_a, then the
/// smaller theta_c. Cells with diverged runs lose to any fully finite cell.
inline TuneResult tune_spsa(const Problem& problem, const TuneOptions& options) {
  if (options.grid.theta_a.empty() || options.grid.theta_c.empty())
    throw std::invalid_argument("tune_spsa: empty grid");
  if (options.replications == 0) throw std::invalid_argument("tune_spsa: need at least one replication");
  const std::uint64_t budget = options.budget ? options.budget : 2000 * problem.dim;

  std::vector<TuneCell> cells;
  for (double a : options.grid.theta_a)
    for (double c : options.grid.theta_c) cells.push_back({a, c, kInf, 0});

  const std::size_t reps = options.replications;
  std::vector<double> gaps(cells.size() * reps);
  const std::uint64_t tune_seed = detail::combine(options.seed, static_cast<std::uint64_t>(StreamPurpose::tuning));
  parallel_for(gaps.size(), options.threads, [&](std::size_t job) {
    const TuneCell& cell = cells[job / reps];
    RunConfig rc;
    rc.algorithm = Algorithm::spsa;
    rc.budget = budget;
    rc.gains = {cell.theta_a, cell.theta_c, GainForm::spsa};
    rc.seed = tune_seed;
    rc.replication = job % reps;
    rc.record_iterates = false;
    const Trajectory t = run_spsa(problem, rc);
    gaps[job] = compute_metrics(problem, t.final_x).optimality_gap;
  });

  for (std::size_t c = 0; c < cells.size(); ++c) {
    double sum = 0.0;
    std::size_t finite = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      const double g = gaps[c * reps + r];
      if (std::isfinite(g)) {
        sum += g;
        ++finite;
      }
    }
    cells[c].nonfinite = reps - finite;
    cells[c].mean_og = finite ? sum / static_cast<double>(finite) : kInf;
  }

  // Lexicographic: fewest non-finite outcomes, then mean OG, then theta_a, theta_c.
  const auto best = std::min_element(cells.begin(), cells.end(), [](const TuneCell& x, const TuneCell& y) {
    return std::tie(x.nonfinite, x.mean_og, x.theta_a, x.theta_c) <
           std::tie(y.nonfinite, y.mean_og, y.theta_a, y.theta_c);
  });
  TuneResult out;
  out.theta_a = best->theta_a;
  out.theta_c = best->theta_c;
  out.mean_og = best->mean_og;
  out.flagged = best->nonfinite > 0;
  out.cells = std::move(cells);
  return out;
}

struct Summary {
  double mean = 0.0;
  double median = 0.0;
  double q05 = 0.0;
  double q95 = 0.0;
};

inline Summary summarize(const std::vector<double>& v) {
  if (v.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan, nan, nan};
  }
  double sum = 0.0;
  for (double x : v) sum += x;
  return {sum / static_cast<double>(v.size()), stats::nearest_rank(v, 0.5), stats::nearest_rank(v, 0.05),
          stats::nearest_rank(v, 0.95)};
}

}  // namespace cordfo

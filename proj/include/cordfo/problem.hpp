#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cordfo/rng.hpp"

namespace cordfo {

using Vector = std::vector<double>;
using ScalarField = std::function<double(std::span<const double>)>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Interval {
  double lo = -kInf;
  double hi = kInf;

  bool contains(double v) const { return v >= lo && v <= hi; }
  bool finite() const { return std::isfinite(lo) || std::isfinite(hi); }
};

enum class NoiseKind {
  gaussian,  // N(0, sigma^2)
  uniform,   // U(-sqrt(3) sigma, sqrt(3) sigma), same variance
};

/// A noisy blackbox f(x) = F(x) + sigma(x) Z. Optimizers only see it through
/// evaluate(); objective and x_star are reserved for metrics.
struct Problem {
  std::string name;
  std::size_t dim = 1;
  std::vector<Interval> box;
  ScalarField objective;
  ScalarField noise_std;
  NoiseKind noise = NoiseKind::gaussian;
  Vector x0;
  Vector x_star;

  bool bounded() const {
    for (const auto& iv : box)
      if (iv.finite()) return true;
    return false;
  }

  bool in_box(std::span<const double> x) const {
    for (std::size_t i = 0; i < dim; ++i)
      if (!box[i].contains(x[i])) return false;
    return true;
  }

  void validate() const {
    if (dim == 0) throw std::invalid_argument(name + ": dimension must be positive");
    if (box.size() != dim || x0.size() != dim || x_star.size() != dim)
      throw std::invalid_argument(name + ": box, x0 and x_star must have length dim");
    if (!objective || !noise_std) throw std::invalid_argument(name + ": objective and noise map required");
    for (const auto& iv : box)
      if (!(iv.lo <= iv.hi)) throw std::invalid_argument(name + ": empty box interval");
    if (!in_box(x0)) throw std::invalid_argument(name + ": x0 outside the box");
    if (!in_box(x_star)) throw std::invalid_argument(name + ": x_star outside the box");
    if (!(noise_std(x0) >= 0.0)) throw std::invalid_argument(name + ": negative noise level");
  }
};

enum class EvalKind { gradient, line_search };

/// Evaluation accounting. `total` is the run target S checked at iteration
/// boundaries; `hard_limit` is where evaluate() starts refusing.
class EvaluationBudget {
 public:
  static constexpr std::uint64_t unlimited = std::numeric_limits<std::uint64_t>::max();

  explicit EvaluationBudget(std::uint64_t total = unlimited, std::uint64_t hard_limit = unlimited)
      : total_(total), hard_limit_(hard_limit) {}

  std::uint64_t total() const { return total_; }
  std::uint64_t hard_limit() const { return hard_limit_; }
  std::uint64_t used() const { return gradient_ + line_search_; }
  std::uint64_t gradient_evals() const { return gradient_; }
  std::uint64_t line_search_evals() const { return line_search_; }

  bool exhausted() const { return used() >= hard_limit_; }
  bool target_reached() const { return used() >= total_; }

  bool try_consume(EvalKind kind) {
    if (exhausted()) return false;
    (kind == EvalKind::gradient ? gradient_ : line_search_) += 1;
    return true;
  }

 private:
  std::uint64_t total_;
  std::uint64_t hard_limit_;
  std::uint64_t gradient_ = 0;
  std::uint64_t line_search_ = 0;
};

namespace detail {

inline void check_point(const Problem& problem, std::span<const double> x) {
  if (x.size() != problem.dim) throw std::invalid_argument("point has wrong dimension");
  for (double v : x)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite point");
}

}  // namespace detail

/// Metric-only access to F. Never counted.
inline double evaluate_true(const Problem& problem, std::span<const double> x) {
  detail::check_point(problem, x);
  return problem.objective(x);
}

/// One noisy draw f(x). Returns nullopt once the budget's hard limit is hit.
inline std::optional<double> evaluate(const Problem& problem, std::span<const double> x,
                                      EvaluationBudget& budget, RngStream& stream,
                                      EvalKind kind = EvalKind::gradient) {
  detail::check_point(problem, x);
  if (!budget.try_consume(kind)) return std::nullopt;
  const double value = problem.objective(x);
  const double sigma = problem.noise_std(x);
  if (sigma == 0.0) return value;
  double z = 0.0;
  switch (problem.noise) {
    case NoiseKind::gaussian:
      z = stream.normal();
      break;
    case NoiseKind::uniform:
      z = std::sqrt(3.0) * (2.0 * stream.uniform() - 1.0);
      break;
  }
  return value + sigma * z;
}

/// Per-coordinate clamp onto the box.
inline Vector project(const Problem& problem, std::span<const double> x) {
  if (x.size() != problem.dim) throw std::invalid_argument("point has wrong dimension");
  Vector out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::clamp(out[i], problem.box[i].lo, problem.box[i].hi);
  return out;
}

inline ScalarField constant_noise(double sigma) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("noise level must be nonnegative");
  return [sigma](std::span<const double>) { return sigma; };
}

}  // namespace cordfo

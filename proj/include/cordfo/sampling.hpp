#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>

#include "cordfo/corcfd.hpp"
#include "cordfo/stats.hpp"

namespace cordfo {

// Squared gradient norms below this count as a vanished gradient.
inline constexpr double kDegenerateGradientSq = 1e-30;

/// Adaptive batch-size rule: sum_i var_i / n_k <= theta^2 |g|^2.
struct SamplingRule {
  double theta = 0.7;
  std::size_t modulus = 5;  // batch sizes are multiples of K
  std::size_t max_pairs_per_iteration = 10000;

  void validate() const {
    if (!(theta > 0.0)) throw std::invalid_argument("sampling threshold must be positive");
    if (modulus == 0) throw std::invalid_argument("batch modulus must be positive");
  }
};

struct NormCheck {
  bool holds = false;
  bool degenerate = false;
};

namespace detail {

inline double variance_sum(const GradientEstimate& est) {
  double s = 0.0;
  for (double v : est.var) s += v;
  return s;
}

}  // namespace detail

inline NormCheck norm_condition_holds(const GradientEstimate& est, const SamplingRule& rule) {
  rule.validate();
  if (est.n_k == 0) throw std::invalid_argument("norm condition needs n_k >= 1");
  const double g2 = stats::squared_norm(est.g);
  if (g2 < kDegenerateGradientSq) return {false, true};
  const double lhs = detail::variance_sum(est) / static_cast<double>(est.n_k);
  return {lhs <= rule.theta * rule.theta * g2, false};
}

/// floor(sum_i var_i / (theta^2 |g|^2)) + 1, rounded up to a multiple of K
/// and never below the current n_k. nullopt when the gradient has vanished.
inline std::optional<std::size_t> required_pairs(const GradientEstimate& est, const SamplingRule& rule) {
  rule.validate();
  const double g2 = stats::squared_norm(est.g);
  if (g2 < kDegenerateGradientSq) return std::nullopt;
  const double ratio = detail::variance_sum(est) / (rule.theta * rule.theta * g2);
  // Anything beyond 2^52 is unreachable in practice; keep the cast defined.
  const double floored = std::floor(std::min(ratio, 0x1.0p52));
  const auto wanted = static_cast<std::size_t>(floored) + 1;
  return std::max(round_up_to_multiple(wanted, rule.modulus), est.n_k);
}

}  // namespace cordfo

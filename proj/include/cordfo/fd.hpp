#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>

#include "cordfo/problem.hpp"
#include "cordfo/stats.hpp"

namespace cordfo {

/// One central-difference quotient (f(x + h e_i) - f(x - h e_i)) / (2h) from
/// two fresh, independent evaluations. nullopt if the budget ran out.
inline std::optional<double> central_quotient(const Problem& problem, std::span<const double> x,
                                              std::size_t direction, double h,
                                              EvaluationBudget& budget, RngStream& stream) {
  Vector probe(x.begin(), x.end());
  probe[direction] = x[direction] + h;
  const auto plus = evaluate(problem, probe, budget, stream);
  if (!plus) return std::nullopt;
  probe[direction] = x[direction] - h;
  const auto minus = evaluate(problem, probe, budget, stream);
  if (!minus) return std::nullopt;
  return (*plus - *minus) / (2.0 * h);
}

struct CfdResult {
  double estimate = 0.0;
  std::optional<double> sample_variance;  // absent for fewer than two pairs
  std::size_t pairs = 0;
  bool complete = true;
};

/// Mean of n central-difference quotients along e_direction at perturbation h.
inline CfdResult cfd_batch(const Problem& problem, std::span<const double> x, std::size_t direction,
                           double h, std::size_t n, EvaluationBudget& budget, RngStream& stream) {
  if (!(h > 0.0)) throw std::invalid_argument("cfd_batch: perturbation must be positive");
  if (n == 0) throw std::invalid_argument("cfd_batch: need at least one pair");
  if (direction >= problem.dim) throw std::invalid_argument("cfd_batch: direction out of range");

  Vector quotients;
  quotients.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto q = central_quotient(problem, x, direction, h, budget, stream);
    if (!q) break;
    quotients.push_back(*q);
  }

  CfdResult out;
  out.pairs = quotients.size();
  out.complete = quotients.size() == n;
  out.estimate = quotients.empty() ? std::nan("") : stats::mean(quotients);
  if (quotients.size() >= 2) out.sample_variance = stats::sample_variance(quotients);
  return out;
}

enum class GainForm { kwsa, spsa };

/// Gain sequences of the stochastic-approximation baselines:
///   KWSA: a_k = theta_a / k,               h_k = theta_c / k^(1/4)
///   SPSA: a_k = theta_a / (k + 50)^0.602,  c_k = theta_c / k^0.101
struct GainSchedule {
  double theta_a = 1.0;
  double theta_c = 1.0;
  GainForm form = GainForm::kwsa;
};

struct Gains {
  double step;
  double perturbation;
};

inline Gains kwsa_gains(const GainSchedule& s, std::size_t k) {
  if (s.form != GainForm::kwsa) throw std::invalid_argument("kwsa_gains: schedule is not KWSA");
  if (k == 0) throw std::invalid_argument("kwsa_gains: iteration index starts at 1");
  const auto kk = static_cast<double>(k);
  return {s.theta_a / kk, s.theta_c / std::pow(kk, 0.25)};
}

inline Gains spsa_gains(const GainSchedule& s, std::size_t k) {
  if (s.form != GainForm::spsa) throw std::invalid_argument("spsa_gains: schedule is not SPSA");
  if (k == 0) throw std::invalid_argument("spsa_gains: iteration index starts at 1");
  const auto kk = static_cast<double>(k);
  return {s.theta_a / std::pow(kk + 50.0, 0.602), s.theta_c / std::pow(kk, 0.101)};
}

/// Rademacher direction, one bit per coordinate.
inline Vector rademacher(std::size_t dim, RngStream& stream) {
  Vector delta(dim);
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < dim; ++i) {
    if (i % 64 == 0) bits = stream();
    delta[i] = (bits & 1U) ? 1.0 : -1.0;
    bits >>= 1;
  }
  return delta;
}

/// SPSA gradient from a given sign vector: two evaluations in total.
inline std::optional<Vector> spsa_gradient_along(const Problem& problem, std::span<const double> x,
                                                 std::span<const double> delta, double c,
                                                 EvaluationBudget& budget, RngStream& stream) {
  Vector probe(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) probe[i] = x[i] + c * delta[i];
  const auto plus = evaluate(problem, probe, budget, stream);
  if (!plus) return std::nullopt;
  for (std::size_t i = 0; i < x.size(); ++i) probe[i] = x[i] - c * delta[i];
  const auto minus = evaluate(problem, probe, budget, stream);
  if (!minus) return std::nullopt;
  const double diff = (*plus - *minus) / (2.0 * c);
  Vector g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = diff / delta[i];
  return g;
}

inline std::optional<Vector> spsa_gradient(const Problem& problem, std::span<const double> x,
                                           const GainSchedule& schedule, std::size_t k,
                                           EvaluationBudget& budget, RngStream& stream) {
  const Gains gains = spsa_gains(schedule, k);
  const Vector delta = rademacher(problem.dim, stream);
  return spsa_gradient_along(problem, x, delta, gains.perturbation, budget, stream);
}

}  // namespace cordfo

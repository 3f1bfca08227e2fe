#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "cordfo/problem.hpp"
#include "cordfo/stats.hpp"

// Test problems used by the benchmarks and the test suites.
namespace cordfo::problems {

/// F(x) = x^4 on [-50, 50], started at 30.
inline Problem power4(double sigma) {
  Problem p;
  p.name = "power4";
  p.dim = 1;
  p.box = {Interval{-50.0, 50.0}};
  p.objective = [](std::span<const double> x) {
    const double s = x[0] * x[0];
    return s * s;
  };
  p.noise_std = constant_noise(sigma);
  p.x0 = {30.0};
  p.x_star = {0.0};
  return p;
}

/// F(x1, x2) = 100 (x2 - x1^2)^2 + (x1 - 1)^2, unbounded, started at (-1.9, 2).
inline Problem rosenbrock(double sigma) {
  Problem p;
  p.name = "rosenbrock";
  p.dim = 2;
  p.box = {Interval{}, Interval{}};
  p.objective = [](std::span<const double> x) {
    const double a = x[1] - x[0] * x[0];
    const double b = x[0] - 1.0;
    return 100.0 * a * a + b * b;
  };
  p.noise_std = constant_noise(sigma);
  p.x0 = {-1.9, 2.0};
  p.x_star = {1.0, 1.0};
  return p;
}

/// F(x) = sum_i [10 (x_{2i} - x_{2i-1})^2 + (1 - x_{2i-1})^2]^4 over `pairs`
/// coordinate pairs (64 dimensions by default), started at (3, 1, ..., 3, 1).
inline Problem chained_quartic(double sigma, std::size_t pairs = 32) {
  Problem p;
  p.name = "chained_quartic";
  p.dim = 2 * pairs;
  p.box.assign(p.dim, Interval{});
  p.objective = [](std::span<const double> x) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < x.size(); i += 2) {
      const double a = x[i + 1] - x[i];
      const double b = 1.0 - x[i];
      const double t = 10.0 * a * a + b * b;
      const double t2 = t * t;
      total += t2 * t2;
    }
    return total;
  };
  p.noise_std = constant_noise(sigma);
  p.x0.resize(p.dim);
  for (std::size_t i = 0; i < p.dim; ++i) p.x0[i] = (i % 2 == 0) ? 3.0 : 1.0;
  p.x_star.assign(p.dim, 1.0);
  return p;
}

/// F(x) = |x|^2 / 2 (m = M = 1), unbounded.
inline Problem quadratic(std::size_t dim, double sigma, double start = 1.0) {
  Problem p;
  p.name = "quadratic";
  p.dim = dim;
  p.box.assign(dim, Interval{});
  p.objective = [](std::span<const double> x) { return 0.5 * stats::squared_norm(x); };
  p.noise_std = constant_noise(sigma);
  p.x0.assign(dim, start);
  p.x_star.assign(dim, 0.0);
  return p;
}

/// F(x) = amplitude * sin(x), started at 0; minimum at -pi/2 on [-pi, pi].
inline Problem scaled_sine(double sigma, double amplitude = 10.0) {
  Problem p;
  p.name = "scaled_sine";
  p.dim = 1;
  p.box = {Interval{-std::numbers::pi, std::numbers::pi}};
  p.objective = [amplitude](std::span<const double> x) { return amplitude * std::sin(x[0]); };
  p.noise_std = constant_noise(sigma);
  p.x0 = {0.0};
  p.x_star = {-std::numbers::pi / 2.0};
  return p;
}

}  // namespace cordfo::problems

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "cordfo/fd.hpp"
#include "cordfo/problem.hpp"
#include "cordfo/stats.hpp"

// Correlation-induced central finite differences.
//
// A batch of n pairs along one coordinate is split over K random pilot
// perturbations h_1..h_K with n_b pairs each. Bootstrap moments of the CFD
// mean at each h_k feed two regressions:
//
//   E[g_{n_b,h}]   ~ g + B h^2            (ordinary least squares on (1, h^2))
//   Var[g_{n_b,h}] ~ sigma^2 / (2 n_b h^2) (least squares through the origin)
//
// which give the plug-in perturbation h_opt = (sigma^2 / (4 n B^2))^(1/6).
// Every raw quotient q taken at h_k is then mapped onto h_opt by
//
//   q_cor = (h_k / h_opt) (q - g - B h_k^2) + g + B h_opt^2
//
// and the estimate is the mean of all mapped samples.
namespace cordfo {

struct CorCfdConfig {
  std::size_t num_perturbations = 5;  // K
  std::size_t num_bootstrap = 100;    // I
  // Pilot perturbations ~ N(gen_mean, (gen_std_scale * n^(-1/5))^2) truncated
  // to [trunc_lo_scale * n^(-1/5), inf).
  double gen_mean = 0.0;
  double gen_std_scale = 1.0;
  double trunc_lo_scale = 0.1;
  // h_opt is capped at h_cap * max_k h_k.
  double h_cap = 10.0;

  void validate() const {
    if (num_perturbations < 2) throw std::invalid_argument("Cor-CFD needs at least two perturbations");
    if (num_bootstrap < 2) throw std::invalid_argument("Cor-CFD needs at least two bootstrap replications");
    if (!(gen_std_scale > 0.0)) throw std::invalid_argument("generator scale must be positive");
    if (!(trunc_lo_scale > 0.0)) throw std::invalid_argument("truncation scale must be positive");
    if (!(h_cap > 0.0)) throw std::invalid_argument("h_cap must be positive");
  }
};

struct PilotDesign {
  std::vector<double> h;
  std::vector<std::vector<double>> quotients;  // quotients[k][j] taken at h[k]

  std::size_t total_pairs() const {
    std::size_t n = 0;
    for (const auto& q : quotients) n += q.size();
    return n;
  }
};

struct PilotFit {
  double g_hat = 0.0;       // intercept
  double b_hat = 0.0;       // curvature coefficient, about F'''/6
  double sigma2_hat = 0.0;  // noise variance of f
  double h_opt = 1.0;
  bool clamped = false;
};

struct BootstrapMoments {
  double mean = 0.0;
  double variance = 0.0;
};

struct CoordinateEstimate {
  double estimate = 0.0;
  double sample_variance = 0.0;
  PilotFit fit;
  PilotDesign design;
  std::size_t pairs = 0;
  bool complete = true;
};

struct GradientEstimate {
  Vector g;
  Vector var;  // sample variances of the transformed samples
  std::size_t n_k = 0;
  std::vector<PilotFit> fits;
  std::vector<PilotDesign> designs;
  std::vector<std::size_t> pairs;  // per coordinate
  bool complete = true;
};

inline std::size_t round_up_to_multiple(std::size_t n, std::size_t k) {
  return ((n + k - 1) / k) * k;
}

/// Mass of N(mean, sd) above lo.
inline double upper_tail_mass(double mean, double sd, double lo) {
  return 0.5 * std::erfc((lo - mean) / (sd * std::sqrt(2.0)));
}

/// K pairwise-distinct positive pilot perturbations for a batch of n_k pairs.
inline std::vector<double> generate_perturbations(const CorCfdConfig& config, std::size_t n_k,
                                                  RngStream& stream) {
  config.validate();
  if (n_k == 0) throw std::invalid_argument("generate_perturbations: n_k must be positive");
  const double scale = std::pow(static_cast<double>(n_k), -0.2);
  const double sd = config.gen_std_scale * scale;
  const double lo = config.trunc_lo_scale * scale;
  if (upper_tail_mass(config.gen_mean, sd, lo) < 1e-6)
    throw std::invalid_argument("perturbation generator has (almost) no mass above its truncation point");

  std::vector<double> h;
  h.reserve(config.num_perturbations);
  while (h.size() < config.num_perturbations) {
    const double v = config.gen_mean + sd * stream.normal();
    if (v < lo) continue;
    const bool collides = std::any_of(h.begin(), h.end(), [v](double w) {
      return std::abs(v - w) <= 1e-12 * std::max(std::abs(v), std::abs(w));
    });
    if (!collides) h.push_back(v);
  }
  return h;
}

/// I resamples with replacement of the quotients; mean and population
/// variance of the resample means.
inline BootstrapMoments bootstrap_moments(std::span<const double> quotients, std::size_t num_bootstrap,
                                          RngStream& stream) {
  const std::size_t nb = quotients.size();
  if (nb < 2) throw std::invalid_argument("bootstrap needs at least two quotients per perturbation");
  if (num_bootstrap == 0) throw std::invalid_argument("bootstrap needs at least one replication");
  std::vector<double> means(num_bootstrap);
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t j = 0; j < nb; ++j) s += quotients[stream.index(nb)];
    m = s / static_cast<double>(nb);
  }
  return {stats::mean(means), stats::population_variance(means)};
}

/// (sigma^2 / (4 n B^2))^(1/6); +inf when B == 0.
inline double optimal_perturbation(double sigma2, double b, std::size_t n) {
  return std::pow(sigma2 / (4.0 * static_cast<double>(n) * b * b), 1.0 / 6.0);
}

/// Regressions over per-perturbation moments. `pairs[k]` is the number of
/// quotients behind moments[k]; `n` is the batch size used in h_opt.
inline PilotFit fit_regressions(std::span<const double> h, std::span<const std::size_t> pairs,
                                std::span<const BootstrapMoments> moments, std::size_t n, double h_cap) {
  const std::size_t K = h.size();
  if (K < 2 || pairs.size() != K || moments.size() != K)
    throw std::invalid_argument("fit_regressions: need K >= 2 matching perturbations and moments");

  // Mean regression on (1, h^2).
  double xbar = 0.0, ybar = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    xbar += h[k] * h[k];
    ybar += moments[k].mean;
  }
  xbar /= static_cast<double>(K);
  ybar /= static_cast<double>(K);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double dx = h[k] * h[k] - xbar;
    sxx += dx * dx;
    sxy += dx * (moments[k].mean - ybar);
  }
  if (!(sxx > 0.0)) throw std::logic_error("fit_regressions: pilot perturbations are not distinct");

  PilotFit fit;
  fit.b_hat = sxy / sxx;
  fit.g_hat = ybar - fit.b_hat * xbar;

  // Variance regression through the origin on 1 / (2 n_b h^2).
  double szz = 0.0, szv = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double z = 1.0 / (2.0 * static_cast<double>(pairs[k]) * h[k] * h[k]);
    szz += z * z;
    szv += z * moments[k].variance;
  }
  fit.sigma2_hat = std::max(0.0, szv / szz);

  const double h_max = *std::max_element(h.begin(), h.end());
  const double h_min = *std::min_element(h.begin(), h.end());
  const double cap = h_cap * h_max;
  if (fit.b_hat == 0.0) {
    fit.h_opt = fit.sigma2_hat == 0.0 ? h_max : cap;
    fit.clamped = true;
  } else if (fit.sigma2_hat == 0.0) {
    // The formula collapses to zero.
    fit.h_opt = h_min;
    fit.clamped = true;
  } else {
    const double h_star = optimal_perturbation(fit.sigma2_hat, fit.b_hat, n);
    if (!(h_star <= cap)) {
      fit.h_opt = cap;
      fit.clamped = true;
    } else {
      fit.h_opt = h_star;
    }
  }
  return fit;
}

inline PilotFit fit_pilot(const PilotDesign& design, std::size_t num_bootstrap, std::size_t n,
                          double h_cap, RngStream& stream) {
  const std::size_t K = design.h.size();
  std::vector<BootstrapMoments> moments(K);
  std::vector<std::size_t> pairs(K);
  for (std::size_t k = 0; k < K; ++k) {
    moments[k] = bootstrap_moments(design.quotients[k], num_bootstrap, stream);
    pairs[k] = design.quotients[k].size();
  }
  return fit_regressions(design.h, pairs, moments, n, h_cap);
}

// Same affine map, grouped so that h_k == h_opt returns raw bit for bit.
inline double transform_sample(double raw, double h_k, const PilotFit& fit) {
  const double r = h_k / fit.h_opt;
  return r * raw + (1.0 - r) * fit.g_hat + fit.b_hat * (fit.h_opt * fit.h_opt - r * h_k * h_k);
}

namespace detail {

inline std::vector<double> transformed_samples(const PilotDesign& design, const PilotFit& fit) {
  std::vector<double> out;
  out.reserve(design.total_pairs());
  for (std::size_t k = 0; k < design.h.size(); ++k)
    for (double q : design.quotients[k]) out.push_back(transform_sample(q, design.h[k], fit));
  return out;
}

// Fits and transforms a complete design.
inline void finish_estimate(CoordinateEstimate& est, std::size_t n, const CorCfdConfig& config,
                            RngStream& stream) {
  est.fit = fit_pilot(est.design, config.num_bootstrap, n, config.h_cap, stream);
  const auto samples = transformed_samples(est.design, est.fit);
  est.estimate = stats::mean(samples);
  est.sample_variance = stats::sample_variance(samples);
}

// A design cut short by the budget: report the raw mean of what exists.
inline void finish_partial(CoordinateEstimate& est) {
  std::vector<double> raw;
  for (const auto& q : est.design.quotients) raw.insert(raw.end(), q.begin(), q.end());
  est.complete = false;
  est.estimate = raw.empty() ? std::nan("") : stats::mean(raw);
  est.sample_variance = raw.size() >= 2 ? stats::sample_variance(raw) : std::nan("");
}

}  // namespace detail

/// Cor-CFD estimate of the i-th partial derivative from n_k pairs (rounded up
/// to a multiple of K). Consumes 2 n_k evaluations.
inline CoordinateEstimate cor_cfd_coordinate(const Problem& problem, std::span<const double> x,
                                             std::size_t i, std::size_t n_k, const CorCfdConfig& config,
                                             EvaluationBudget& budget, RngStream& stream) {
  config.validate();
  if (i >= problem.dim) throw std::invalid_argument("cor_cfd_coordinate: coordinate out of range");
  const std::size_t K = config.num_perturbations;
  const std::size_t n = round_up_to_multiple(std::max<std::size_t>(n_k, 1), K);
  const std::size_t nb = n / K;
  if (nb < 2) throw std::invalid_argument("cor_cfd_coordinate: need at least two pairs per perturbation");

  CoordinateEstimate est;
  est.design.h = generate_perturbations(config, n, stream);
  est.design.quotients.assign(K, {});
  for (std::size_t k = 0; k < K; ++k) {
    auto& bucket = est.design.quotients[k];
    bucket.reserve(nb);
    for (std::size_t j = 0; j < nb; ++j) {
      const auto q = central_quotient(problem, x, i, est.design.h[k], budget, stream);
      if (!q) {
        est.pairs = est.design.total_pairs();
        detail::finish_partial(est);
        return est;
      }
      bucket.push_back(*q);
    }
  }
  est.pairs = n;
  detail::finish_estimate(est, n, config, stream);
  return est;
}

/// Cor-CFD on every coordinate with independent samples: 2 d n_k evaluations.
inline GradientEstimate cor_cfd_gradient(const Problem& problem, std::span<const double> x,
                                         std::size_t n_k, const CorCfdConfig& config,
                                         EvaluationBudget& budget, RngStream& stream) {
  GradientEstimate out;
  out.n_k = round_up_to_multiple(std::max<std::size_t>(n_k, 1), config.num_perturbations);
  for (std::size_t i = 0; i < problem.dim; ++i) {
    RngStream coord = stream.fork(StreamPurpose::coordinate, i);
    auto est = cor_cfd_coordinate(problem, x, i, out.n_k, config, budget, coord);
    out.g.push_back(est.estimate);
    out.var.push_back(est.sample_variance);
    out.fits.push_back(est.fit);
    out.designs.push_back(std::move(est.design));
    out.pairs.push_back(est.pairs);
    if (!est.complete) {
      out.complete = false;
      break;
    }
  }
  return out;
}

/// Grows every coordinate's batch to target_n pairs. New pairs are spread
/// evenly over the existing perturbations (remainder to the smallest h
/// first); the regressions are refitted on the pooled samples with
/// n = target_n and every sample is re-transformed.
inline GradientEstimate augment_gradient(const GradientEstimate& existing, std::size_t target_n,
                                         const Problem& problem, std::span<const double> x,
                                         const CorCfdConfig& config, EvaluationBudget& budget,
                                         RngStream& stream) {
  config.validate();
  if (!existing.complete || existing.designs.size() != problem.dim)
    throw std::invalid_argument("augment_gradient: existing estimate is incomplete");
  if (target_n <= existing.n_k) throw std::invalid_argument("augment_gradient: target must exceed current n_k");
  const std::size_t K = config.num_perturbations;

  GradientEstimate out = existing;
  out.n_k = target_n;
  for (std::size_t i = 0; i < problem.dim; ++i) {
    RngStream coord = stream.fork(StreamPurpose::coordinate, i);
    PilotDesign& design = out.designs[i];
    const std::size_t have = design.total_pairs();
    const std::size_t extra = target_n > have ? target_n - have : 0;

    std::vector<std::size_t> order(design.h.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return design.h[a] < design.h[b]; });
    std::vector<std::size_t> add(design.h.size(), extra / K);
    for (std::size_t r = 0; r < extra % K; ++r) add[order[r]] += 1;

    bool ran_out = false;
    for (std::size_t k = 0; k < design.h.size() && !ran_out; ++k) {
      for (std::size_t j = 0; j < add[k]; ++j) {
        const auto q = central_quotient(problem, x, i, design.h[k], budget, coord);
        if (!q) {
          ran_out = true;
          break;
        }
        design.quotients[k].push_back(*q);
      }
    }

    // Every perturbation already holds at least two quotients, so a refit is
    // always possible even after a partial augmentation.
    CoordinateEstimate est;
    est.design = std::move(design);
    est.pairs = est.design.total_pairs();
    detail::finish_estimate(est, est.pairs, config, coord);
    out.g[i] = est.estimate;
    out.var[i] = est.sample_variance;
    out.fits[i] = est.fit;
    out.pairs[i] = est.pairs;
    design = std::move(est.design);

    if (ran_out) {
      out.complete = false;
      out.n_k = *std::min_element(out.pairs.begin(), out.pairs.end());
      break;
    }
  }
  return out;
}

}  // namespace cordfo

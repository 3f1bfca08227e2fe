#include <gtest/gtest.h>

#include <cmath>

#include "cordfo/corcfd.hpp"
#include "cordfo/problems.hpp"

using namespace cordfo;

namespace {

std::vector<BootstrapMoments> affine_moments(const std::vector<double>& h, double g, double b, double sigma2,
                                             std::size_t nb) {
  std::vector<BootstrapMoments> m;
  for (double hk : h) m.push_back({g + b * hk * hk, sigma2 / (2.0 * static_cast<double>(nb) * hk * hk)});
  return m;
}

}  // namespace

TEST(Perturbations, RespectTruncationAndAreDistinct) {
  struct Case {
    double scale, trunc, floor;
  };
  for (const Case c : {Case{1.0, 0.1, 0.1 * std::pow(10.0, -0.2)}, Case{0.1, 0.01, 0.01 * std::pow(10.0, -0.2)}}) {
    CorCfdConfig cfg;
    cfg.gen_std_scale = c.scale;
    cfg.trunc_lo_scale = c.trunc;
    RngStream s(1, {});
    for (int rep = 0; rep < 200; ++rep) {
      const auto h = generate_perturbations(cfg, 10, s);
      ASSERT_EQ(h.size(), cfg.num_perturbations);
      for (std::size_t i = 0; i < h.size(); ++i) {
        EXPECT_GE(h[i], c.floor);
        for (std::size_t j = 0; j < i; ++j) EXPECT_NE(h[i], h[j]);
      }
    }
  }
}

TEST(Perturbations, DegenerateGeneratorIsAConfigError) {
  CorCfdConfig cfg;
  cfg.gen_std_scale = 0.01;
  cfg.trunc_lo_scale = 1.0;
  RngStream s(1, {});
  EXPECT_THROW(generate_perturbations(cfg, 10, s), std::invalid_argument);
  cfg = {};
  cfg.num_perturbations = 1;
  EXPECT_THROW(generate_perturbations(cfg, 10, s), std::invalid_argument);
}

TEST(Bootstrap, ConstantData) {
  RngStream s(1, {});
  const std::vector<double> q(6, 2.5);
  const auto m = bootstrap_moments(q, 50, s);
  EXPECT_EQ(m.mean, 2.5);
  EXPECT_EQ(m.variance, 0.0);
}

TEST(Bootstrap, TwoPointEnumerationLimit) {
  // Resample means of {0, 2}: 0, 1, 1, 2 equally likely -> mean 1, variance 0.5.
  RngStream s(2, {});
  const std::vector<double> q{0.0, 2.0};
  const auto m = bootstrap_moments(q, 200000, s);
  EXPECT_NEAR(m.mean, 1.0, 0.01);
  EXPECT_NEAR(m.variance, 0.5, 0.01);
}

TEST(Bootstrap, VarianceOfMeanLimit) {
  RngStream s(3, {});
  const std::vector<double> q{1.0, 4.0, -2.0, 0.5, 3.0};
  const double pop = stats::population_variance(q);
  const auto m = bootstrap_moments(q, 100000, s);
  EXPECT_NEAR(m.variance, pop / 5.0, 0.02 * pop / 5.0);
  EXPECT_THROW(bootstrap_moments(std::vector<double>{1.0}, 10, s), std::invalid_argument);
}

TEST(FitRegressions, ExactRecovery) {
  const std::vector<double> h{0.12, 0.3, 0.45, 0.71, 0.9};
  const std::vector<std::size_t> pairs(5, 8);
  const PilotFit f = fit_regressions(h, pairs, affine_moments(h, 3.0, 2.0, 4.0, 8), 40, 10.0);
  EXPECT_NEAR(f.g_hat, 3.0, 1e-10 * 3.0);
  EXPECT_NEAR(f.b_hat, 2.0, 1e-10 * 2.0);
  EXPECT_NEAR(f.sigma2_hat, 4.0, 1e-10 * 4.0);
  EXPECT_NEAR(f.h_opt, std::pow(4.0 / (4.0 * 40 * 4.0), 1.0 / 6.0), 1e-12);
  EXPECT_FALSE(f.clamped);
}

TEST(FitRegressions, TwoPerturbationsSuffice) {
  const std::vector<double> h{0.2, 0.5};
  const std::vector<std::size_t> pairs{3, 3};
  const PilotFit f = fit_regressions(h, pairs, affine_moments(h, -1.0, 0.5, 2.0, 3), 6, 10.0);
  EXPECT_NEAR(f.g_hat, -1.0, 1e-10);
  EXPECT_NEAR(f.b_hat, 0.5, 1e-10);
  EXPECT_NEAR(f.sigma2_hat, 2.0, 1e-10 * 2.0);
}

TEST(FitRegressions, ClampPaths) {
  const std::vector<double> h{0.1, 0.2, 0.4};
  const std::vector<std::size_t> pairs(3, 4);
  // B = 0, sigma^2 > 0: cap.
  PilotFit f = fit_regressions(h, pairs, affine_moments(h, 1.0, 0.0, 1.0, 4), 12, 10.0);
  EXPECT_TRUE(f.clamped);
  EXPECT_DOUBLE_EQ(f.h_opt, 4.0);
  // B = 0, sigma^2 = 0: largest pilot h.
  f = fit_regressions(h, pairs, affine_moments(h, 1.0, 0.0, 0.0, 4), 12, 10.0);
  EXPECT_TRUE(f.clamped);
  EXPECT_DOUBLE_EQ(f.h_opt, 0.4);
  // sigma^2 = 0, B != 0: formula gives zero; smallest pilot h.
  f = fit_regressions(h, pairs, affine_moments(h, 1.0, 3.0, 0.0, 4), 12, 10.0);
  EXPECT_TRUE(f.clamped);
  EXPECT_DOUBLE_EQ(f.h_opt, 0.1);
  // Tiny curvature: formula beyond the cap.
  f = fit_regressions(h, pairs, affine_moments(h, 1.0, 1e-9, 1.0, 4), 12, 10.0);
  EXPECT_TRUE(f.clamped);
  EXPECT_DOUBLE_EQ(f.h_opt, 4.0);
  // Negative variance fit clamps to zero.
  std::vector<BootstrapMoments> m = affine_moments(h, 1.0, 1.0, 1.0, 4);
  for (auto& mk : m) mk.variance = -mk.variance;
  f = fit_regressions(h, pairs, m, 12, 10.0);
  EXPECT_EQ(f.sigma2_hat, 0.0);
  EXPECT_GT(f.h_opt, 0.0);
}

TEST(FitRegressions, RejectsIdenticalPerturbations) {
  const std::vector<double> h{0.3, 0.3};
  const std::vector<std::size_t> pairs(2, 4);
  EXPECT_THROW(fit_regressions(h, pairs, affine_moments(h, 1.0, 1.0, 1.0, 4), 8, 10.0), std::logic_error);
}

TEST(OptimalPerturbation, ScaledSineSetting) {
  EXPECT_NEAR(optimal_perturbation(1.0, -10.0 / 6.0, 100), std::pow(36.0 / 40000.0, 1.0 / 6.0), 1e-15);
  EXPECT_NEAR(optimal_perturbation(1.0, -10.0 / 6.0, 100), 0.3107, 1e-4);
}

TEST(Transform, HandArithmeticAndIdentities) {
  const PilotFit f{0.0, 1.0, 1.0, 1.0, false};
  EXPECT_DOUBLE_EQ(transform_sample(5.0, 2.0, f), 3.0);
  const PilotFit g{2.5, -0.4, 1.0, 0.37, false};
  for (double raw : {-3.0, 0.0, 11.25}) EXPECT_EQ(transform_sample(raw, g.h_opt, g), raw);
  const double hk = 0.81;
  EXPECT_NEAR(transform_sample(g.g_hat + g.b_hat * hk * hk, hk, g), g.g_hat + g.b_hat * g.h_opt * g.h_opt, 1e-14);
}

TEST(CorCfdCoordinate, ExactOnQuadratic) {
  const Problem p = problems::quadratic(1, 0.0);
  EvaluationBudget b;
  RngStream s(1, {});
  const auto est = cor_cfd_coordinate(p, Vector{1.7}, 0, 10, CorCfdConfig{}, b, s);
  EXPECT_NEAR(est.estimate, 1.7, 1e-10 * 1.7);
  EXPECT_NEAR(est.fit.b_hat, 0.0, 1e-8);
  EXPECT_NEAR(est.fit.sigma2_hat, 0.0, 1e-24);
  EXPECT_EQ(b.used(), 20u);
}

TEST(CorCfdCoordinate, MeanOfTransformFormula) {
  const Problem p = problems::scaled_sine(1.0);
  EvaluationBudget b;
  RngStream s(4, {});
  CorCfdConfig cfg;
  const auto est = cor_cfd_coordinate(p, Vector{0.0}, 0, 50, cfg, b, s);
  const auto& d = est.design;
  double total = 0.0;
  for (std::size_t k = 0; k < d.h.size(); ++k) {
    const double raw_mean = stats::mean(d.quotients[k]);
    const double formula = est.fit.g_hat + est.fit.b_hat * est.fit.h_opt * est.fit.h_opt +
                           (d.h[k] / est.fit.h_opt) * (raw_mean - est.fit.g_hat - est.fit.b_hat * d.h[k] * d.h[k]);
    double direct = 0.0;
    for (double q : d.quotients[k]) direct += transform_sample(q, d.h[k], est.fit);
    direct /= static_cast<double>(d.quotients[k].size());
    EXPECT_NEAR(direct, formula, 1e-10 * std::max(1.0, std::abs(formula)));
    total += direct * static_cast<double>(d.quotients[k].size());
  }
  EXPECT_NEAR(est.estimate, total / 50.0, 1e-10 * std::abs(est.estimate));
}

TEST(CorCfdCoordinate, RoundsUpAndNeedsTwoPerPerturbation) {
  const Problem p = problems::quadratic(1, 1.0);
  EvaluationBudget b;
  RngStream s(1, {});
  const auto est = cor_cfd_coordinate(p, Vector{1.0}, 0, 11, CorCfdConfig{}, b, s);
  EXPECT_EQ(est.pairs, 15u);
  EXPECT_EQ(b.used(), 30u);
  EXPECT_THROW(cor_cfd_coordinate(p, Vector{1.0}, 0, 5, CorCfdConfig{}, b, s), std::invalid_argument);
}

TEST(CorCfdCoordinate, PartialOnExhaustion) {
  const Problem p = problems::quadratic(1, 1.0);
  EvaluationBudget b(100, 9);
  RngStream s(1, {});
  const auto est = cor_cfd_coordinate(p, Vector{1.0}, 0, 10, CorCfdConfig{}, b, s);
  EXPECT_FALSE(est.complete);
  EXPECT_EQ(est.pairs, 4u);
  EXPECT_TRUE(std::isfinite(est.estimate));
}

TEST(CorCfdGradient, ExactAndBudget) {
  Problem p = problems::quadratic(2, 0.0);
  p.objective = [](std::span<const double> x) { return x[0] * x[0] + 3.0 * x[1] * x[1]; };
  EvaluationBudget b;
  RngStream s(1, {});
  const auto g = cor_cfd_gradient(p, Vector{1.0, 1.0}, 10, CorCfdConfig{}, b, s);
  EXPECT_NEAR(g.g[0], 2.0, 1e-10 * 2.0);
  EXPECT_NEAR(g.g[1], 6.0, 1e-10 * 6.0);
  EXPECT_EQ(b.used(), 40u);
  EXPECT_EQ(g.n_k, 10u);
  for (double v : g.var) EXPECT_GE(v, 0.0);
}

TEST(Augment, BudgetAndExactness) {
  const Problem p = problems::quadratic(1, 0.0);
  EvaluationBudget b;
  RngStream s(1, {});
  const auto g0 = cor_cfd_gradient(p, Vector{2.0}, 10, CorCfdConfig{}, b, s);
  const auto g1 = augment_gradient(g0, 20, p, Vector{2.0}, CorCfdConfig{}, b, s);
  EXPECT_EQ(b.used(), 40u);
  EXPECT_EQ(g1.n_k, 20u);
  EXPECT_EQ(g1.designs[0].total_pairs(), 20u);
  EXPECT_NEAR(g1.g[0], 2.0, 1e-10 * 2.0);
  EXPECT_THROW(augment_gradient(g1, 20, p, Vector{2.0}, CorCfdConfig{}, b, s), std::invalid_argument);
}

TEST(Augment, RemainderGoesToSmallestPerturbations) {
  const Problem p = problems::quadratic(1, 1.0);
  EvaluationBudget b;
  RngStream s(6, {});
  const auto g0 = cor_cfd_gradient(p, Vector{1.0}, 10, CorCfdConfig{}, b, s);
  const auto g1 = augment_gradient(g0, 17, p, Vector{1.0}, CorCfdConfig{}, b, s);
  const auto& d = g1.designs[0];
  std::vector<std::size_t> order(d.h.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](auto a, auto c) { return d.h[a] < d.h[c]; });
  EXPECT_EQ(d.quotients[order[0]].size(), 4u);
  EXPECT_EQ(d.quotients[order[1]].size(), 4u);
  for (std::size_t r = 2; r < 5; ++r) EXPECT_EQ(d.quotients[order[r]].size(), 3u);
}

TEST(Augment, VarianceShrinksWithPairs) {
  const Problem p = problems::scaled_sine(1.0);
  const int reps = 3000;
  std::vector<double> small, large;
  for (int r = 0; r < reps; ++r) {
    EvaluationBudget b;
    RngStream s(8, {static_cast<std::uint64_t>(r), 0, 0});
    const auto g0 = cor_cfd_gradient(p, Vector{0.0}, 20, CorCfdConfig{}, b, s);
    small.push_back(g0.g[0]);
    large.push_back(augment_gradient(g0, 80, p, Vector{0.0}, CorCfdConfig{}, b, s).g[0]);
  }
  EXPECT_LT(stats::sample_variance(large), 0.6 * stats::sample_variance(small));
}

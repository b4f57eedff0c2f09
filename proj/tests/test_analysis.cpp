#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gdsrq/analysis.hpp"

using namespace gdsrq;

namespace {

ObjectiveSpec shifted_square(double center) {
  return centers_objective({{center}});
}

}  // namespace

TEST(Consensus, Examples) {
  const std::vector<std::vector<double>> same(4, {0.3, -0.2});
  EXPECT_EQ(consensus_error(same), 0.0);
  const std::vector<std::vector<double>> two{{1.0}, {-1.0}};
  EXPECT_EQ(consensus_error(two), 2.0);
  Eigen::MatrixXd m(2, 1);
  m << 1.0, -1.0;
  EXPECT_EQ(consensus_error(m), 2.0);
}

TEST(Consensus, MatchesEigenOverload) {
  CounterStream rng = make_stream(1, StreamDomain::test);
  for (int t = 0; t < 50; ++t) {
    Eigen::MatrixXd m(7, 3);
    std::vector<std::vector<double>> rows(7, std::vector<double>(3));
    for (int i = 0; i < 7; ++i)
      for (int c = 0; c < 3; ++c) rows[i][c] = m(i, c) = rng.uniform01() * 2 - 1;
    EXPECT_NEAR(consensus_error(rows), consensus_error(m), 1e-13);
  }
}

TEST(OptimalityGap, Examples) {
  ReferenceSolution ref;
  ref.x_star = {1.0};
  EXPECT_EQ(optimality_gap(std::vector<double>{1.0}, ref), 0.0);
  EXPECT_EQ(optimality_gap(std::vector<double>{0.5}, ref), 0.25);

  CounterStream rng = make_stream(2, StreamDomain::test);
  ref.x_star.resize(6);
  std::vector<double> x(6);
  for (int t = 0; t < 100; ++t) {
    long double direct = 0.0L;
    for (std::size_t c = 0; c < 6; ++c) {
      x[c] = rng.uniform01();
      ref.x_star[c] = rng.uniform01();
      direct += (static_cast<long double>(x[c]) - ref.x_star[c]) *
                (static_cast<long double>(x[c]) - ref.x_star[c]);
    }
    EXPECT_NEAR(optimality_gap(x, ref), static_cast<double>(direct), 1e-14);
  }
}

TEST(Reference, ActiveConstraint) {
  const auto ref = reference_optimum(shifted_square(2.0));
  EXPECT_NEAR(ref.x_star[0], 1.0, 1e-12);
  EXPECT_NEAR(ref.f_star, 1.0, 1e-10);
}

TEST(Reference, InteriorLeastSquaresMatchesNormalEquations) {
  const Dataset ds = generate_synthetic_dataset(50, 10, 1);
  const auto spec = linear_regression_objective(ds);
  Eigen::MatrixXd a(50, 10);
  Eigen::VectorXd b(50);
  for (int i = 0; i < 50; ++i) {
    for (int c = 0; c < 10; ++c) a(i, c) = ds.rows[i].features[c];
    b(i) = ds.rows[i].label;
  }
  const Eigen::VectorXd ls = (a.transpose() * a).ldlt().solve(a.transpose() * b);
  ASSERT_LT(ls.cwiseAbs().maxCoeff(), 1.0) << "instance must have an interior solution";
  const auto ref = reference_optimum(spec);
  for (int c = 0; c < 10; ++c) EXPECT_NEAR(ref.x_star[c], ls(c), 1e-8);
  EXPECT_LE(ref.residual, 1e-10);
}

TEST(Reference, CentersClampOfMean) {
  const auto spec = synthetic_centers_objective(30, 5, 4);
  std::vector<double> mean(5, 0.0);
  for (std::size_t i = 0; i < 30; ++i) {
    const auto g = spec.subgradient(i, std::vector<double>(5, 0.0));  // -2 c_i
    for (std::size_t c = 0; c < 5; ++c) mean[c] += -0.5 * g[c] / 30.0;
  }
  const auto clamp = project_box(mean, -1.0, 1.0);
  const auto ref = reference_optimum(spec);
  for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(ref.x_star[c], clamp[c], 1e-10);
  EXPECT_NEAR(ref.f_star, global_value(spec, clamp), 1e-10);
}

TEST(Reference, RejectsWeaklyConvex) {
  auto spec = shifted_square(0.0);
  spec.convexity = Convexity::weakly(1.0);
  EXPECT_THROW(reference_optimum(spec), std::invalid_argument);
}

TEST(PredictedRate, Values) {
  EXPECT_NEAR(predicted_rate(1.0, 0.6), -0.4, 1e-12);
  EXPECT_NEAR(predicted_rate(0.75, 0.6), -0.15, 1e-12);
  EXPECT_NEAR(predicted_rate(0.875, 0.55), -0.325, 1e-12);
  EXPECT_TRUE(rate_exponents_valid(1.0, 0.6));
  EXPECT_FALSE(rate_exponents_valid(0.5, 0.6));
}

TEST(OptimalLambdaAlpha, Values) {
  EXPECT_NEAR(optimal_lambda_alpha(0.6), 1.0, 1e-12);
  EXPECT_NEAR(optimal_lambda_alpha(0.55), 0.875, 1e-12);
  const double la = optimal_lambda_alpha(0.55);
  EXPECT_NEAR(0.55 - la, -0.325, 1e-12);
  EXPECT_NEAR(1 + la - 4 * 0.55, -0.325, 1e-12);
  EXPECT_THROW(optimal_lambda_alpha(0.7), std::invalid_argument);
  EXPECT_THROW(optimal_lambda_alpha(0.5), std::invalid_argument);
}

TEST(OptimalLambdaAlpha, MinimizesRateOnGrid) {
  for (double lb = 0.51; lb <= 0.6; lb += 0.01) {
    const double best = predicted_rate(optimal_lambda_alpha(lb), lb);
    for (double la = 0.51; la <= 1.0; la += 0.005) EXPECT_GE(predicted_rate(la, lb), best - 1e-12);
  }
}

TEST(RateFit, ExactPowerLaw) {
  std::vector<std::pair<double, double>> s;
  for (int k = 0; k < 1000; ++k) s.emplace_back(k, std::pow(k + 1.0, -0.4));
  const auto fit = fit_empirical_rate(s);
  EXPECT_NEAR(fit.slope, -0.4, 1e-12);
  EXPECT_EQ(fit.points, 500u);
}

TEST(RateFit, ConstantSeries) {
  std::vector<std::pair<double, double>> s;
  for (int k = 0; k < 100; ++k) s.emplace_back(k, 3.0);
  EXPECT_NEAR(fit_empirical_rate(s, 1.0).slope, 0.0, 1e-14);
}

TEST(RateFit, NoisyPowerLaw) {
  CounterStream rng = make_stream(5, StreamDomain::test);
  std::vector<std::pair<double, double>> s;
  for (int k = 0; k < 1000; ++k)
    s.emplace_back(k, std::pow(k + 1.0, -0.4) * (1 + 0.1 * (2 * rng.uniform01() - 1)));
  EXPECT_NEAR(fit_empirical_rate(s, 1.0).slope, -0.4, 0.05);
}

TEST(RateFit, SkipsNonPositive) {
  std::vector<std::pair<double, double>> s{{0, 1.0}, {1, 0.0}, {2, -1.0}, {3, 0.25}, {4, 0.2}};
  const auto fit = fit_empirical_rate(s, 1.0);
  EXPECT_EQ(fit.dropped_nonpositive, 2u);
  EXPECT_EQ(fit.points, 3u);
  EXPECT_THROW(fit_empirical_rate(s, 0.0), std::invalid_argument);
}

TEST(ProductCheck, GeometricCase) {
  const std::vector<double> half(101, 0.5);
  const auto r = product_decay_check(half, 1.0);
  EXPECT_NEAR(r.final_product / std::pow(0.5, 101), 1.0, 1e-13);
  const auto flat = product_decay_check(0.0, 0.5, 100);
  EXPECT_NEAR(flat.final_product / std::pow(0.5, 101), 1.0, 1e-13);
  EXPECT_NEAR(flat.partial_sum_of_products, 1.0 - std::pow(0.5, 101), 1e-13);
}

TEST(ProductCheck, DivergentSeriesDrivesProductToZero) {
  const auto r = product_decay_check(0.6, 0.3, 10'000);
  // Oracle: extended-precision log-sum.
  long double log_p = 0.0L;
  for (int k = 0; k <= 10'000; ++k) log_p += std::log1p(-0.3L * std::pow(k + 1.0L, -0.6L));
  EXPECT_NEAR(std::log(r.final_product), static_cast<double>(log_p), 1e-9);
  EXPECT_LT(r.final_product, 1e-8);
  const auto r2 = product_decay_check(0.6, 0.3, 20'000);
  EXPECT_LT(r2.partial_sum_of_products - r.partial_sum_of_products, 1e-6);
}

TEST(ProductCheck, ConvergentSeriesKeepsProductAway) {
  const auto r = product_decay_check(2.0, 0.3, 100'000);
  EXPECT_GT(r.final_product, std::exp(-0.3 * std::numbers::pi * std::numbers::pi / 6 * 2));
  EXPECT_THROW(product_decay_check(2.0, 1.5, 10), std::invalid_argument);
}

TEST(WeightConditions, DefaultScheduleSums) {
  const auto rep = weight_condition_check(Schedule{}, 0.8, {100, 1000, 10000});
  ASSERT_EQ(rep.rows.size(), 3u);
  EXPECT_TRUE(rep.checks.passed()) << rep.checks;
  EXPECT_TRUE(rep.convex_set_holds);
  for (std::size_t i = 1; i < 3; ++i) {
    EXPECT_LT(rep.rows[i].beta_sq_over_alpha, rep.rows[i - 1].beta_sq_over_alpha);
    EXPECT_LT(rep.rows[i].alpha_over_beta, rep.rows[i - 1].alpha_over_beta);
  }
}

TEST(WeightConditions, DirectSummationOracle) {
  const Schedule s{};
  const auto rep = weight_condition_check(s, 0.8, {1000});
  long double norm = 0.0L, b2a = 0.0L;
  for (int t = 0; t <= 1000; ++t) norm += 1.0L / (t + 1);
  for (int t = 0; t <= 1000; ++t) {
    const long double g = (1.0L / (t + 1)) / norm;
    const long double a = 1.0L / (t + 1), b = std::pow(t + 1.0L, -0.6L);
    b2a += g * b * b / a;
  }
  EXPECT_NEAR(rep.rows[0].beta_sq_over_alpha, static_cast<double>(b2a), 1e-12);
}

TEST(WeightConditions, IncreasingWeightsBreakChain) {
  Schedule s;
  s.lambda_gamma = -0.5;
  const auto rep = weight_condition_check(s, 0.8, {100, 1000});
  EXPECT_FALSE(rep.checks.find("gamma_over_alpha_nonincreasing")->passed);
  EXPECT_FALSE(rep.convex_set_holds);
}

#include <gtest/gtest.h>

#include <cmath>

#include "rdm/blur.hpp"
#include "rdm/rng.hpp"
#include "rdm/schedule.hpp"

using namespace rdm;

TEST(Quantile, HighPrecisionReferenceValues) {
  // mpmath, 30 significant digits
  // references computed at the exact double arguments, 40 digits working
  // precision; the asymmetric last digits between p and 1-p entries reflect
  // the binary rounding of the inputs themselves
  const struct {
    double p, x;
  } ref[] = {
      {1e-09, -5.9978070150076868614},   {1e-06, -4.7534243088228989573},
      {0.001, -3.0902323061678135354},   {0.01, -2.3263478740408410931},
      {0.025, -1.9599639845400542118},   {0.1, -1.2815515655446004353},
      {0.3, -0.52440051270804081597},    {0.5, 0.0},
      {0.7, 0.52440051270804065631},     {0.9, 1.2815515655446005935},
      {0.975, 1.9599639845400538556},    {0.99, 2.3263478740408407676},
      {0.999, 3.0902323061678132778},    {0.999999, 4.7534243088170877657},
      {0.999999999, 5.9978070196016374264},
  };
  for (const auto& r : ref) {
    double got = normal_quantile(r.p);
    double tol = std::max(1e-9, 1e-12 * std::fabs(r.x));
    EXPECT_NEAR(got, r.x, tol) << "p=" << r.p;
  }
}

TEST(Quantile, RejectsEndpoints) {
  EXPECT_THROW(normal_quantile(0.0), std::invalid_argument);
  EXPECT_THROW(normal_quantile(1.0), std::invalid_argument);
  EXPECT_THROW(normal_quantile(-0.5), std::invalid_argument);
}

TEST(Sigma, MedianAndMonotonicity) {
  ScheduleConfig cfg;
  EXPECT_NEAR(sigma_schedule(0.5, cfg), 0.30119421191220209664, 1e-12);
  EXPECT_GT(sigma_schedule(0.6, cfg), sigma_schedule(0.5, cfg));
  double prev = 0.0;
  for (double t = 0.01; t < 1.0; t += 0.01) {
    double s = sigma_schedule(t, cfg);
    EXPECT_GT(s, prev);
    prev = s;
  }
}

TEST(Sigma, LogSymmetryAroundMedian) {
  ScheduleConfig cfg;
  for (double d : {0.05, 0.17, 0.31, 0.44}) {
    double lo = std::log(sigma_schedule(0.5 - d, cfg));
    double hi = std::log(sigma_schedule(0.5 + d, cfg));
    EXPECT_NEAR(lo + hi, 2.0 * cfg.p_mean, 1e-10);
  }
}

TEST(Sigma, RejectsOutOfRangeT) {
  ScheduleConfig cfg;
  EXPECT_THROW(sigma_schedule(0.0, cfg), std::invalid_argument);
  EXPECT_THROW(sigma_schedule(1.0, cfg), std::invalid_argument);
}

TEST(TruncatedSigma, EqualsRescaledSchedule) {
  RandomSource rng(99);
  for (int i = 0; i < 100; ++i) {
    ScheduleConfig cfg;
    cfg.t_s = 0.05 + 0.95 * rng.next_uniform();
    double t = rng.next_uniform();
    double direct = truncated_sigma(t, cfg);
    double ref = sigma_schedule(cfg.t_s * t, cfg);
    EXPECT_NEAR(direct / ref, 1.0, 1e-12);
  }
}

TEST(TruncatedSigma, NestedCdfFormAgrees) {
  // evaluate the nested-CDF composition numerically: the uniform CDF is the
  // identity, so F^-1_U(F_U(t_s) F_U(t)) = t_s * t
  ScheduleConfig cfg;
  cfg.t_s = 0.62;
  auto cdf_u = [](double t) { return t; };     // U(0,1) CDF on [0,1]
  auto icdf_u = [](double p) { return p; };
  for (double t : {0.1, 0.5, 0.9, 1.0}) {
    double composed = icdf_u(cdf_u(cfg.t_s) * cdf_u(t));
    EXPECT_NEAR(truncated_sigma(t, cfg), sigma_schedule(composed, cfg), 1e-12);
  }
}

TEST(TruncatedSigma, EndpointAndNeutralCases) {
  ScheduleConfig cfg;
  cfg.t_s = 0.5;
  EXPECT_NEAR(truncated_sigma(1.0, cfg), sigma_schedule(0.5, cfg), 1e-12);
  EXPECT_NEAR(truncated_sigma(0.5, cfg), sigma_schedule(0.25, cfg), 1e-12);
  ScheduleConfig no_trunc;
  no_trunc.t_s = 1.0;
  for (double t : {0.2, 0.5, 0.8})
    EXPECT_DOUBLE_EQ(truncated_sigma(t, no_trunc), sigma_schedule(t, no_trunc));
}

TEST(BlurSchedule, EndpointsAndSpotValues) {
  ScheduleConfig cfg;
  cfg.sigma_b_max = 3.0;
  EXPECT_DOUBLE_EQ(blur_schedule(0.0, cfg), 0.0);
  // t = 0.5: sigma_B = 3 sin^2(pi/4) = 1.5, tau = 1.125
  EXPECT_NEAR(blur_schedule(0.5, cfg), 1.125, 1e-12);
  cfg.sigma_b_max = 2.0;
  EXPECT_NEAR(blur_schedule(1.0, cfg), 2.0, 1e-12);  // sigma_B,max^2 / 2
}

TEST(TimeGrid, UniformAndCapped) {
  ScheduleConfig cfg;
  cfg.n_steps = 10;
  cfg.t_s = 0.8;
  auto t = time_grid(cfg);
  ASSERT_EQ(t.size(), 11u);
  EXPECT_DOUBLE_EQ(t.front(), cfg.t_min);
  EXPECT_DOUBLE_EQ(t.back(), 1.0);
  for (size_t i = 1; i < t.size(); ++i)
    EXPECT_NEAR(t[i] - t[i - 1], (1.0 - cfg.t_min) / 10, 1e-12);

  // untruncated schedules cap the top point so sigma stays finite
  cfg.t_s = 1.0;
  auto tc = time_grid(cfg);
  EXPECT_DOUBLE_EQ(tc.back(), 1.0 - cfg.t_min);
  EXPECT_TRUE(std::isfinite(truncated_sigma(tc.back(), cfg)));
}

TEST(Lambda, SpotValues) {
  auto lam = lambda_matrix(4, 4);
  EXPECT_DOUBLE_EQ(lam[0], 0.0);
  EXPECT_NEAR(lam[1 * 4 + 1], -1.2337005501361698274, 1e-12);  // -pi^2/8
  EXPECT_NEAR(lam[3 * 4 + 3] / lam[1 * 4 + 1], 9.0, 1e-12);
}

TEST(Lambda, NonSquareNormalization) {
  auto lam = lambda_matrix(2, 8);
  const double pi2 = 9.86960440108935861883;
  EXPECT_NEAR(lam[1 * 8 + 0], -pi2 * (1.0 / 4.0), 1e-12);
  EXPECT_NEAR(lam[0 * 8 + 1], -pi2 * (1.0 / 64.0), 1e-12);
}

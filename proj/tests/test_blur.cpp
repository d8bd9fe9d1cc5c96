#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "rdm/blur.hpp"
#include "rdm/spectrum.hpp"

using namespace rdm;

namespace {

ImageField random_field(int h, int w, uint64_t seed) {
  RandomSource rng(seed);
  return gaussian_field(h, w, 1.0, rng);
}

// Explicit per-patch oracle: extract each patch, run the whole-patch DCT,
// decay, invert, reassemble.
ImageField per_patch_blur_oracle(const ImageField& x, int k, double tau) {
  BlurOperator kop = patch_blur_operator(k, k, k, tau);
  ImageField out(x.height, x.width);
  for (int pi = 0; pi < x.height; pi += k)
    for (int pj = 0; pj < x.width; pj += k) {
      ImageField patch(k, k);
      for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) patch.at(a, b) = x.at(pi + a, pj + b);
      ImageField blurred = idct2(apply(kop, dct2(patch)));
      for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) out.at(pi + a, pj + b) = blurred.at(a, b);
    }
  return out;
}

ImageField per_patch_mean_oracle(const ImageField& x, int k) {
  return upsample_nearest(downsample_mean(x, k), k);
}

}  // namespace

TEST(PatchBlur, TauZeroIsIdentity) {
  BlurOperator op = patch_blur_operator(8, 8, 4, 0.0);
  for (double d : op.decay) EXPECT_EQ(d, 1.0);
  ImageField x = random_field(8, 8, 1);
  ImageField y = apply_to_image(op, x);
  for (size_t i = 0; i < x.values.size(); ++i)
    EXPECT_NEAR(y.values[i], x.values[i], 1e-12);
}

TEST(PatchBlur, DecayEntriesInRangeWithUnitPatchDc) {
  for (double tau : {0.1, 1.0, 7.5}) {
    BlurOperator op = patch_blur_operator(12, 8, 4, tau);
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 8; ++j) {
        double d = op.at(i, j);
        EXPECT_GT(d, 0.0);
        EXPECT_LE(d, 1.0);
        if (i % 4 == 0 && j % 4 == 0) EXPECT_EQ(d, 1.0);  // per-patch DC
      }
  }
}

TEST(PatchBlur, MonotoneNonIncreasingInTau) {
  BlurOperator a = patch_blur_operator(8, 8, 4, 0.5);
  BlurOperator b = patch_blur_operator(8, 8, 4, 1.5);
  for (size_t i = 0; i < a.decay.size(); ++i) EXPECT_LE(b.decay[i], a.decay[i]);
}

TEST(PatchBlur, MatchesPerPatchOracle) {
  ImageField x = random_field(12, 8, 3);
  for (double tau : {0.2, 1.1}) {
    BlurOperator op = patch_blur_operator(12, 8, 4, tau);
    ImageField got = apply_to_image(op, x);
    ImageField ref = per_patch_blur_oracle(x, 4, tau);
    for (size_t i = 0; i < got.values.size(); ++i)
      EXPECT_NEAR(got.values[i], ref.values[i], 1e-10);
  }
}

TEST(PatchBlur, PatchConstantImagesAreFixedPoints) {
  ImageField low = random_field(3, 2, 5);
  ImageField x = upsample_nearest(low, 4);
  BlurOperator op = patch_blur_operator(12, 8, 4, 2.3);
  ImageField y = apply_to_image(op, x);
  for (size_t i = 0; i < x.values.size(); ++i)
    EXPECT_NEAR(y.values[i], x.values[i], 1e-10);
  // only per-patch DC coefficients are nonzero for patch-constant input
  FreqField u = patch_dct2(x, 4);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 8; ++j)
      if (i % 4 || j % 4) EXPECT_NEAR(u.at(i, j), 0.0, 1e-12);
}

TEST(PatchBlur, TerminalStateIsPerPatchMean) {
  // exp(-pi^2 tau / k^2) < 1e-8  =>  output within 1e-6 of the patch mean
  int k = 4;
  double tau = 19.0 * k * k / 9.8696;  // ln(1e-8) ~ -18.4; margin on top
  ASSERT_LT(std::exp(-9.86960440108936 * tau / (k * k)), 1e-8);
  ImageField x = random_field(32, 32, 7);
  BlurOperator op = patch_blur_operator(32, 32, k, tau);
  ImageField got = apply_to_image(op, x);
  ImageField ref = per_patch_mean_oracle(x, k);
  for (size_t i = 0; i < got.values.size(); ++i)
    EXPECT_NEAR(got.values[i], ref.values[i], 1e-6);
}

TEST(PatchBlur, SemigroupInTau) {
  ImageField x = random_field(8, 8, 11);
  BlurOperator a = patch_blur_operator(8, 8, 4, 0.7);
  BlurOperator b = patch_blur_operator(8, 8, 4, 1.9);
  BlurOperator ab = patch_blur_operator(8, 8, 4, 2.6);
  ImageField two_step = apply_to_image(a, apply_to_image(b, x));
  ImageField one_step = apply_to_image(ab, x);
  for (size_t i = 0; i < x.values.size(); ++i)
    EXPECT_NEAR(two_step.values[i], one_step.values[i], 1e-10);
}

TEST(PatchBlur, RejectsBadArguments) {
  EXPECT_THROW(patch_blur_operator(8, 8, 3, 1.0), std::invalid_argument);
  EXPECT_THROW(patch_blur_operator(8, 8, 4, -0.1), std::invalid_argument);
}

TEST(GlobalBlur, MatchesPatchOperatorOnFullSquare) {
  // whole-image DCT blur equals patch blur with k = H = W
  ImageField x = random_field(8, 8, 13);
  ImageField a = apply_to_image(global_blur_operator(8, 8, 0.9), x);
  ImageField b = apply_to_image(patch_blur_operator(8, 8, 8, 0.9), x);
  for (size_t i = 0; i < x.values.size(); ++i)
    EXPECT_NEAR(a.values[i], b.values[i], 1e-10);
}

TEST(ForwardCorrupt, NearIdentityAtTimeZero) {
  ScheduleConfig cfg;
  cfg.patch = 4;
  cfg.sigma_b_max = 2.0;
  cfg.noise = NoiseSpec{1.0, 4, 0.15};
  ImageField x = random_field(8, 8, 17);
  RandomSource rng(100);
  ImageField y = forward_corrupt(x, 0.0, cfg, rng);
  // tau(0) = 0, sigma'(t_min) ~ 0.007: deviation statistically below 3 sigma
  double sigma0 = truncated_sigma(cfg.t_min, cfg);
  double worst = 0.0;
  for (size_t i = 0; i < x.values.size(); ++i)
    worst = std::max(worst, std::fabs(y.values[i] - x.values[i]));
  EXPECT_LT(worst, 5.0 * sigma0);
}

TEST(ForwardCorrupt, ReducesToEdmWhenDegenerate) {
  // alpha = 0, tau = 0: bitwise x + sigma' * eps on the derived iid stream
  ScheduleConfig cfg;
  cfg.patch = 1;
  cfg.sigma_b_max = 0.0;
  cfg.noise = NoiseSpec{1.0, 4, 0.0};
  ImageField x = random_field(8, 8, 19);
  double t = 0.63;
  RandomSource r1(55), r2(55);
  ImageField y = forward_corrupt(x, t, cfg, r1);
  RandomSource iid = r2.derive(kMixIidStream);
  ImageField eps = gaussian_field(8, 8, truncated_sigma(t, cfg), iid);
  for (size_t i = 0; i < x.values.size(); ++i)
    EXPECT_EQ(y.values[i], x.values[i] + eps.values[i]);
}

TEST(ForwardCorrupt, PatchConstantMeanAndResidualVariance) {
  // for patch-constant x the blur is a no-op: the residual is pure mixed
  // noise with variance sigma'(t)^2
  ScheduleConfig cfg;
  cfg.patch = 4;
  cfg.sigma_b_max = 2.0;
  cfg.noise = NoiseSpec{1.0, 4, 0.15};
  ImageField x = upsample_nearest(random_field(2, 2, 23), 4);
  double t = 0.8;
  double sigma = truncated_sigma(t, cfg);
  const int draws = 10000;
  RandomSource rng(200);
  double s = 0.0, q = 0.0;
  size_t n = 0;
  for (int d = 0; d < draws; ++d) {
    RandomSource r = rng.derive(d);
    ImageField y = forward_corrupt(x, t, cfg, r);
    for (size_t i = 0; i < y.values.size(); ++i) {
      double resid = y.values[i] - x.values[i];
      s += resid;
      q += resid * resid;
    }
    n += y.values.size();
  }
  double mean = s / n;
  double var = q / n - mean * mean;
  double eff = static_cast<double>(n) / 16.0;  // block noise correlation
  EXPECT_LT(std::fabs(mean), 3.0 * sigma / std::sqrt(eff));
  EXPECT_NEAR(var / (sigma * sigma), 1.0, 3.0 * std::sqrt(2.0 / eff));
}

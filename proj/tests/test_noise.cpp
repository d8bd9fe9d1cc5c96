#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "rdm/noise.hpp"
#include "rdm/spectrum.hpp"

using namespace rdm;

TEST(Gaussian, RejectsBadSigma) {
  RandomSource rng(0);
  EXPECT_THROW(gaussian_field(2, 2, 0.0, rng), std::invalid_argument);
  EXPECT_THROW(gaussian_field(2, 2, -1.0, rng), std::invalid_argument);
}

TEST(Gaussian, DeterministicPerSeed) {
  RandomSource a(42), b(42), c(43);
  ImageField fa = gaussian_field(4, 4, 1.0, a);
  ImageField fb = gaussian_field(4, 4, 1.0, b);
  ImageField fc = gaussian_field(4, 4, 1.0, c);
  EXPECT_EQ(fa.values, fb.values);
  EXPECT_NE(fa.values, fc.values);
}

TEST(Gaussian, MomentsMatchMonteCarlo) {
  // 1e6 pooled samples: variance within 3 standard errors of 1.
  RandomSource rng(7);
  const int draws = 250;
  double s = 0.0, q = 0.0;
  size_t n = 0;
  for (int d = 0; d < draws; ++d) {
    RandomSource r = rng.derive(d);
    ImageField f = gaussian_field(64, 64, 1.0, r);
    for (double v : f.values) {
      s += v;
      q += v * v;
    }
    n += f.values.size();
  }
  double mean = s / n;
  double var = q / n - mean * mean;
  double se_mean = 1.0 / std::sqrt(static_cast<double>(n));
  double se_var = std::sqrt(2.0 / static_cast<double>(n));
  EXPECT_LT(std::fabs(mean), 3.0 * se_mean);
  EXPECT_LT(std::fabs(var - 1.0), 3.0 * se_var);
}

TEST(Gaussian, DistinctPixelsUncorrelated) {
  RandomSource rng(11);
  const int draws = 100000;
  double acc = 0.0;
  for (int d = 0; d < draws; ++d) {
    RandomSource r = rng.derive(d);
    ImageField f = gaussian_field(2, 2, 1.0, r);
    acc += f.at(0, 0) * f.at(1, 1);
  }
  double cov = acc / draws;
  EXPECT_LT(std::fabs(cov), 3.0 / std::sqrt(static_cast<double>(draws)));
}

TEST(BlockNoise, KernelOneIsIdentity) {
  RandomSource rng(3);
  NoiseSpec spec{1.0, 1, 0.0};
  RandomSource r1 = rng.derive(1), r2 = rng.derive(1);
  ImageField blocked = block_noise(8, 8, spec, r1);
  ImageField plain = gaussian_field(8, 8, 1.0, r2);
  EXPECT_EQ(blocked.values, plain.values);
}

TEST(BlockNoise, RejectsOversizedKernel) {
  RandomSource rng(0);
  NoiseSpec spec{1.0, 9, 0.0};
  EXPECT_THROW(block_noise(8, 8, spec, rng), std::invalid_argument);
}

TEST(BlockNoise, OracleMatchesBruteForceCounting) {
  // closed form vs overlap counting, including the toroidal wrap offsets
  for (int s : {1, 2, 4}) {
    NoiseSpec spec{1.3, s, 0.0};
    for (int dx = -8; dx <= 8; ++dx)
      for (int dy = -8; dy <= 8; ++dy) {
        double a = block_covariance_oracle(dx, dy, spec, 16, 16);
        double b = oracle::block_covariance_counting(dx, dy, 1.3, s, 16, 16);
        EXPECT_NEAR(a, b, 1e-12) << "s=" << s << " dx=" << dx << " dy=" << dy;
      }
  }
}

TEST(BlockNoise, OracleSpotValues) {
  NoiseSpec s2{1.0, 2, 0.0};
  EXPECT_DOUBLE_EQ(block_covariance_oracle(0, 0, s2, 8, 8), 1.0);
  EXPECT_DOUBLE_EQ(block_covariance_oracle(2, 0, s2, 8, 8), 0.0);  // supports disjoint
  EXPECT_DOUBLE_EQ(block_covariance_oracle(1, 0, s2, 8, 8), 0.5);
  // offset h-1 wraps to toroidal distance 1
  EXPECT_DOUBLE_EQ(block_covariance_oracle(0, 7, s2, 8, 8), 0.5);
  NoiseSpec s4{2.0, 4, 0.0};
  EXPECT_DOUBLE_EQ(block_covariance_oracle(0, 0, s4, 16, 16), 4.0);
}

TEST(BlockNoise, EmpiricalCovarianceMatchesOracle) {
  // 5x5 offset neighborhood, 1e5 draws, 3 SE, s in {1, 2, 4}
  const int h = 16, w = 16, draws = 100000;
  for (int s : {1, 2, 4}) {
    NoiseSpec spec{1.0, s, 0.0};
    RandomSource rng(1000 + s);
    std::vector<double> sum(25, 0.0), sumsq(25, 0.0);
    const int ci = h / 2, cj = w / 2;
    for (int d = 0; d < draws; ++d) {
      RandomSource r = rng.derive(d);
      ImageField f = block_noise(h, w, spec, r);
      double center = f.at(ci, cj);
      for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
          double prod = center * f.at(ci + dy, cj + dx);
          int idx = (dy + 2) * 5 + (dx + 2);
          sum[idx] += prod;
          sumsq[idx] += prod * prod;
        }
    }
    for (int dy = -2; dy <= 2; ++dy)
      for (int dx = -2; dx <= 2; ++dx) {
        int idx = (dy + 2) * 5 + (dx + 2);
        double mean = sum[idx] / draws;
        double var = sumsq[idx] / draws - mean * mean;
        double se = std::sqrt(var / draws);
        double expect = block_covariance_oracle(dx, dy, spec, h, w);
        EXPECT_LT(std::fabs(mean - expect), 3.0 * se)
            << "s=" << s << " dx=" << dx << " dy=" << dy;
      }
  }
}

TEST(BlockNoise, TranslationCovariantOnTorus) {
  // cyclically shifting the input shifts the output identically, exactly
  RandomSource rng(5);
  ImageField eps = gaussian_field(8, 6, 1.0, rng);
  int si = 3, sj = 2;
  ImageField shifted(8, 6);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 6; ++j)
      shifted.at((i + si) % 8, (j + sj) % 6) = eps.at(i, j);
  ImageField a = block_noise_from(eps, 4);
  ImageField b = block_noise_from(shifted, 4);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 6; ++j)
      EXPECT_EQ(b.at((i + si) % 8, (j + sj) % 6), a.at(i, j));
}

TEST(MixedNoise, AlphaZeroIsPlainGaussianBitwise) {
  RandomSource rng(17);
  NoiseSpec spec{0.7, 4, 0.0};
  RandomSource r1 = rng.derive(9);
  ImageField mixed = mixed_noise(8, 8, spec, r1);
  RandomSource r2 = rng.derive(9).derive(kMixIidStream);
  ImageField plain = gaussian_field(8, 8, 0.7, r2);
  EXPECT_EQ(mixed.values, plain.values);
}

TEST(MixedNoise, VariancePreservedAcrossAlpha) {
  const int draws = 12000, h = 16, w = 16;
  for (double alpha : {0.0, 0.15, 1.0, 10.0}) {
    NoiseSpec spec{1.0, 4, alpha};
    RandomSource rng(23 + static_cast<uint64_t>(alpha * 100));
    double s = 0.0, q = 0.0;
    size_t n = 0;
    for (int d = 0; d < draws; ++d) {
      RandomSource r = rng.derive(d);
      ImageField f = mixed_noise(h, w, spec, r);
      for (double v : f.values) {
        s += v;
        q += v * v;
      }
      n += f.values.size();
    }
    double mean = s / n, var = q / n - mean * mean;
    // block noise correlates nearby pixels, so the pooled variance estimate
    // has fewer effective samples than n; use the per-draw field variance SE
    double eff = static_cast<double>(draws) * h * w / (spec.kernel * spec.kernel);
    EXPECT_LT(std::fabs(var - 1.0), 3.0 * std::sqrt(2.0 / eff)) << "alpha=" << alpha;
  }
}

TEST(MixedNoise, LargeAlphaApproachesPureBlockSpectrum) {
  // alpha = 1e3: spectrum within 2% of pure block noise spectrum
  const int h = 32, w = 32, draws = 3000, bins = 8;
  NoiseSpec mixed_spec{1.0, 4, 1000.0};
  NoiseSpec block_spec{1.0, 4, 0.0};
  RandomSource rng(31);
  std::vector<double> pm(bins, 0.0), pb(bins, 0.0);
  for (int d = 0; d < draws; ++d) {
    RandomSource r1 = rng.derive(2 * d), r2 = rng.derive(2 * d + 1);
    SpectrumCurve cm = psd_curve(dct2(mixed_noise(h, w, mixed_spec, r1)), bins);
    SpectrumCurve cb = psd_curve(dct2(block_noise(h, w, block_spec, r2)), bins);
    for (int b = 0; b < bins; ++b) {
      pm[b] += cm.power[b];
      pb[b] += cb.power[b];
    }
  }
  for (int b = 0; b < bins; ++b) {
    if (pb[b] <= 0.0) continue;
    // MC fluctuation dominates high-frequency bins where block power is tiny;
    // compare relative to the curve peak instead of per-bin
    EXPECT_LT(std::fabs(pm[b] - pb[b]) / pb[0], 0.02) << "bin " << b;
  }
}

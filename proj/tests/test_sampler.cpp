#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "rdm/sampler.hpp"
#include "rdm/spectrum.hpp"

using namespace rdm;

namespace {

ScheduleConfig edm_like(int steps, double eta) {
  ScheduleConfig cfg;
  cfg.patch = 1;
  cfg.sigma_b_max = 0.0;
  cfg.noise = NoiseSpec{1.0, 1, 0.0};
  cfg.n_steps = steps;
  cfg.eta = eta;
  return cfg;
}

ScheduleConfig relay_like(int steps, double eta) {
  ScheduleConfig cfg;
  cfg.patch = 4;
  cfg.sigma_b_max = 2.0;
  cfg.noise = NoiseSpec{1.0, 4, 0.15};
  cfg.t_s = 0.8;
  cfg.n_steps = steps;
  cfg.eta = eta;
  return cfg;
}

FreqField random_freq(int h, int w, uint64_t seed, double scale = 1.0) {
  RandomSource rng(seed);
  FreqField f(h, w);
  for (double& v : f.coeffs) v = scale * rng.next_normal();
  return f;
}

// Counts denoiser evaluations.
class CountingDenoiser : public FreqDenoiser {
 public:
  explicit CountingDenoiser(FreqField constant) : u0_(std::move(constant)) {}
  FreqField estimate_u0(const FreqField&, double, const BlurOperator&) const override {
    ++calls;
    return u0_;
  }
  mutable int64_t calls = 0;

 private:
  FreqField u0_;
};

}  // namespace

TEST(EulerStep, MatchesClosedFormWithBlurAndNoise) {
  // u' = gamma u + (1 - gamma) u0hat + delta eps~ when D = I; gamma and
  // delta from their defining formulas, eps~ reconstructed from the stream
  ScheduleConfig cfg = edm_like(8, 0.2);
  Sampler s(4, 4, cfg);
  int n = 5;
  SamplerState st{n, random_freq(4, 4, 1), s.t_grid()[n], s.sigma_at(n)};
  FreqField u0hat = random_freq(4, 4, 2, 0.3);
  RandomSource step_rng(77), clone(77);
  SamplerState out = s.euler_step(st, u0hat, step_rng);

  double sp = s.sigma_at(n - 1), sn = s.sigma_at(n);
  double gamma = std::sqrt(1.0 - cfg.eta * cfg.eta) * sp / sn;
  double delta = cfg.eta * sp;
  NoiseSpec unit{1.0, 1, 0.0};
  ImageField noise = mixed_noise(4, 4, unit, clone);
  for (size_t i = 0; i < out.u.coeffs.size(); ++i) {
    double expect = gamma * st.u.coeffs[i] + (1.0 - gamma) * u0hat.coeffs[i] +
                    delta * noise.values[i];
    EXPECT_NEAR(out.u.coeffs[i], expect, 1e-12);
  }
  EXPECT_EQ(out.n, n - 1);
  EXPECT_DOUBLE_EQ(out.sigma, sp);
}

TEST(EulerStep, GammaDeltaPlugInArithmetic) {
  // eta = 0.2, sigma_{n-1} = 1, sigma_n = 2
  double gamma = std::sqrt(1.0 - 0.2 * 0.2) * 1.0 / 2.0;
  EXPECT_NEAR(gamma, 0.48989794855663561964, 1e-15);
  EXPECT_NEAR(0.2 * 1.0, 0.2, 0.0);
}

TEST(EulerStep, OdeReductionToFirstOrderEdm) {
  // eta = 0, identity blur: u_{n-1} = u_n + (sigma_{n-1} - sigma_n) d_n
  ScheduleConfig cfg = edm_like(16, 0.0);
  Sampler s(4, 4, cfg);
  RandomSource rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    int n = 1 + static_cast<int>(rng.next_u64() % 16);
    SamplerState st{n, random_freq(4, 4, 100 + rep), s.t_grid()[n], s.sigma_at(n)};
    FreqField u0hat = random_freq(4, 4, 200 + rep, 0.4);
    RandomSource step_rng(rep);
    SamplerState out = s.euler_step(st, u0hat, step_rng);
    double sp = s.sigma_at(n - 1), sn = s.sigma_at(n);
    for (size_t i = 0; i < out.u.coeffs.size(); ++i) {
      double d = (st.u.coeffs[i] - u0hat.coeffs[i]) / sn;
      EXPECT_NEAR(out.u.coeffs[i], st.u.coeffs[i] + (sp - sn) * d, 1e-10);
    }
  }
}

TEST(EulerStep, OdeModeIgnoresSeeds) {
  ScheduleConfig cfg = edm_like(8, 0.0);
  Sampler s(4, 4, cfg);
  SamplerState st{4, random_freq(4, 4, 3), s.t_grid()[4], s.sigma_at(4)};
  FreqField u0hat = random_freq(4, 4, 4, 0.2);
  RandomSource r1(111), r2(999);
  SamplerState a = s.euler_step(st, u0hat, r1);
  SamplerState b = s.euler_step(st, u0hat, r2);
  EXPECT_EQ(a.u.coeffs, b.u.coeffs);
}

TEST(EulerStep, RejectsStepBelowZero) {
  ScheduleConfig cfg = edm_like(4, 0.0);
  Sampler s(4, 4, cfg);
  SamplerState st{0, FreqField(4, 4, 0.0), s.t_grid()[0], s.sigma_at(0)};
  RandomSource rng(0);
  EXPECT_THROW(s.euler_step(st, FreqField(4, 4, 0.0), rng), std::invalid_argument);
}

TEST(HeunStep, ConstantDenoiserCorrectionClosedForm) {
  // with D == u0* and identity blur, eta = 0 the correction shifts the Euler
  // result by (sigma_{n-1} - sigma_n)(d_{n-1} - d_n)/2
  ScheduleConfig cfg = edm_like(8, 0.0);
  Sampler s(4, 4, cfg);
  int n = 6;
  SamplerState st{n, random_freq(4, 4, 7), s.t_grid()[n], s.sigma_at(n)};
  FreqField u0star = random_freq(4, 4, 8, 0.3);
  CountingDenoiser den(u0star);
  RandomSource rng(9);
  SamplerState got = s.heun_step(st, den, rng);

  double sp = s.sigma_at(n - 1), sn = s.sigma_at(n);
  for (size_t i = 0; i < got.u.coeffs.size(); ++i) {
    double d_n = (st.u.coeffs[i] - u0star.coeffs[i]) / sn;
    double euler = st.u.coeffs[i] + (sp - sn) * d_n;
    double d_p = (euler - u0star.coeffs[i]) / sp;
    double expect = euler + (sp - sn) * (d_p - d_n) / 2.0;
    EXPECT_NEAR(got.u.coeffs[i], expect, 1e-12);
  }
  EXPECT_EQ(den.calls, 2);
}

TEST(HeunStep, NoCorrectionAtFinalStep) {
  ScheduleConfig cfg = edm_like(8, 0.2);
  Sampler s(4, 4, cfg);
  SamplerState st{1, random_freq(4, 4, 10), s.t_grid()[1], s.sigma_at(1)};
  CountingDenoiser den(FreqField(4, 4, 0.0));
  RandomSource rng(11);
  s.heun_step(st, den, rng);
  EXPECT_EQ(den.calls, 1);
}

TEST(HeunStep, CorrectionReusesProposalNoise) {
  // identical trajectories from the shared draw: corrected result must equal
  // the closed-form recomputation with the SAME eps~
  ScheduleConfig cfg = edm_like(8, 0.3);
  Sampler s(4, 4, cfg);
  int n = 4;
  SamplerState st{n, random_freq(4, 4, 12), s.t_grid()[n], s.sigma_at(n)};
  FreqField u0star = random_freq(4, 4, 13, 0.2);
  CountingDenoiser den(u0star);
  RandomSource rng(14), clone(14);
  SamplerState got = s.heun_step(st, den, rng);

  NoiseSpec unit{1.0, 1, 0.0};
  ImageField eps = mixed_noise(4, 4, unit, clone);  // the single shared draw
  double sp = s.sigma_at(n - 1), sn = s.sigma_at(n);
  double gamma = std::sqrt(1.0 - cfg.eta * cfg.eta) * sp / sn;
  double delta = cfg.eta * sp;
  for (size_t i = 0; i < got.u.coeffs.size(); ++i) {
    double d_n = (st.u.coeffs[i] - u0star.coeffs[i]) / sn;
    double euler = gamma * st.u.coeffs[i] + (1 - gamma) * u0star.coeffs[i] +
                   delta * eps.values[i];
    double d_p = (euler - u0star.coeffs[i]) / sp;
    double dbar = 0.5 * (d_n + d_p);
    double expect = st.u.coeffs[i] + sn * (gamma - 1.0) * dbar + delta * eps.values[i];
    EXPECT_NEAR(got.u.coeffs[i], expect, 1e-12);
  }
}

TEST(Sampler, RunCallsDenoiserExactly2NMinus1Times) {
  for (int N : {1, 2, 5, 12}) {
    ScheduleConfig cfg = edm_like(N, 0.2);
    Sampler s(4, 4, cfg);
    CountingDenoiser den(FreqField(4, 4, 0.0));
    RandomSource rng(20 + N);
    int64_t nfe = 0;
    s.run(den, std::nullopt, rng, &nfe);
    EXPECT_EQ(nfe, 2 * N - 1);
    EXPECT_EQ(den.calls, 2 * N - 1);
  }
}

TEST(Sampler, TraceIsBitwiseReproducible) {
  ScheduleConfig cfg = relay_like(6, 0.2);
  Sampler s(8, 8, cfg);
  GaussianToyPrior prior = make_patch_power_prior(8, 8, 4, 0.25);
  AnalyticDenoiser den(prior);
  RandomSource r1(33), r2(33);
  auto [x1, t1] = s.run(den, std::nullopt, r1);
  auto [x2, t2] = s.run(den, std::nullopt, r2);
  EXPECT_EQ(x1.values, x2.values);
  ASSERT_EQ(t1.rows.size(), t2.rows.size());
  ASSERT_EQ(t1.rows.size(), 7u);
  for (size_t i = 0; i < t1.rows.size(); ++i) {
    EXPECT_EQ(t1.rows[i].mean_abs_u, t2.rows[i].mean_abs_u);
    EXPECT_EQ(t1.rows[i].mean_abs_d, t2.rows[i].mean_abs_d);
  }
}

TEST(Sampler, SigmaStrictlyDecreasingAlongTrace) {
  ScheduleConfig cfg = relay_like(10, 0.2);
  Sampler s(8, 8, cfg);
  for (int n = 1; n <= 10; ++n) {
    EXPECT_LT(s.sigma_at(n - 1), s.sigma_at(n));
    EXPECT_LT(s.t_grid()[n - 1], s.t_grid()[n]);
  }
  EXPECT_DOUBLE_EQ(s.sigma_at(0), truncated_sigma(cfg.t_min, cfg));
}

TEST(Sampler, RelayInitPatchConstantProperty) {
  // patch-constant input: D_N leaves it unchanged, so
  // u_N = V^T x_up + sigma_N * eps~ in frequency space
  ScheduleConfig cfg = relay_like(8, 0.2);
  Sampler s(8, 8, cfg);
  RandomSource rng_low(40);
  ImageField low = gaussian_field(2, 2, 1.0, rng_low);
  ImageField up = upsample_nearest(low, 4);

  RandomSource rng(41);
  SamplerState st = s.init_relay(up, rng);

  RandomSource clone = RandomSource(41).derive(kInitStream);
  NoiseSpec unit{1.0, 4, 0.15};
  ImageField noise = mixed_noise(8, 8, unit, clone);
  FreqField u_up = patch_dct2(up, 4);
  FreqField u_noise = patch_dct2(noise, 4);
  double sN = s.sigma_at(8);
  for (size_t i = 0; i < st.u.coeffs.size(); ++i)
    EXPECT_NEAR(st.u.coeffs[i], u_up.coeffs[i] + sN * u_noise.coeffs[i], 1e-10);
}

TEST(Sampler, RelayInitRejectsWrongShape) {
  ScheduleConfig cfg = relay_like(4, 0.2);
  Sampler s(8, 8, cfg);
  RandomSource rng(0);
  ImageField wrong(4, 4, 0.0);
  EXPECT_THROW(s.init_relay(wrong, rng), std::invalid_argument);
}

TEST(Sampler, InjectedNoiseIsIidWhenAlphaZero) {
  // off-diagonal covariance of injected increments within 3 SE of zero
  ScheduleConfig cfg = edm_like(4, 0.5);
  Sampler s(4, 4, cfg);
  int n = 2;
  FreqField u = random_freq(4, 4, 50);
  SamplerState st{n, u, s.t_grid()[n], s.sigma_at(n)};
  const int draws = 20000;
  double c01 = 0.0, c0f = 0.0, v0 = 0.0;
  RandomSource rng(51);
  for (int d = 0; d < draws; ++d) {
    RandomSource r = rng.derive(d);
    // with identity blur and d_n = 0 the update is u + delta * eps~
    SamplerState out = s.euler_step(st, u, r);
    double e0 = out.u.coeffs[0] - u.coeffs[0];
    double e1 = out.u.coeffs[1] - u.coeffs[1];
    double ef = out.u.coeffs[15] - u.coeffs[15];
    c01 += e0 * e1;
    c0f += e0 * ef;
    v0 += e0 * e0;
  }
  double delta = 0.5 * s.sigma_at(n - 1);
  double se = delta * delta / std::sqrt(static_cast<double>(draws));
  EXPECT_LT(std::fabs(c01 / draws), 3 * se);
  EXPECT_LT(std::fabs(c0f / draws), 3 * se);
  EXPECT_NEAR(v0 / draws, delta * delta, 4 * std::sqrt(2.0 / draws) * delta * delta);
}

TEST(Sampler, FullRunGaussianEndToEndMoments) {
  // analytic denoiser + matched prior: sample mean near prior mean and
  // per-frequency variance near prior variance (pooled over patches).
  // Pure-noise init needs the full schedule (sigma_max >> data scale);
  // truncated starts are only valid through the relay handoff. alpha = 0
  // keeps the injected noise isotropic, so the target marginal is exact and
  // the only gap is finite-N discretization (~3% at this configuration).
  const int h = 8, w = 8, k = 4;
  ScheduleConfig cfg = relay_like(80, 0.2);
  cfg.t_s = 1.0;
  cfg.noise.alpha = 0.0;
  cfg.grid_power = 1.5;
  Sampler s(h, w, cfg);
  GaussianToyPrior prior = make_patch_power_prior(h, w, k, 0.25);
  AnalyticDenoiser den(prior);
  const int n_samples = 3000;
  RandomSource rng(60);
  std::vector<double> sum(h * w, 0.0), sumsq(h * w, 0.0);
  for (int i = 0; i < n_samples; ++i) {
    RandomSource r = rng.derive(i);
    auto [img, trace] = s.run(den, std::nullopt, r);
    FreqField uf = patch_dct2(img, k);
    for (int f = 0; f < h * w; ++f) {
      sum[f] += uf.coeffs[f];
      sumsq[f] += uf.coeffs[f] * uf.coeffs[f];
    }
  }
  // pool by within-patch frequency
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) {
      double ps = 0.0, pq = 0.0;
      int cnt = 0;
      for (int i = a; i < h; i += k)
        for (int j = b; j < w; j += k) {
          ps += sum[i * w + j];
          pq += sumsq[i * w + j];
          cnt += n_samples;
        }
      double mean = ps / cnt;
      double var = pq / cnt - mean * mean;
      double c = prior.var[a * w + b];
      EXPECT_LT(std::fabs(mean), 4.0 * std::sqrt(c / cnt)) << a << "," << b;
      EXPECT_NEAR(var / c, 1.0, 0.10) << a << "," << b;
    }
}

TEST(MarginalConsistency, OracleChainMatchesTargetMoments) {
  ScheduleConfig cfg = relay_like(6, 0.2);
  FreqField u0 = random_freq(8, 8, 70, 0.5);
  RandomSource rng(71);
  ConsistencyReport rep = marginal_consistency_check(u0, cfg, 4000, rng);
  ASSERT_EQ(rep.steps.size(), 7u);
  // smoke-level bounds; the acceptance suite runs the strict ones
  EXPECT_TRUE(rep.pass(4.5, 0.90, 1.10));
}

TEST(MarginalConsistency, EtaZeroChainIsDeterministicGivenInit) {
  ScheduleConfig cfg = relay_like(5, 0.0);
  Sampler s(8, 8, cfg);
  FreqField u0 = random_freq(8, 8, 80, 0.5);
  RandomSource r1(81), r2(82);
  SamplerState a = s.sample_forward_marginal(u0, r1);
  SamplerState b = a;
  RandomSource n1(83), n2(84);
  while (a.n > 0) {
    a = s.oracle_transition(a, u0, n1);
    b = s.oracle_transition(b, u0, n2);
  }
  EXPECT_EQ(a.u.coeffs, b.u.coeffs);  // different noise seeds, same trajectory
}

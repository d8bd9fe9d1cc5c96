#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rdm/conv_denoiser.hpp"
#include "rdm/csv.hpp"
#include "rdm/noise.hpp"
#include "rdm/parallel.hpp"
#include "rdm/sampler.hpp"
#include "rdm/spectrum.hpp"

namespace rdm {

// One verification suite outcome. `artifacts` are (filename, content) pairs
// the caller may persist.
struct SuiteResult {
  std::string name;
  bool pass = false;
  double seconds = 0.0;
  std::string detail;
  std::vector<std::pair<std::string, std::string>> artifacts;
};

namespace detail {

class StopWatch {
 public:
  StopWatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

// DCT round-trip, Parseval, and linearity on random fields up to 64x64.
inline SuiteResult verify_dct(uint64_t seed) {
  detail::StopWatch sw;
  SuiteResult r;
  r.name = "dct";
  RandomSource rng(seed);
  double worst = 0.0;
  for (int n : {2, 5, 16, 33, 64}) {
    RandomSource fr = rng.derive(n);
    ImageField x = gaussian_field(n, n, 1.0, fr);
    FreqField f = dct2(x);
    ImageField back = idct2(f);
    double ex = 0.0, ef = 0.0, err = 0.0, scale = 0.0;
    for (size_t i = 0; i < x.values.size(); ++i) {
      ex += x.values[i] * x.values[i];
      ef += f.coeffs[i] * f.coeffs[i];
      err = std::max(err, std::fabs(x.values[i] - back.values[i]));
      scale = std::max(scale, std::fabs(x.values[i]));
    }
    worst = std::max(worst, err / scale);
    worst = std::max(worst, std::fabs(ef / ex - 1.0));
  }
  // linearity
  RandomSource la = rng.derive(900), lb = rng.derive(901);
  ImageField a = gaussian_field(16, 16, 1.0, la);
  ImageField b = gaussian_field(16, 16, 1.0, lb);
  ImageField comb(16, 16);
  for (size_t i = 0; i < comb.values.size(); ++i)
    comb.values[i] = 1.3 * a.values[i] - 0.7 * b.values[i];
  FreqField fa = dct2(a), fb = dct2(b), fc = dct2(comb);
  for (size_t i = 0; i < fc.coeffs.size(); ++i)
    worst = std::max(worst,
                     std::fabs(fc.coeffs[i] - 1.3 * fa.coeffs[i] + 0.7 * fb.coeffs[i]));
  r.pass = worst < 1e-10;
  r.detail = "worst error " + fmt_g(worst) + " (limit 1e-10)";
  r.seconds = sw.seconds();
  return r;
}

// Block-noise empirical covariance against the closed form, 5x5 offsets,
// 3 standard errors.
inline SuiteResult verify_covariance(uint64_t seed, int h = 32, int w = 32,
                                     int draws = 100000,
                                     std::vector<int> kernels = {1, 2, 4}) {
  detail::StopWatch sw;
  SuiteResult r;
  r.name = "covariance";
  std::vector<CovarianceRow> rows;
  double worst_z = 0.0;
  for (int s : kernels) {
    NoiseSpec spec{1.0, s, 0.0};
    RandomSource rng = RandomSource(seed).derive(1000 + s);
    const int ci = h / 2, cj = w / 2;
    const int chunk = 2000;
    const int n_chunks = (draws + chunk - 1) / chunk;
    std::vector<std::vector<double>> csum(n_chunks), csq(n_chunks);
    parallel_for(n_chunks, [&](int64_t k) {
      csum[k].assign(25, 0.0);
      csq[k].assign(25, 0.0);
      int lo = static_cast<int>(k) * chunk, hi = std::min(draws, lo + chunk);
      for (int d = lo; d < hi; ++d) {
        RandomSource fr = rng.derive(d);
        ImageField f = block_noise(h, w, spec, fr);
        double center = f.at(ci, cj);
        for (int dy = -2; dy <= 2; ++dy)
          for (int dx = -2; dx <= 2; ++dx) {
            double prod = center * f.at(ci + dy, cj + dx);
            int idx = (dy + 2) * 5 + (dx + 2);
            csum[k][idx] += prod;
            csq[k][idx] += prod * prod;
          }
      }
    });
    for (int dy = -2; dy <= 2; ++dy)
      for (int dx = -2; dx <= 2; ++dx) {
        int idx = (dy + 2) * 5 + (dx + 2);
        double sum = 0.0, sq = 0.0;
        for (int k = 0; k < n_chunks; ++k) {
          sum += csum[k][idx];
          sq += csq[k][idx];
        }
        double mean = sum / draws;
        double var = sq / draws - mean * mean;
        double se = std::sqrt(var / draws);
        double analytic = block_covariance_oracle(dx, dy, spec, h, w);
        worst_z = std::max(worst_z, std::fabs(mean - analytic) / se);
        rows.push_back({dx, dy, analytic, mean, se});
      }
  }
  r.pass = worst_z < 3.0;
  r.detail = "worst |z| " + fmt_g(worst_z) + " (limit 3)";
  r.artifacts.emplace_back("covariance.csv", covariance_csv(rows));
  r.seconds = sw.seconds();
  return r;
}

// Mixed-noise variance preservation across alpha.
inline SuiteResult verify_mixednoise(uint64_t seed) {
  detail::StopWatch sw;
  SuiteResult r;
  r.name = "mixednoise";
  const int h = 16, w = 16, draws = 20000;
  double worst_z = 0.0;
  for (double alpha : {0.0, 0.15, 1.0, 10.0}) {
    NoiseSpec spec{1.0, 4, alpha};
    RandomSource rng = RandomSource(seed).derive(static_cast<uint64_t>(alpha * 1000));
    const int chunk = 1000;
    const int n_chunks = (draws + chunk - 1) / chunk;
    std::vector<double> s(n_chunks, 0.0), q(n_chunks, 0.0);
    parallel_for(n_chunks, [&](int64_t k) {
      int lo = static_cast<int>(k) * chunk, hi = std::min(draws, lo + chunk);
      for (int d = lo; d < hi; ++d) {
        RandomSource fr = rng.derive(d);
        ImageField f = mixed_noise(h, w, spec, fr);
        for (double v : f.values) {
          s[k] += v;
          q[k] += v * v;
        }
      }
    });
    double sum = 0.0, sq = 0.0;
    for (int k = 0; k < n_chunks; ++k) {
      sum += s[k];
      sq += q[k];
    }
    size_t n = static_cast<size_t>(draws) * h * w;
    double mean = sum / n, var = sq / n - mean * mean;
    double eff = static_cast<double>(draws) * h * w / 16.0;  // correlation slack
    worst_z = std::max(worst_z, std::fabs(var - 1.0) / std::sqrt(2.0 / eff));
  }
  r.pass = worst_z < 3.0;
  r.detail = "worst |z| " + fmt_g(worst_z) + " (limit 3)";
  r.seconds = sw.seconds();
  return r;
}

// Binned PSD of Block[factor] noise at full resolution vs iid noise at
// low resolution nearest-upsampled, relative gap below pi/4.
inline SuiteResult verify_spectrum_equivalence(uint64_t seed, int low_res = 32,
                                               int factor = 4, int draws = 1000,
                                               int bins = 64, double tol = 0.10) {
  detail::StopWatch sw;
  SuiteResult r;
  r.name = "spectrum";
  const int hi = low_res * factor;
  RandomSource rng(seed);
  const int chunk = 50;
  const int n_chunks = (draws + chunk - 1) / chunk;
  std::vector<std::vector<double>> pb(n_chunks), pu(n_chunks);
  parallel_for(n_chunks, [&](int64_t k) {
    pb[k].assign(bins, 0.0);
    pu[k].assign(bins, 0.0);
    int lo = static_cast<int>(k) * chunk, hic = std::min(draws, lo + chunk);
    NoiseSpec spec{1.0, factor, 0.0};
    for (int d = lo; d < hic; ++d) {
      RandomSource r1 = rng.derive(2 * d), r2 = rng.derive(2 * d + 1);
      SpectrumCurve cb = psd_curve(dct2(block_noise(hi, hi, spec, r1)), bins);
      ImageField low = gaussian_field(low_res, low_res, 1.0, r2);
      SpectrumCurve cu = psd_curve(dct2(upsample_nearest(low, factor)), bins);
      for (int b = 0; b < bins; ++b) {
        pb[k][b] += cb.power[b];
        pu[k][b] += cu.power[b];
      }
    }
  });
  SpectrumCurve block_curve = make_curve(bins), up_curve = make_curve(bins);
  for (int b = 0; b < bins; ++b)
    for (int k = 0; k < n_chunks; ++k) {
      block_curve.power[b] += pb[k][b] / draws;
      up_curve.power[b] += pu[k][b] / draws;
    }
  double worst = 0.0;
  const double pi = 3.14159265358979323846;
  for (int b = 0; b < bins; ++b) {
    if (block_curve.freq[b] >= pi / 4.0) break;
    worst = std::max(worst, std::fabs(up_curve.power[b] - block_curve.power[b]) /
                                block_curve.power[b]);
  }
  r.pass = worst < tol;
  r.detail = "worst relative gap below pi/4: " + fmt_g(worst) + " (limit " +
             fmt_g(tol) + ")";
  r.artifacts.emplace_back("psd_block.csv", spectrum_csv(block_curve));
  r.artifacts.emplace_back("psd_upsampled.csv", spectrum_csv(up_curve));
  r.seconds = sw.seconds();
  return r;
}

// SNR shift: both resolutions are compared in the common high-resolution
// DCT spectrum (the low-res signal AND its noise nearest-upsampled, the
// high-res side carrying native noise at the same sigma). Low-frequency SNR
// bins at the higher resolution must exceed the base-resolution bins.
// Curves use the ratio-of-bin-means amplitude estimator; the per-point
// ratio estimator has no finite mean.
inline SuiteResult verify_snr_shift(uint64_t seed, int base_res = 32,
                                    int factor = 4, int draws = 200,
                                    int bins = 128, double noise_sigma = 0.3,
                                    double required_fraction = 0.95) {
  detail::StopWatch sw;
  SuiteResult r;
  r.name = "snr";
  const double pi = 3.14159265358979323846;
  const int hi_res = base_res * factor;
  RandomSource rng(seed);
  std::vector<double> sig(bins, 0.0), n_lo(bins, 0.0), n_hi(bins, 0.0);
  for (int d = 0; d < draws; ++d) {
    RandomSource rs = rng.derive(3 * d);
    RandomSource rn1 = rng.derive(3 * d + 1), rn2 = rng.derive(3 * d + 2);
    // natural-image-like power-law field at the base resolution
    FreqField f(base_res, base_res);
    for (int i = 0; i < base_res; ++i)
      for (int j = 0; j < base_res; ++j) {
        double fr = std::hypot(pi * i / base_res, pi * j / base_res);
        f.at(i, j) = rs.next_normal() / (0.15 + fr);
      }
    ImageField x = idct2(f);
    FreqField sig_hi = dct2(upsample_nearest(x, factor));
    FreqField noise_lo =
        dct2(upsample_nearest(gaussian_field(base_res, base_res, noise_sigma, rn1),
                              factor));
    FreqField noise_hi = dct2(gaussian_field(hi_res, hi_res, noise_sigma, rn2));
    for (int i = 0; i < hi_res; ++i)
      for (int j = 0; j < hi_res; ++j) {
        int b = freq_bin(i, j, hi_res, hi_res, bins);
        sig[b] += std::fabs(sig_hi.at(i, j));
        n_lo[b] += std::fabs(noise_lo.at(i, j));
        n_hi[b] += std::fabs(noise_hi.at(i, j));
      }
  }
  SpectrumCurve centers = make_curve(bins);
  int considered = 0, strict = 0;
  for (int b = 0; b < bins; ++b) {
    if (centers.freq[b] >= pi / 4.0) break;
    if (n_lo[b] <= 0.0 || n_hi[b] <= 0.0) continue;
    ++considered;
    if (sig[b] / n_hi[b] > sig[b] / n_lo[b]) ++strict;
  }
  double frac = considered > 0 ? static_cast<double>(strict) / considered : 0.0;
  r.pass = considered > 0 && frac >= required_fraction;
  r.detail = "strict inequality in " + std::to_string(strict) + "/" +
             std::to_string(considered) + " low-frequency bins";
  r.seconds = sw.seconds();
  return r;
}

// Euler step vs the closed-form first-order EDM update on random states.
inline SuiteResult verify_ode_reduction(uint64_t seed, int n_states = 100,
                                        double tol = 1e-10) {
  detail::StopWatch sw;
  SuiteResult r;
  r.name = "ode";
  ScheduleConfig cfg;
  cfg.patch = 1;
  cfg.noise = NoiseSpec{1.0, 1, 0.0};
  cfg.n_steps = 16;
  cfg.eta = 0.0;
  Sampler s(4, 4, cfg);
  RandomSource rng(seed);
  double worst = 0.0;
  for (int rep = 0; rep < n_states; ++rep) {
    RandomSource sr = rng.derive(rep);
    int n = 1 + static_cast<int>(sr.next_u64() % 16);
    FreqField u(4, 4), u0(4, 4);
    for (double& v : u.coeffs) v = sr.next_normal();
    for (double& v : u0.coeffs) v = 0.4 * sr.next_normal();
    SamplerState st{n, u, s.t_grid()[n], s.sigma_at(n)};
    RandomSource step_rng = sr.derive(7);
    SamplerState out = s.euler_step(st, u0, step_rng);
    double sp = s.sigma_at(n - 1), sn = s.sigma_at(n);
    for (size_t i = 0; i < u.coeffs.size(); ++i) {
      double d = (u.coeffs[i] - u0.coeffs[i]) / sn;
      worst = std::max(worst, std::fabs(out.u.coeffs[i] - (u.coeffs[i] + (sp - sn) * d)));
    }
  }
  r.pass = worst < tol;
  r.detail = "worst per-step deviation " + fmt_g(worst) + " (limit " + fmt_g(tol) + ")";
  r.seconds = sw.seconds();
  return r;
}

// Truncated-schedule identity and blur endpoints.
inline SuiteResult verify_schedule_identity(uint64_t seed) {
  detail::StopWatch sw;
  SuiteResult r;
  r.name = "schedule";
  RandomSource rng(seed);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    ScheduleConfig cfg;
    cfg.t_s = 0.05 + 0.95 * rng.next_uniform();
    double t = rng.next_uniform();
    double a = truncated_sigma(t, cfg);
    double b = sigma_schedule(cfg.t_s * t, cfg);
    worst = std::max(worst, std::fabs(a / b - 1.0));
  }
  ScheduleConfig cfg;
  cfg.sigma_b_max = 2.0;
  bool endpoints = blur_schedule(0.0, cfg) == 0.0 &&
                   std::fabs(blur_schedule(1.0, cfg) - 2.0) < 1e-15;
  r.pass = worst < 1e-12 && endpoints;
  r.detail = "worst relative identity error " + fmt_g(worst) +
             (endpoints ? ", endpoints exact" : ", ENDPOINTS WRONG");
  r.seconds = sw.seconds();
  return r;
}

// Terminal patch blur equals the per-patch mean.
inline SuiteResult verify_patch_terminal(uint64_t seed, int res = 32, int k = 4,
                                         double tol = 1e-6) {
  detail::StopWatch sw;
  SuiteResult r;
  r.name = "patchblur";
  const double pi2 = 9.86960440108935861883;
  double tau = 19.0 * k * k / pi2;  // exp(-pi^2 tau / k^2) = e^-19 < 1e-8
  RandomSource rng(seed);
  ImageField x = gaussian_field(res, res, 1.0, rng);
  BlurOperator op = patch_blur_operator(res, res, k, tau);
  ImageField got = apply_to_image(op, x);
  ImageField ref = upsample_nearest(downsample_mean(x, k), k);
  double worst = 0.0;
  for (size_t i = 0; i < got.values.size(); ++i)
    worst = std::max(worst, std::fabs(got.values[i] - ref.values[i]));
  r.pass = worst < tol && std::exp(-pi2 * tau / (k * k)) < 1e-8;
  r.detail = "worst |output - patch mean| " + fmt_g(worst) + " (limit " +
             fmt_g(tol) + ")";
  r.seconds = sw.seconds();
  return r;
}

// Conv-denoiser gradients vs central finite differences.
inline SuiteResult verify_gradcheck(uint64_t seed, int n_seeds = 5,
                                    int n_params = 20, double tol = 1e-4) {
  detail::StopWatch sw;
  SuiteResult r;
  r.name = "gradcheck";
  ScheduleConfig cfg;
  cfg.patch = 4;
  cfg.sigma_b_max = 2.0;
  cfg.noise = NoiseSpec{1.0, 4, 0.15};
  cfg.t_s = 0.8;
  double worst = 0.0;
  for (int s = 1; s <= n_seeds; ++s) {
    RandomSource rng(seed + s);
    ConvDenoiserParams p = ConvDenoiserParams::init(6, 3, 0.5, rng);
    RandomSource xr = rng.derive(1);
    ImageField x = gaussian_field(8, 8, 1.0, xr);
    double t = 0.2 + 0.6 * rng.next_uniform();
    std::optional<int> label = s % 2 ? std::optional<int>(1) : std::nullopt;
    uint64_t corrupt_tag = 5000 + s;
    RandomSource rc = RandomSource(seed).derive(corrupt_tag);
    LossAndGrad lg = rdm_loss_grad(p, x, t, cfg, rc, label);
    std::vector<double> flat = p.flatten();
    std::vector<double> gflat = lg.grad.flatten();
    RandomSource pick = rng.derive(2);
    for (int j = 0; j < n_params; ++j) {
      size_t idx = pick.next_u64() % flat.size();
      double eps = 1e-5 * std::max(1.0, std::fabs(flat[idx]));
      auto loss_at = [&](double v) {
        std::vector<double> mod = flat;
        mod[idx] = v;
        ConvDenoiserParams q = p;
        q.unflatten(mod);
        RandomSource rc2 = RandomSource(seed).derive(corrupt_tag);
        return rdm_loss_grad(q, x, t, cfg, rc2, label).loss;
      };
      double num = (loss_at(flat[idx] + eps) - loss_at(flat[idx] - eps)) / (2 * eps);
      double ana = gflat[idx];
      double denom = std::max({std::fabs(num), std::fabs(ana), 1e-8});
      worst = std::max(worst, std::fabs(num - ana) / denom);
    }
  }
  r.pass = worst < tol;
  r.detail = "worst relative gradient error " + fmt_g(worst) + " (limit " +
             fmt_g(tol) + ")";
  r.seconds = sw.seconds();
  return r;
}

// Marginal consistency at the acceptance parameters.
inline SuiteResult verify_marginal(uint64_t seed, std::vector<double> etas = {0.0, 0.2, 0.5},
                                   int n_steps = 10, int res = 8, int n_traj = 10000,
                                   int csv_bins = 8) {
  detail::StopWatch sw;
  SuiteResult r;
  r.name = "marginal";
  ScheduleConfig base;
  base.patch = 4;
  base.sigma_b_max = 2.0;
  base.noise = NoiseSpec{1.0, 4, 0.15};
  base.t_s = 0.8;
  base.n_steps = n_steps;
  RandomSource rng(seed);
  FreqField u0(res, res);
  {
    RandomSource ur = rng.derive(1);
    GaussianToyPrior prior = make_patch_power_prior(res, res, 4, 0.25);
    u0 = prior.sample_freq(ur);
  }
  bool all_pass = true;
  double worst_mean = 0.0, worst_var_lo = 1.0, worst_var_hi = 1.0;
  std::string csv;
  for (double eta : etas) {
    ScheduleConfig cfg = base;
    cfg.eta = eta;
    RandomSource er = rng.derive(static_cast<uint64_t>(eta * 1e6) + 13);
    ConsistencyReport rep = marginal_consistency_check(u0, cfg, n_traj, er);
    for (const auto& s : rep.steps) {
      worst_mean = std::max(worst_mean, s.max_mean_err_sigmas);
      worst_var_lo = std::min(worst_var_lo, s.min_var_ratio);
      worst_var_hi = std::max(worst_var_hi, s.max_var_ratio);
    }
    all_pass = all_pass && rep.pass(3.0, 0.95, 1.05);
    csv += "# eta=" + fmt_g(eta) + "\n" + consistency_csv(rep, res, res, csv_bins);
  }
  r.pass = all_pass;
  r.detail = "worst mean err " + fmt_g(worst_mean) + " SE (limit 3); var ratio in [" +
             fmt_g(worst_var_lo) + ", " + fmt_g(worst_var_hi) + "] (limits [0.95, 1.05])";
  r.artifacts.emplace_back("consistency.csv", csv);
  r.seconds = sw.seconds();
  return r;
}

inline std::vector<SuiteResult> verify_all(uint64_t seed) {
  return {verify_dct(seed),
          verify_covariance(seed),
          verify_mixednoise(seed),
          verify_schedule_identity(seed),
          verify_patch_terminal(seed),
          verify_spectrum_equivalence(seed),
          verify_snr_shift(seed),
          verify_ode_reduction(seed),
          verify_gradcheck(seed),
          verify_marginal(seed)};
}

}  // namespace rdm

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rdm/blur.hpp"
#include "rdm/denoiser.hpp"
#include "rdm/field.hpp"
#include "rdm/noise.hpp"
#include "rdm/parallel.hpp"
#include "rdm/schedule.hpp"

namespace rdm {

struct SamplerState {
  int n = 0;        // step index in [0, N]
  FreqField u;      // state in the sampler's frequency basis
  double t = 0.0;
  double sigma = 0.0;
};

struct TraceRow {
  int n;
  double t, sigma, mean_abs_u, mean_abs_d;
};

struct SamplerTrace {
  std::vector<TraceRow> rows;
};

// Stream tags for per-step noise derivation.
inline constexpr uint64_t kInitStream = 0x696e6974ull;       // "init"
inline constexpr uint64_t kStepStreamBase = 0x73746570ull;   // "step"

// The relay second-order stochastic sampler. All state lives in the
// patch-DCT basis of the configured blur (patch = 1 means pixel basis,
// which is where stage-1 plain EDM sampling runs).
class Sampler {
 public:
  // When `fresh_correction_noise` is set the correction re-draws its noise
  // instead of reusing the Euler proposal's draw (comparison hook; the
  // reference algorithm reuses the same draw).
  Sampler(int h, int w, ScheduleConfig cfg, bool fresh_correction_noise = false)
      : h_(h), w_(w), cfg_(std::move(cfg)), fresh_noise_(fresh_correction_noise) {
    cfg_.validate();
    if (h_ % cfg_.patch != 0 || w_ % cfg_.patch != 0)
      throw std::invalid_argument("Sampler: patch must divide the field shape");
    t_ = time_grid(cfg_);
    sigma_.resize(t_.size());
    blur_.reserve(t_.size());
    for (size_t i = 0; i < t_.size(); ++i) {
      sigma_[i] = truncated_sigma(t_[i], cfg_);
      blur_.push_back(
          patch_blur_operator(h_, w_, cfg_.patch, blur_schedule(t_[i], cfg_)));
    }
  }

  int steps() const { return cfg_.n_steps; }
  const ScheduleConfig& config() const { return cfg_; }
  const std::vector<double>& t_grid() const { return t_; }
  double sigma_at(int n) const { return sigma_[n]; }
  const BlurOperator& blur_at(int n) const { return blur_[n]; }

  // Algorithm start from pure noise: u_N = V^T x_N, x_N ~ N(0, sigma_N^2 I).
  SamplerState init_pure_noise(RandomSource& rng) const {
    RandomSource s = rng.derive(kInitStream);
    ImageField x = gaussian_field(h_, w_, sigma_.back(), s);
    return make_state(steps(), to_freq(x, blur_.back()));
  }

  // Relay start from the upsampled previous-stage output:
  // u_N = D_N V^T x_up + sigma_N V^T(mixed noise).
  SamplerState init_relay(const ImageField& upsampled, RandomSource& rng) const {
    if (upsampled.height != h_ || upsampled.width != w_)
      throw std::invalid_argument("Sampler: relay init shape mismatch");
    RandomSource s = rng.derive(kInitStream);
    NoiseSpec unit{1.0, cfg_.noise.kernel, cfg_.noise.alpha};
    ImageField noise = mixed_noise(h_, w_, unit, s);
    FreqField u = apply(blur_.back(), to_freq(upsampled, blur_.back()));
    FreqField en = to_freq(noise, blur_.back());
    double sN = sigma_.back();
    for (size_t i = 0; i < u.coeffs.size(); ++i) u.coeffs[i] += sN * en.coeffs[i];
    return make_state(steps(), std::move(u));
  }

  // One first-order step from t_n to t_{n-1} given the prediction u0_hat:
  //   u_{n-1} = (D_{n-1} + g(I - D_n)) u_n + sigma_n (g D_n - D_{n-1}) d_n + dl eps~
  // with d_n = (u_n - u0_hat)/sigma_n, g = sqrt(1-eta^2) sigma_{n-1}/sigma_n,
  // dl = eta sigma_{n-1}.
  SamplerState euler_step(const SamplerState& state, const FreqField& u0_hat,
                          RandomSource& rng) const {
    check_step(state);
    require_same_shape(state.u, u0_hat, "euler_step");
    FreqField d = gradient_term(state, u0_hat);
    FreqField eps = step_noise(rng);
    return apply_update(state, d, eps);
  }

  // Second-order step per the reference algorithm: Euler proposal, then for
  // n != 1 a correction recomputed from u_n with the averaged gradient term
  // and the SAME noise draw.
  SamplerState heun_step(const SamplerState& state, const FreqDenoiser& den,
                         RandomSource& rng, int64_t* nfe = nullptr,
                         double* mean_abs_d = nullptr) const {
    check_step(state);
    FreqField u0_hat = den.estimate_u0(state.u, state.sigma, blur_[state.n]);
    if (nfe) ++*nfe;
    FreqField d_n = gradient_term(state, u0_hat);
    if (mean_abs_d) *mean_abs_d = mean_abs(d_n);
    FreqField eps = step_noise(rng);
    SamplerState proposal = apply_update(state, d_n, eps);
    if (state.n == 1) return proposal;

    FreqField u0_hat2 =
        den.estimate_u0(proposal.u, proposal.sigma, blur_[proposal.n]);
    if (nfe) ++*nfe;
    FreqField d_prime = gradient_term(proposal, u0_hat2);
    for (size_t i = 0; i < d_prime.coeffs.size(); ++i)
      d_prime.coeffs[i] = 0.5 * (d_n.coeffs[i] + d_prime.coeffs[i]);
    if (fresh_noise_) eps = step_noise(rng);
    return apply_update(state, d_prime, eps);
  }

  // Full run. Relay mode starts from `relay_init` (the upsampled previous
  // stage output); otherwise from pure noise.
  std::pair<ImageField, SamplerTrace> run(const FreqDenoiser& den,
                                          const std::optional<ImageField>& relay_init,
                                          RandomSource& rng,
                                          int64_t* nfe = nullptr) const {
    SamplerState state = relay_init ? this->init_relay(*relay_init, rng)
                                    : this->init_pure_noise(rng);
    SamplerTrace trace;
    trace.rows.push_back({state.n, state.t, state.sigma, mean_abs(state.u), 0.0});
    for (int n = steps(); n >= 1; --n) {
      RandomSource step_rng = rng.derive(kStepStreamBase + static_cast<uint64_t>(n));
      double mad = 0.0;
      state = heun_step(state, den, step_rng, nfe, &mad);
      trace.rows.push_back({state.n, state.t, state.sigma, mean_abs(state.u), mad});
    }
    return {to_image(state.u, blur_.front()), std::move(trace)};
  }

  // Exact transition kernel realized with the true u_0 in place of the
  // network prediction (the inductive step of the consistency proof).
  SamplerState oracle_transition(const SamplerState& state, const FreqField& u0,
                                 RandomSource& rng) const {
    check_step(state);
    FreqField d = gradient_term(state, u0);
    // Eq-10 kernel is isotropic Gaussian, not mixed noise.
    FreqField eps(h_, w_);
    double dl = cfg_.eta * sigma_[state.n - 1];
    if (dl > 0.0)
      for (double& v : eps.coeffs) v = rng.next_normal();
    return apply_update(state, d, eps);
  }

  SamplerState sample_forward_marginal(const FreqField& u0, RandomSource& rng) const {
    FreqField u = apply(blur_.back(), u0);
    double sN = sigma_.back();
    for (double& v : u.coeffs) v += sN * rng.next_normal();
    return make_state(steps(), std::move(u));
  }

 private:
  SamplerState make_state(int n, FreqField u) const {
    return SamplerState{n, std::move(u), t_[n], sigma_[n]};
  }

  void check_step(const SamplerState& state) const {
    if (state.n < 1)
      throw std::invalid_argument("Sampler: no step below t_0");
    if (state.n > steps())
      throw std::invalid_argument("Sampler: step index out of range");
    if (state.u.height != h_ || state.u.width != w_)
      throw std::invalid_argument("Sampler: state shape mismatch");
  }

  FreqField gradient_term(const SamplerState& state, const FreqField& u0_hat) const {
    FreqField d = state.u;
    double inv = 1.0 / state.sigma;
    for (size_t i = 0; i < d.coeffs.size(); ++i)
      d.coeffs[i] = (state.u.coeffs[i] - u0_hat.coeffs[i]) * inv;
    return d;
  }

  // Mixed noise transformed into the sampler basis; skipped when eta = 0.
  FreqField step_noise(RandomSource& rng) const {
    if (cfg_.eta == 0.0) return FreqField(h_, w_, 0.0);
    NoiseSpec unit{1.0, cfg_.noise.kernel, cfg_.noise.alpha};
    return to_freq(mixed_noise(h_, w_, unit, rng), blur_.front());
  }

  SamplerState apply_update(const SamplerState& state, const FreqField& d,
                            const FreqField& eps) const {
    int n = state.n;
    double sig_n = sigma_[n], sig_p = sigma_[n - 1];
    double gamma = std::sqrt(1.0 - cfg_.eta * cfg_.eta) * sig_p / sig_n;
#ifdef RDM_MUTATE_GAMMA
    gamma *= 1.01;  // deliberate fault for the mutation check (dev docs)
#endif
    double delta = cfg_.eta * sig_p;
    const BlurOperator& Dn = blur_[n];
    const BlurOperator& Dp = blur_[n - 1];
    FreqField u(h_, w_);
    for (size_t i = 0; i < u.coeffs.size(); ++i) {
      double dn = Dn.decay[i], dp = Dp.decay[i];
      u.coeffs[i] = (dp + gamma * (1.0 - dn)) * state.u.coeffs[i] +
                    sig_n * (gamma * dn - dp) * d.coeffs[i] +
                    delta * eps.coeffs[i];
    }
    return make_state(n - 1, std::move(u));
  }

  static double mean_abs(const FreqField& f) {
    double acc = 0.0;
    for (double v : f.coeffs) acc += std::fabs(v);
    return acc / static_cast<double>(f.coeffs.size());
  }

  int h_, w_;
  ScheduleConfig cfg_;
  bool fresh_noise_;
  std::vector<double> t_;
  std::vector<double> sigma_;
  std::vector<BlurOperator> blur_;
};

// Per-step, per-frequency moments of the oracle-u0 chain against the target
// marginal q(u_n | u_0) = N(D_n u_0, sigma_n^2 I).
struct ConsistencyStep {
  int n = 0;
  double t = 0.0, sigma = 0.0;
  std::vector<double> mean_err_sigmas;  // |mean - D_n u_0| / (sigma_n / sqrt(n_traj))
  std::vector<double> var_ratio;        // empirical var / sigma_n^2
  double max_mean_err_sigmas = 0.0;
  double min_var_ratio = 0.0, max_var_ratio = 0.0;
};

struct ConsistencyReport {
  int n_trajectories = 0;
  std::vector<ConsistencyStep> steps;  // ordered n = N .. 0

  bool pass(double mean_err_limit_sigmas = 3.0, double var_lo = 0.95,
            double var_hi = 1.05) const {
    for (const auto& s : steps) {
      if (s.max_mean_err_sigmas >= mean_err_limit_sigmas) return false;
      if (s.min_var_ratio < var_lo || s.max_var_ratio > var_hi) return false;
    }
    return true;
  }
};

// Monte-Carlo realization of the marginal-consistency induction: draw
// u_N ~ q(u_N | u_0), iterate the exact transition with the true u_0, and
// compare per-step per-frequency moments with the target marginal.
inline ConsistencyReport marginal_consistency_check(const FreqField& u0,
                                                    const ScheduleConfig& cfg,
                                                    int n_trajectories,
                                                    RandomSource& rng) {
  if (n_trajectories < 1000)
    throw std::invalid_argument("marginal_consistency_check: need >= 1e3 trajectories");
  Sampler sampler(u0.height, u0.width, cfg);
  const int N = sampler.steps();
  const size_t m = u0.size();

  // Fixed-size chunks with sequential reduction keep the result independent
  // of the parallelism degree.
  const int chunk = 256;
  const int n_chunks = (n_trajectories + chunk - 1) / chunk;
  std::vector<std::vector<double>> sum(n_chunks), sumsq(n_chunks);
  parallel_for(n_chunks, [&](int64_t ci) {
    std::vector<double>& s = sum[ci];
    std::vector<double>& q = sumsq[ci];
    s.assign(static_cast<size_t>(N + 1) * m, 0.0);
    q.assign(static_cast<size_t>(N + 1) * m, 0.0);
    int lo = static_cast<int>(ci) * chunk;
    int hi = std::min(n_trajectories, lo + chunk);
    for (int traj = lo; traj < hi; ++traj) {
      RandomSource tr = rng.derive(0xc0ffee00ull + static_cast<uint64_t>(traj));
      SamplerState st = sampler.sample_forward_marginal(u0, tr);
      for (int n = N; n >= 0; --n) {
        double* srow = s.data() + static_cast<size_t>(n) * m;
        double* qrow = q.data() + static_cast<size_t>(n) * m;
        for (size_t i = 0; i < m; ++i) {
          srow[i] += st.u.coeffs[i];
          qrow[i] += st.u.coeffs[i] * st.u.coeffs[i];
        }
        if (n > 0) st = sampler.oracle_transition(st, u0, tr);
      }
    }
  });

  ConsistencyReport rep;
  rep.n_trajectories = n_trajectories;
  double inv = 1.0 / n_trajectories;
  for (int n = N; n >= 0; --n) {
    ConsistencyStep cs;
    cs.n = n;
    cs.t = sampler.t_grid()[n];
    cs.sigma = sampler.sigma_at(n);
    cs.mean_err_sigmas.resize(m);
    cs.var_ratio.resize(m);
    const BlurOperator& Dn = sampler.blur_at(n);
    double se = cs.sigma / std::sqrt(static_cast<double>(n_trajectories));
    for (size_t i = 0; i < m; ++i) {
      double s = 0.0, q = 0.0;
      for (int ci = 0; ci < n_chunks; ++ci) {
        s += sum[ci][static_cast<size_t>(n) * m + i];
        q += sumsq[ci][static_cast<size_t>(n) * m + i];
      }
      double mean = s * inv;
      double var = (q * inv - mean * mean) * n_trajectories / (n_trajectories - 1.0);
      double target_mean = Dn.decay[i] * u0.coeffs[i];
      cs.mean_err_sigmas[i] = std::fabs(mean - target_mean) / se;
      cs.var_ratio[i] = var / (cs.sigma * cs.sigma);
    }
    cs.max_mean_err_sigmas =
        *std::max_element(cs.mean_err_sigmas.begin(), cs.mean_err_sigmas.end());
    cs.min_var_ratio = *std::min_element(cs.var_ratio.begin(), cs.var_ratio.end());
    cs.max_var_ratio = *std::max_element(cs.var_ratio.begin(), cs.var_ratio.end());
    rep.steps.push_back(std::move(cs));
  }
  return rep;
}

}  // namespace rdm

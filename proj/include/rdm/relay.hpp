#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdm/conv_denoiser.hpp"
#include "rdm/metrics.hpp"
#include "rdm/parallel.hpp"
#include "rdm/sampler.hpp"
#include "rdm/spectrum.hpp"
#include "rdm/toy.hpp"

namespace rdm {

// Two-stage pipeline configuration. Stage 1 is plain stochastic EDM at low
// resolution (identity blur, iid noise); stage 2 relays from the upsampled
// stage-1 output with patch blur and mixed noise.
struct RelayConfig {
  int low_res = 8;
  int factor = 4;
  ScheduleConfig stage1;
  ScheduleConfig stage2;

  int high_res() const { return low_res * factor; }

  void validate() const {
    if (low_res < 1 || factor < 1)
      throw std::invalid_argument("RelayConfig: low_res and factor must be >= 1");
    stage1.validate();
    stage2.validate();
    if (stage2.patch != factor)
      throw std::invalid_argument("RelayConfig: stage2 patch size must equal factor");
    if (stage1.patch != 1)
      throw std::invalid_argument("RelayConfig: stage1 must use identity blur (patch 1)");
    if (stage1.noise.alpha != 0.0)
      throw std::invalid_argument("RelayConfig: stage1 must use iid noise (alpha 0)");
  }
};

inline int64_t heun_nfe(int steps) { return 2 * static_cast<int64_t>(steps) - 1; }

// Effective NFE under the paper-style costing rule: stage-1 evaluations count
// at 1/10 weight (rounded up), stage-2 at full weight.
inline int64_t effective_nfe(int stage1_steps, int stage2_steps) {
  return heun_nfe(stage2_steps) + (heun_nfe(stage1_steps) + 9) / 10;
}

struct RelayResult {
  ImageField image;        // high-res output
  ImageField stage1_image; // low-res output
  SamplerTrace trace1, trace2;
  int64_t nfe1 = 0, nfe2 = 0;
};

inline RelayResult run_relay(const RelayConfig& cfg, const FreqDenoiser& d1,
                             const FreqDenoiser& d2, RandomSource& rng) {
  cfg.validate();
  RelayResult out;
  Sampler s1(cfg.low_res, cfg.low_res, cfg.stage1);
  RandomSource r1 = rng.derive(0x72656c617931ull);  // "relay1"
  auto [x1, t1] = s1.run(d1, std::nullopt, r1, &out.nfe1);
  out.stage1_image = std::move(x1);
  out.trace1 = std::move(t1);

  ImageField up = upsample_nearest(out.stage1_image, cfg.factor);
  Sampler s2(cfg.high_res(), cfg.high_res(), cfg.stage2);
  RandomSource r2 = rng.derive(0x72656c617932ull);  // "relay2"
  auto [x2, t2] = s2.run(d2, up, r2, &out.nfe2);
  out.image = std::move(x2);
  out.trace2 = std::move(t2);
  return out;
}

// Deterministic corpus generation: one derived stream per sample index.
inline std::vector<ImageField> relay_corpus(const RelayConfig& cfg,
                                            const FreqDenoiser& d1,
                                            const FreqDenoiser& d2, int n_samples,
                                            const RandomSource& rng) {
  std::vector<ImageField> out(n_samples);
  parallel_for(n_samples, [&](int64_t i) {
    RandomSource r = rng.derive(0x636f72707573ull + static_cast<uint64_t>(i));
    out[i] = run_relay(cfg, d1, d2, r).image;
  });
  return out;
}

struct EtaSweepRow {
  double eta = 0.0;
  std::string mode;  // "ODE" for eta = 0, else "SDE"
  QualityReport quality;
};

// Grid default mirrors the stochasticity ablation.
inline const std::vector<double>& default_eta_grid() {
  static const std::vector<double> g = {0.0, 0.10, 0.15, 0.20, 0.25, 0.30, 0.40, 0.50};
  return g;
}

inline std::vector<EtaSweepRow> eta_sweep(const RelayConfig& cfg,
                                          const std::vector<double>& etas,
                                          const FreqDenoiser& d1,
                                          const FreqDenoiser& d2,
                                          const std::vector<ImageField>& reference,
                                          int n_samples, const RandomSource& rng) {
  std::vector<EtaSweepRow> rows;
  for (double eta : etas) {
    RelayConfig c = cfg;
    c.stage2.eta = eta;
    std::vector<ImageField> gen =
        relay_corpus(c, d1, d2, n_samples, rng.derive(0x657461ull));
    EtaSweepRow row;
    row.eta = eta;
    row.mode = eta == 0.0 ? "ODE" : "SDE";
    row.quality = compute_quality(gen, reference);
    rows.push_back(std::move(row));
  }
  return rows;
}

struct NfeAllocation {
  int stage1_steps = 0;
  int stage2_steps = 0;
  int64_t effective = 0;
};

struct NfeSweepRow {
  NfeAllocation alloc;
  QualityReport quality;
};

// Three allocation strategies n in {1, 3, 5} at a fixed effective budget E:
// stage-1 steps 5n (physical evals 10n-1, cost n after the 1/10 rule),
// stage-2 steps (E-n+1)/2 (physical evals E-n). E must be even.
inline std::vector<NfeAllocation> nfe_allocations(int effective_budget) {
  if (effective_budget < 8 || effective_budget % 2 != 0)
    throw std::invalid_argument("nfe_allocations: budget must be even and >= 8");
  std::vector<NfeAllocation> out;
  for (int n : {1, 3, 5}) {
    NfeAllocation a;
    a.stage1_steps = 5 * n;
    a.stage2_steps = (effective_budget - n + 1) / 2;
    a.effective = effective_nfe(a.stage1_steps, a.stage2_steps);
    out.push_back(a);
  }
  return out;
}

inline std::vector<NfeSweepRow> nfe_sweep(const RelayConfig& cfg,
                                          const std::vector<NfeAllocation>& grid,
                                          const FreqDenoiser& d1,
                                          const FreqDenoiser& d2,
                                          const std::vector<ImageField>& reference,
                                          int n_samples, const RandomSource& rng) {
  std::vector<NfeSweepRow> rows;
  for (const NfeAllocation& a : grid) {
    RelayConfig c = cfg;
    c.stage1.n_steps = a.stage1_steps;
    c.stage2.n_steps = a.stage2_steps;
    std::vector<ImageField> gen =
        relay_corpus(c, d1, d2, n_samples, rng.derive(0x6e6665ull));
    rows.push_back({a, compute_quality(gen, reference)});
  }
  return rows;
}

struct TrainLogRow {
  int epoch = 0;
  double mean_loss = 0.0;
};

struct TrainResult {
  ConvDenoiserParams initial;  // parameters before the first update
  ConvDenoiserParams params;
  std::vector<TrainLogRow> log;
};

// Plain SGD on rdm_loss with t ~ U(0, 1), fixed learning rate. Loss rows are
// per-epoch means; a NaN loss aborts with a diagnostic.
inline TrainResult train_toy(const ToyDataset& data, const ScheduleConfig& cfg,
                             int epochs, int steps_per_epoch, double lr,
                             int channels, RandomSource& rng) {
  if (epochs < 1 || steps_per_epoch < 1)
    throw std::invalid_argument("train_toy: epochs and steps must be >= 1");
  RandomSource init_rng = rng.derive(0x696e6974ull);
  TrainResult out;
  out.params = ConvDenoiserParams::init(channels, 0, cfg.sigma_data, init_rng);
  out.initial = out.params;
  int64_t step = 0;
  for (int e = 0; e < epochs; ++e) {
    double acc = 0.0;
    for (int s = 0; s < steps_per_epoch; ++s, ++step) {
      RandomSource sr = rng.derive(0x737465700000ull + static_cast<uint64_t>(step));
      ImageField x = data.sample(sr);
      double t = sr.next_uniform();
      RandomSource cr = sr.derive(0x636f7272ull);
      LossAndGrad lg = rdm_loss_grad(out.params, x, t, cfg, cr);
      if (!std::isfinite(lg.loss))
        throw std::runtime_error("train_toy: loss diverged (NaN/Inf) at step " +
                                 std::to_string(step));
      acc += lg.loss;
      out.params.axpy(-lr, lg.grad);
    }
    out.log.push_back({e, acc / steps_per_epoch});
  }
  return out;
}

}  // namespace rdm

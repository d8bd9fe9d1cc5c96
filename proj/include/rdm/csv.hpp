#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdm/relay.hpp"
#include "rdm/sampler.hpp"
#include "rdm/spectrum.hpp"

namespace rdm {

// Deterministic number formatting (classic locale semantics of snprintf with
// %g/%f on doubles). Curves use plain decimal notation; everything else uses
// shortest-roundtrip %.17g.
inline std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string fmt_f(double v, int prec = 12) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_text_file: cannot open " + path);
  out << body;
  if (!out) throw std::runtime_error("write_text_file: write failed for " + path);
}

inline std::string spectrum_csv(const SpectrumCurve& c) {
  std::string s = "freq,power\n";
  for (int b = 0; b < c.bins(); ++b)
    s += fmt_f(c.freq[b]) + "," + fmt_f(c.power[b]) + "\n";
  return s;
}

struct CovarianceRow {
  int dx = 0, dy = 0;
  double analytic = 0.0, empirical = 0.0, stderr_ = 0.0;
};

inline std::string covariance_csv(const std::vector<CovarianceRow>& rows) {
  std::string s = "dx,dy,analytic,empirical,stderr\n";
  for (const auto& r : rows)
    s += std::to_string(r.dx) + "," + std::to_string(r.dy) + "," +
         fmt_g(r.analytic) + "," + fmt_g(r.empirical) + "," + fmt_g(r.stderr_) + "\n";
  return s;
}

inline std::string schedule_csv(const ScheduleConfig& cfg, int n_rows = 101) {
  std::string s = "t,sigma,sigma_trunc,tau\n";
  for (int i = 0; i < n_rows; ++i) {
    double t = cfg.t_min + (1.0 - 2.0 * cfg.t_min) * i / (n_rows - 1);
    s += fmt_g(t) + "," + fmt_g(sigma_schedule(t, cfg)) + "," +
         fmt_g(truncated_sigma(t, cfg)) + "," + fmt_g(blur_schedule(t, cfg)) + "\n";
  }
  return s;
}

inline std::string trace_csv(const SamplerTrace& trace) {
  std::string s = "n,t,sigma,mean_abs_u,mean_abs_d\n";
  for (const auto& r : trace.rows)
    s += std::to_string(r.n) + "," + fmt_g(r.t) + "," + fmt_g(r.sigma) + "," +
         fmt_g(r.mean_abs_u) + "," + fmt_g(r.mean_abs_d) + "\n";
  return s;
}

// Consistency report rows binned over frequency magnitude; the pass/fail
// logic itself stays per-frequency.
inline std::string consistency_csv(const ConsistencyReport& rep, int h, int w,
                                   int n_bins) {
  std::string s = "n,freq_bin,mean_err_sigmas,var_ratio\n";
  for (const auto& step : rep.steps) {
    std::vector<double> me(n_bins, 0.0), vr(n_bins, 0.0);
    std::vector<int64_t> cnt(n_bins, 0);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        int b = freq_bin(i, j, h, w, n_bins);
        size_t idx = static_cast<size_t>(i) * w + j;
        me[b] += step.mean_err_sigmas[idx];
        vr[b] += step.var_ratio[idx];
        cnt[b]++;
      }
    for (int b = 0; b < n_bins; ++b) {
      if (cnt[b] == 0) continue;
      s += std::to_string(step.n) + "," + std::to_string(b) + "," +
           fmt_g(me[b] / cnt[b]) + "," + fmt_g(vr[b] / cnt[b]) + "\n";
    }
  }
  return s;
}

inline std::string eta_sweep_csv(const std::vector<EtaSweepRow>& rows) {
  std::string s = "eta,mode,spectral_distance,mean_error,var_error\n";
  for (const auto& r : rows)
    s += fmt_g(r.eta) + "," + r.mode + "," + fmt_g(r.quality.spectral_distance) +
         "," + fmt_g(r.quality.mean_error) + "," + fmt_g(r.quality.var_error) + "\n";
  return s;
}

inline std::string nfe_sweep_csv(const std::vector<NfeSweepRow>& rows) {
  std::string s =
      "stage1_steps,stage2_steps,effective_nfe,spectral_distance,mean_error,var_error\n";
  for (const auto& r : rows)
    s += std::to_string(r.alloc.stage1_steps) + "," +
         std::to_string(r.alloc.stage2_steps) + "," +
         std::to_string(r.alloc.effective) + "," +
         fmt_g(r.quality.spectral_distance) + "," + fmt_g(r.quality.mean_error) +
         "," + fmt_g(r.quality.var_error) + "\n";
  return s;
}

inline std::string train_log_csv(const std::vector<TrainLogRow>& rows) {
  std::string s = "epoch,mean_loss\n";
  for (const auto& r : rows)
    s += std::to_string(r.epoch) + "," + fmt_g(r.mean_loss) + "\n";
  return s;
}

}  // namespace rdm

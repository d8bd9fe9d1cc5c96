#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "rdm/noise.hpp"

namespace rdm {

// Standard normal quantile. Acklam's rational approximation (|rel err| <
// 1.15e-9) refined by one Halley step against Phi computed from erfc, which
// lands within a few ulp of the exact value. The upper half maps to the
// lower tail by symmetry: there erfc keeps full relative precision, so the
// residual Phi(x) - p never cancels below the working precision.
inline double normal_quantile(double p);

namespace detail {

inline double normal_quantile_lower(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  // Halley refinement: e = Phi(x) - p, u = e / phi(x).
  double e = 0.5 * std::erfc(-x / 1.41421356237309504880) - p;
  double u = e * 2.50662827463100050242 * std::exp(x * x / 2.0);
  x = x - u / (1.0 + x * u / 2.0);
  return x;
}

}  // namespace detail

inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("normal_quantile: p must lie in (0, 1)");
  return p <= 0.5 ? detail::normal_quantile_lower(p)
                  : -detail::normal_quantile_lower(1.0 - p);
}

// All schedule parameters for one diffusion stage.
struct ScheduleConfig {
  double p_mean = -1.2;       // mean of ln(sigma)
  double p_std = 1.2;         // std of ln(sigma)
  double t_s = 1.0;           // truncation start, (0, 1]
  double sigma_b_max = 0.0;   // terminal blur scale
  int n_steps = 40;           // sampler step count N
  double eta = 0.0;           // sampler stochasticity, [0, 1)
  NoiseSpec noise;            // kernel s and alpha for mixed noise
  int patch = 1;              // patch size k of the blurring operator
  double t_min = 1e-3;        // grid floor, keeps sigma away from 0
  double grid_power = 1.0;    // grid stretching exponent; 1 = uniform in t
  double sigma_data = 0.5;    // data std for preconditioning

  void validate() const {
    if (p_std <= 0.0) throw std::invalid_argument("ScheduleConfig: p_std must be > 0");
    if (!(t_s > 0.0 && t_s <= 1.0))
      throw std::invalid_argument("ScheduleConfig: t_s must lie in (0, 1]");
    if (!(eta >= 0.0 && eta < 1.0))
      throw std::invalid_argument("ScheduleConfig: eta must lie in [0, 1)");
    if (n_steps < 1) throw std::invalid_argument("ScheduleConfig: n_steps must be >= 1");
    if (patch < 1) throw std::invalid_argument("ScheduleConfig: patch must be >= 1");
    if (sigma_b_max < 0.0)
      throw std::invalid_argument("ScheduleConfig: sigma_b_max must be >= 0");
    if (!(t_min > 0.0 && t_min < 0.5))
      throw std::invalid_argument("ScheduleConfig: t_min must lie in (0, 0.5)");
    if (grid_power <= 0.0)
      throw std::invalid_argument("ScheduleConfig: grid_power must be > 0");
  }
};

// sigma(t) = exp(Phi^-1(t) * P_std + P_mean), the log-normal quantile schedule.
inline double sigma_schedule(double t, const ScheduleConfig& cfg) {
  if (!(t > 0.0 && t < 1.0))
    throw std::invalid_argument("sigma_schedule: t must lie in (0, 1)");
  return std::exp(normal_quantile(t) * cfg.p_std + cfg.p_mean);
}

// Truncated schedule sigma'(t) = sigma(t_s * t): the uniform CDF is the
// identity on [0, 1], so the nested-CDF form collapses to a rescaling of t.
inline double truncated_sigma(double t, const ScheduleConfig& cfg) {
  if (!(t > 0.0 && t <= 1.0))
    throw std::invalid_argument("truncated_sigma: t must lie in (0, 1]");
  return sigma_schedule(cfg.t_s * t, cfg);
}

// Blur dissipation time tau_t = sigma_B,t^2 / 2 with
// sigma_B,t = sigma_B,max * sin^2(t*pi/2).
inline double blur_schedule(double t, const ScheduleConfig& cfg) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("blur_schedule: t must lie in [0, 1]");
  double s = std::sin(t * 3.14159265358979323846 / 2.0);
  double sb = cfg.sigma_b_max * s * s;
  return sb * sb / 2.0;
}

// Ascending sampler grid t_0 .. t_N. Uniform over [t_min, t_top] for
// grid_power = 1; the top point is capped so sigma'(t_top) stays finite when
// t_s -> 1 (t_s * t_top <= 1 - t_min).
inline std::vector<double> time_grid(const ScheduleConfig& cfg) {
  cfg.validate();
  double t_top = cfg.t_s <= 1.0 - cfg.t_min ? 1.0 : (1.0 - cfg.t_min) / cfg.t_s;
  std::vector<double> t(cfg.n_steps + 1);
  for (int i = 0; i <= cfg.n_steps; ++i)
    t[i] = cfg.t_min + (t_top - cfg.t_min) *
                           std::pow(static_cast<double>(i) / cfg.n_steps, cfg.grid_power);
  return t;
}

}  // namespace rdm

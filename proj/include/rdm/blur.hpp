#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "rdm/dct.hpp"
#include "rdm/field.hpp"
#include "rdm/noise.hpp"
#include "rdm/schedule.hpp"

namespace rdm {

// Diagonal per-frequency decay operator. patch = k means the diagonal lives
// in the per-patch DCT basis (entry (i, j) acts on within-patch frequency
// (i mod k, j mod k)); patch = 0 means the whole-image DCT basis.
struct BlurOperator {
  int height = 0;
  int width = 0;
  int patch = 1;
  std::vector<double> decay;

  double at(int i, int j) const { return decay[static_cast<size_t>(i) * width + j]; }
};

// Lambda(i, j) = -pi^2 (i^2/H^2 + j^2/W^2), the heat-dissipation spectrum of
// the whole-image DCT basis.
inline std::vector<double> lambda_matrix(int h, int w) {
  if (h < 1 || w < 1) throw std::invalid_argument("lambda_matrix: bad shape");
  const double pi2 = 9.86960440108935861883;
  std::vector<double> lam(static_cast<size_t>(h) * w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      lam[static_cast<size_t>(i) * w + j] =
          -pi2 * (static_cast<double>(i) * i / (static_cast<double>(h) * h) +
                  static_cast<double>(j) * j / (static_cast<double>(w) * w));
  return lam;
}

// Patch-wise blurring matrix: decay(i, j) = exp(-pi^2 ((i mod k)^2 +
// (j mod k)^2) / k^2 * tau), identical for every patch.
inline BlurOperator patch_blur_operator(int h, int w, int k, double tau) {
  if (k < 1 || h % k != 0 || w % k != 0)
    throw std::invalid_argument("patch_blur_operator: patch size must divide both dimensions");
  if (tau < 0.0) throw std::invalid_argument("patch_blur_operator: tau must be >= 0");
  BlurOperator op{h, w, k, std::vector<double>(static_cast<size_t>(h) * w)};
  const double pi2 = 9.86960440108935861883;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      int a = i % k, b = j % k;
      op.decay[static_cast<size_t>(i) * w + j] =
          std::exp(-pi2 * (a * a + b * b) / (static_cast<double>(k) * k) * tau);
    }
  return op;
}

// D_t = exp(Lambda * tau) over the whole-image DCT basis.
inline BlurOperator global_blur_operator(int h, int w, double tau) {
  if (tau < 0.0) throw std::invalid_argument("global_blur_operator: tau must be >= 0");
  BlurOperator op{h, w, 0, lambda_matrix(h, w)};
  for (double& d : op.decay) d = std::exp(d * tau);
  return op;
}

inline BlurOperator identity_blur(int h, int w) {
  return BlurOperator{h, w, 1, std::vector<double>(static_cast<size_t>(h) * w, 1.0)};
}

inline bool is_identity(const BlurOperator& op) {
  for (double d : op.decay)
    if (d != 1.0) return false;
  return true;
}

// Transform in and out of the operator's frequency basis.
inline FreqField to_freq(const ImageField& img, const BlurOperator& op) {
  return op.patch == 0 ? dct2(img) : patch_dct2(img, op.patch);
}

inline ImageField to_image(const FreqField& f, const BlurOperator& op) {
  return op.patch == 0 ? idct2(f) : patch_idct2(f, op.patch);
}

inline FreqField apply(const BlurOperator& op, const FreqField& f) {
  if (op.height != f.height || op.width != f.width)
    throw std::invalid_argument("BlurOperator: shape mismatch");
  FreqField out = f;
  for (size_t i = 0; i < out.coeffs.size(); ++i) out.coeffs[i] *= op.decay[i];
  return out;
}

inline ImageField apply_to_image(const BlurOperator& op, const ImageField& img) {
  return to_image(apply(op, to_freq(img, op)), op);
}

// Forward corruption of Eq-style training: blur in the patch-DCT domain,
// then add mixed noise at sigma'(t) in pixel space. t below the grid floor
// clamps to t_min.
inline ImageField forward_corrupt(const ImageField& x, double t,
                                  const ScheduleConfig& cfg, RandomSource& rng) {
  require_finite(x, "forward_corrupt");
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("forward_corrupt: t must lie in [0, 1]");
  double tc = t < cfg.t_min ? cfg.t_min : t;
  double sigma = truncated_sigma(tc, cfg);
  BlurOperator op = patch_blur_operator(x.height, x.width, cfg.patch, blur_schedule(t, cfg));
  ImageField out = apply_to_image(op, x);
  NoiseSpec spec{sigma, cfg.noise.kernel, cfg.noise.alpha};
  ImageField noise = mixed_noise(x.height, x.width, spec, rng);
  for (size_t i = 0; i < out.values.size(); ++i) out.values[i] += noise.values[i];
  return out;
}

}  // namespace rdm

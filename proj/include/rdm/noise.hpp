#pragma once

#include <cmath>
#include <stdexcept>

#include "rdm/field.hpp"
#include "rdm/rng.hpp"

namespace rdm {

struct NoiseSpec {
  double sigma = 1.0;  // marginal standard deviation
  int kernel = 1;      // block kernel size s
  double alpha = 0.0;  // block-noise mixing weight
};

// Substream tags used by mixed_noise; fixed so that the alpha = 0 path is
// bitwise identical to gaussian_field on the derived iid stream.
inline constexpr uint64_t kMixIidStream = 0x6d69782d696964ull;    // "mix-iid"
inline constexpr uint64_t kMixBlockStream = 0x6d69782d626c6bull;  // "mix-blk"

inline ImageField gaussian_field(int h, int w, double sigma, RandomSource& rng) {
  if (sigma <= 0.0) throw std::invalid_argument("gaussian_field: sigma must be > 0");
  ImageField f(h, w);
  for (double& v : f.values) v = sigma * rng.next_normal();
  return f;
}

// Block[s]: windowed average of an iid field with toroidal wraparound,
// out(i, j) = (1/s) * sum_{a,b < s} eps((i-a) mod h, (j-b) mod w).
// Marginal variance equals the variance of eps.
inline ImageField block_noise_from(const ImageField& eps, int kernel) {
  if (kernel < 1 || kernel > eps.height || kernel > eps.width)
    throw std::invalid_argument("block_noise_from: kernel must be in [1, min(h, w)]");
  if (kernel == 1) return eps;
  ImageField out(eps.height, eps.width);
  double inv = 1.0 / kernel;
  for (int i = 0; i < eps.height; ++i)
    for (int j = 0; j < eps.width; ++j) {
      double acc = 0.0;
      for (int a = 0; a < kernel; ++a) {
        int ii = i - a;
        if (ii < 0) ii += eps.height;
        for (int b = 0; b < kernel; ++b) {
          int jj = j - b;
          if (jj < 0) jj += eps.width;
          acc += eps.at(ii, jj);
        }
      }
      out.at(i, j) = acc * inv;
    }
  return out;
}

inline ImageField block_noise(int h, int w, const NoiseSpec& spec, RandomSource& rng) {
  if (spec.kernel > h || spec.kernel > w)
    throw std::invalid_argument("block_noise: kernel exceeds field size");
  ImageField eps = gaussian_field(h, w, spec.sigma, rng);
  return block_noise_from(eps, spec.kernel);
}

// Analytic covariance of block noise at a toroidal offset:
// (sigma^2/s^2) * max(0, s - dis(dx)) * max(0, s - dis(dy)), with
// dis(d) = min(|d|, axis - |d|). dx runs along the width, dy along the height.
inline double block_covariance_oracle(int offset_x, int offset_y,
                                      const NoiseSpec& spec, int h, int w) {
  auto tor = [](int d, int axis) {
    int m = ((d % axis) + axis) % axis;
    return m < axis - m ? m : axis - m;
  };
  double s = static_cast<double>(spec.kernel);
  double ox = std::max(0.0, s - tor(offset_x, w));
  double oy = std::max(0.0, s - tor(offset_y, h));
  return spec.sigma * spec.sigma / (s * s) * ox * oy;
}

// Eq-style mixture (eps + alpha * Block[s](eps')) / sqrt(1 + alpha^2); the
// normalizer keeps the marginal variance at sigma^2. eps and eps' come from
// independent derived streams so the alpha = 0 case reduces bitwise to
// gaussian_field on rng.derive(kMixIidStream).
inline ImageField mixed_noise(int h, int w, const NoiseSpec& spec, RandomSource& rng) {
  RandomSource iid = rng.derive(kMixIidStream);
  ImageField e = gaussian_field(h, w, spec.sigma, iid);
  if (spec.alpha == 0.0) return e;
  RandomSource blk = rng.derive(kMixBlockStream);
  ImageField b = block_noise(h, w, spec, blk);
  double norm = 1.0 / std::sqrt(1.0 + spec.alpha * spec.alpha);
  for (size_t i = 0; i < e.values.size(); ++i)
    e.values[i] = (e.values[i] + spec.alpha * b.values[i]) * norm;
  return e;
}

}  // namespace rdm

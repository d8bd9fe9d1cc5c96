#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rdm/dct.hpp"
#include "rdm/field.hpp"

namespace rdm {

// 1-D radially binned curve over [0, pi*sqrt(2)]. Bins are uniform; each
// coefficient (i, j) is assigned by its frequency sqrt(fi^2 + fj^2) with the
// per-axis normalization fi = pi*i/H, fj = pi*j/W.
struct SpectrumCurve {
  std::vector<double> freq;    // bin centers, strictly increasing
  std::vector<double> power;   // per-bin mean
  std::vector<int64_t> count;  // coefficients per bin (0 = empty bin)

  int bins() const { return static_cast<int>(freq.size()); }
};

inline constexpr double kFreqMax = 4.44288293815836624702;  // pi*sqrt(2)

inline int freq_bin(int i, int j, int h, int w, int n_bins) {
  const double pi = 3.14159265358979323846;
  double f = std::hypot(pi * i / h, pi * j / w);
  int b = static_cast<int>(f / kFreqMax * n_bins);
  return b >= n_bins ? n_bins - 1 : b;
}

inline SpectrumCurve make_curve(int n_bins) {
  SpectrumCurve c;
  c.freq.resize(n_bins);
  c.power.assign(n_bins, 0.0);
  c.count.assign(n_bins, 0);
  for (int b = 0; b < n_bins; ++b) c.freq[b] = (b + 0.5) * kFreqMax / n_bins;
  return c;
}

// Power spectral density: squared DCT coefficients, bin-averaged.
inline SpectrumCurve psd_curve(const FreqField& f, int n_bins) {
  if (n_bins < 1) throw std::invalid_argument("psd_curve: n_bins must be >= 1");
  require_finite(f, "psd_curve");
  SpectrumCurve c = make_curve(n_bins);
  for (int i = 0; i < f.height; ++i)
    for (int j = 0; j < f.width; ++j) {
      int b = freq_bin(i, j, f.height, f.width, n_bins);
      double v = f.at(i, j);
      c.power[b] += v * v;
      c.count[b]++;
    }
  for (int b = 0; b < n_bins; ++b)
    if (c.count[b] > 0) c.power[b] /= static_cast<double>(c.count[b]);
  return c;
}

// Per-coefficient |signal| / |noise|, bin-averaged. Zero-noise coefficients
// contribute `cap` and are counted through `capped` when given.
inline SpectrumCurve snr_curve(const FreqField& signal, const FreqField& noise,
                               int n_bins, int64_t* capped = nullptr,
                               double cap = 1e12) {
  if (n_bins < 1) throw std::invalid_argument("snr_curve: n_bins must be >= 1");
  require_same_shape(signal, noise, "snr_curve");
  require_finite(signal, "snr_curve");
  require_finite(noise, "snr_curve");
  SpectrumCurve c = make_curve(n_bins);
  int64_t ncap = 0;
  for (int i = 0; i < signal.height; ++i)
    for (int j = 0; j < signal.width; ++j) {
      int b = freq_bin(i, j, signal.height, signal.width, n_bins);
      double n = std::fabs(noise.at(i, j));
      double r;
      if (n == 0.0) {
        r = cap;
        ++ncap;
      } else {
        r = std::fabs(signal.at(i, j)) / n;
        if (r > cap) r = cap;
      }
      c.power[b] += r;
      c.count[b]++;
    }
  for (int b = 0; b < n_bins; ++b)
    if (c.count[b] > 0) c.power[b] /= static_cast<double>(c.count[b]);
  if (capped) *capped = ncap;
  return c;
}

inline ImageField upsample_nearest(const ImageField& img, int factor) {
  if (factor < 1) throw std::invalid_argument("upsample_nearest: factor must be >= 1");
  if (factor == 1) return img;
  ImageField out(img.height * factor, img.width * factor);
  for (int i = 0; i < out.height; ++i)
    for (int j = 0; j < out.width; ++j)
      out.at(i, j) = img.at(i / factor, j / factor);
  return out;
}

// Block-mean reduction, the left inverse of upsample_nearest.
inline ImageField downsample_mean(const ImageField& img, int factor) {
  if (factor < 1 || img.height % factor != 0 || img.width % factor != 0)
    throw std::invalid_argument("downsample_mean: factor must divide both dimensions");
  if (factor == 1) return img;
  ImageField out(img.height / factor, img.width / factor);
  double inv = 1.0 / (static_cast<double>(factor) * factor);
  for (int i = 0; i < img.height; ++i)
    for (int j = 0; j < img.width; ++j)
      out.at(i / factor, j / factor) += img.at(i, j) * inv;
  return out;
}

}  // namespace rdm

#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rdm/dct.hpp"
#include "rdm/field.hpp"
#include "rdm/spectrum.hpp"

namespace rdm {

// Proxy quality metrics for comparing a generated corpus against a reference
// corpus. These stand in for FID-style scores: spectral_distance is the mean
// absolute log gap between mean PSD curves, mean/var errors compare pooled
// pixel moments. All metrics are >= 0 and vanish for identical corpora.
struct QualityReport {
  double spectral_distance = 0.0;
  double mean_error = 0.0;
  double var_error = 0.0;
  std::map<int, int> class_counts;  // filled when generation was conditioned
};

inline SpectrumCurve mean_psd(const std::vector<ImageField>& corpus, int n_bins) {
  if (corpus.empty()) throw std::invalid_argument("mean_psd: empty corpus");
  SpectrumCurve acc = make_curve(n_bins);
  for (const ImageField& img : corpus) {
    SpectrumCurve c = psd_curve(dct2(img), n_bins);
    for (int b = 0; b < n_bins; ++b) {
      acc.power[b] += c.power[b];
      acc.count[b] = c.count[b];
    }
  }
  for (int b = 0; b < n_bins; ++b) acc.power[b] /= static_cast<double>(corpus.size());
  return acc;
}

inline void pooled_moments(const std::vector<ImageField>& corpus, double* mean,
                           double* var) {
  double s = 0.0, q = 0.0;
  size_t n = 0;
  for (const ImageField& img : corpus) {
    for (double v : img.values) {
      s += v;
      q += v * v;
    }
    n += img.values.size();
  }
  *mean = s / static_cast<double>(n);
  *var = q / static_cast<double>(n) - *mean * *mean;
}

inline QualityReport compute_quality(const std::vector<ImageField>& generated,
                                     const std::vector<ImageField>& reference,
                                     int n_bins = 32) {
  if (generated.empty() || reference.empty())
    throw std::invalid_argument("compute_quality: empty corpus");
  QualityReport r;
  SpectrumCurve pg = mean_psd(generated, n_bins);
  SpectrumCurve pr = mean_psd(reference, n_bins);
  double acc = 0.0;
  int used = 0;
  for (int b = 0; b < n_bins; ++b) {
    if (pg.count[b] == 0 || pr.count[b] == 0) continue;
    if (pg.power[b] <= 0.0 || pr.power[b] <= 0.0) continue;
    acc += std::fabs(std::log(pg.power[b] / pr.power[b]));
    ++used;
  }
  r.spectral_distance = used > 0 ? acc / used : 0.0;

  double mg, vg, mr, vr;
  pooled_moments(generated, &mg, &vg);
  pooled_moments(reference, &mr, &vr);
  r.mean_error = std::fabs(mg - mr);
  r.var_error = vr > 0.0 ? std::fabs(vg - vr) / vr : std::fabs(vg - vr);
  return r;
}

}  // namespace rdm

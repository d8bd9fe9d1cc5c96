#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "rdm/field.hpp"

namespace rdm {

// Orthonormal type-II DCT. Direct separable O(n^2) kernels with cached
// cosine tables; sizes are desk scale (<= 512) so no fast path is needed.
class DctPlan {
 public:
  explicit DctPlan(int n) : n_(n), tab_(static_cast<size_t>(n) * n) {
    const double pi = 3.14159265358979323846;
    for (int k = 0; k < n; ++k) {
      double ck = std::sqrt((k == 0 ? 1.0 : 2.0) / n);
      for (int j = 0; j < n; ++j)
        tab_[static_cast<size_t>(k) * n + j] =
            ck * std::cos(pi * k * (2.0 * j + 1.0) / (2.0 * n));
    }
  }

  int size() const { return n_; }

  // out[k] = sum_j tab[k][j] * in[j]
  void forward(const double* in, int in_stride, double* out, int out_stride) const {
    for (int k = 0; k < n_; ++k) {
      const double* row = tab_.data() + static_cast<size_t>(k) * n_;
      double acc = 0.0;
      for (int j = 0; j < n_; ++j) acc += row[j] * in[static_cast<size_t>(j) * in_stride];
      out[static_cast<size_t>(k) * out_stride] = acc;
    }
  }

  // Inverse = transpose (the transform is orthonormal).
  void inverse(const double* in, int in_stride, double* out, int out_stride) const {
    for (int j = 0; j < n_; ++j) out[static_cast<size_t>(j) * out_stride] = 0.0;
    for (int k = 0; k < n_; ++k) {
      const double* row = tab_.data() + static_cast<size_t>(k) * n_;
      double c = in[static_cast<size_t>(k) * in_stride];
      for (int j = 0; j < n_; ++j) out[static_cast<size_t>(j) * out_stride] += row[j] * c;
    }
  }

 private:
  int n_;
  std::vector<double> tab_;
};

inline const DctPlan& dct_plan(int n) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<DctPlan>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end())
    it = cache.emplace(n, std::make_unique<DctPlan>(n)).first;
  return *it->second;
}

namespace detail {

// Separable 2-D pass over a h x w block starting at `base` inside a grid of
// row stride `pitch`. forward=false runs the inverse transform.
inline void dct2_block(const double* in, double* out, int h, int w, int pitch,
                       bool forward) {
  const DctPlan& prow = dct_plan(w);
  const DctPlan& pcol = dct_plan(h);
  std::vector<double> tmp(static_cast<size_t>(h) * w);
  for (int i = 0; i < h; ++i) {
    const double* src = in + static_cast<size_t>(i) * pitch;
    double* dst = tmp.data() + static_cast<size_t>(i) * w;
    forward ? prow.forward(src, 1, dst, 1) : prow.inverse(src, 1, dst, 1);
  }
  std::vector<double> col(h);
  for (int j = 0; j < w; ++j) {
    const double* src = tmp.data() + j;
    double* dst = col.data();
    forward ? pcol.forward(src, w, dst, 1) : pcol.inverse(src, w, dst, 1);
    for (int i = 0; i < h; ++i) out[static_cast<size_t>(i) * pitch + j] = col[i];
  }
}

}  // namespace detail

// Whole-image orthonormal 2-D DCT-II.
inline FreqField dct2(const ImageField& img) {
  require_finite(img, "dct2");
  FreqField f(img.height, img.width);
  detail::dct2_block(img.values.data(), f.coeffs.data(), img.height, img.width,
                     img.width, true);
  return f;
}

inline ImageField idct2(const FreqField& freq) {
  require_finite(freq, "idct2");
  ImageField img(freq.height, freq.width);
  detail::dct2_block(freq.coeffs.data(), img.values.data(), freq.height,
                     freq.width, freq.width, false);
  return img;
}

// Per-patch DCT: the image is split into k x k patches and each patch is
// transformed independently. Coefficient (i, j) holds within-patch frequency
// (i mod k, j mod k) of patch (i/k, j/k). k = 1 is the identity transform.
inline FreqField patch_dct2(const ImageField& img, int k) {
  require_finite(img, "patch_dct2");
  if (k < 1 || img.height % k != 0 || img.width % k != 0)
    throw std::invalid_argument("patch_dct2: patch size must divide both dimensions");
  FreqField f(img.height, img.width);
  if (k == 1) {
    f.coeffs = img.values;
    return f;
  }
  for (int pi = 0; pi < img.height; pi += k)
    for (int pj = 0; pj < img.width; pj += k) {
      size_t off = static_cast<size_t>(pi) * img.width + pj;
      detail::dct2_block(img.values.data() + off, f.coeffs.data() + off, k, k,
                         img.width, true);
    }
  return f;
}

inline ImageField patch_idct2(const FreqField& freq, int k) {
  require_finite(freq, "patch_idct2");
  if (k < 1 || freq.height % k != 0 || freq.width % k != 0)
    throw std::invalid_argument("patch_idct2: patch size must divide both dimensions");
  ImageField img(freq.height, freq.width);
  if (k == 1) {
    img.values = freq.coeffs;
    return img;
  }
  for (int pi = 0; pi < freq.height; pi += k)
    for (int pj = 0; pj < freq.width; pj += k) {
      size_t off = static_cast<size_t>(pi) * freq.width + pj;
      detail::dct2_block(freq.coeffs.data() + off, img.values.data() + off, k, k,
                         freq.width, false);
    }
  return img;
}

}  // namespace rdm

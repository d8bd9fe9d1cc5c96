#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdm {

// Real-valued spatial grid, row-major, entry (i, j) at i*width + j.
// Intensities are nominally scaled to [-1, 1]; the math never clamps.
struct ImageField {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  ImageField() = default;
  ImageField(int h, int w, double fill = 0.0)
      : height(h), width(w), values(static_cast<size_t>(h) * w, fill) {
    if (h < 1 || w < 1)
      throw std::invalid_argument("ImageField: height and width must be >= 1");
  }

  double& at(int i, int j) { return values[static_cast<size_t>(i) * width + j]; }
  double at(int i, int j) const { return values[static_cast<size_t>(i) * width + j]; }
  size_t size() const { return values.size(); }

  bool same_shape(const ImageField& o) const {
    return height == o.height && width == o.width;
  }
  bool finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

// DCT coefficient grid paired one-to-one with an ImageField. Which basis the
// coefficients live in (whole-image or per-patch DCT) is decided by the
// operation that produced them; the layout is always (i, j) -> i*width + j.
struct FreqField {
  int height = 0;
  int width = 0;
  std::vector<double> coeffs;

  FreqField() = default;
  FreqField(int h, int w, double fill = 0.0)
      : height(h), width(w), coeffs(static_cast<size_t>(h) * w, fill) {
    if (h < 1 || w < 1)
      throw std::invalid_argument("FreqField: height and width must be >= 1");
  }

  double& at(int i, int j) { return coeffs[static_cast<size_t>(i) * width + j]; }
  double at(int i, int j) const { return coeffs[static_cast<size_t>(i) * width + j]; }
  size_t size() const { return coeffs.size(); }

  bool same_shape(const FreqField& o) const {
    return height == o.height && width == o.width;
  }
  bool finite() const {
    for (double v : coeffs)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline void require_finite(const ImageField& f, const std::string& what) {
  if (!f.finite())
    throw std::invalid_argument(what + ": input contains NaN or Inf");
}

inline void require_finite(const FreqField& f, const std::string& what) {
  if (!f.finite())
    throw std::invalid_argument(what + ": input contains NaN or Inf");
}

inline void require_same_shape(const ImageField& a, const ImageField& b,
                               const std::string& what) {
  if (!a.same_shape(b)) throw std::invalid_argument(what + ": shape mismatch");
}

inline void require_same_shape(const FreqField& a, const FreqField& b,
                               const std::string& what) {
  if (!a.same_shape(b)) throw std::invalid_argument(what + ": shape mismatch");
}

}  // namespace rdm

#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rdm/blur.hpp"
#include "rdm/field.hpp"
#include "rdm/rng.hpp"

namespace rdm {

// Estimator of clean data from a corrupted field at noise scale sigma.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual ImageField evaluate(const ImageField& corrupted, double sigma,
                              std::optional<int> label = std::nullopt) const = 0;
};

// EDM preconditioning: D(x, sigma) = c_skip * x + c_out * raw with
// c_skip = sd^2/(sigma^2 + sd^2) and c_out = sigma*sd/sqrt(sigma^2 + sd^2).
inline ImageField precondition(const ImageField& raw, const ImageField& input,
                               double sigma, double sigma_data = 0.5) {
  require_same_shape(raw, input, "precondition");
  if (sigma <= 0.0) throw std::invalid_argument("precondition: sigma must be > 0");
  double s2 = sigma * sigma, d2 = sigma_data * sigma_data;
  double c_skip = d2 / (s2 + d2);
  double c_out = sigma * sigma_data / std::sqrt(s2 + d2);
  ImageField out(input.height, input.width);
  for (size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = c_skip * input.values[i] + c_out * raw.values[i];
  return out;
}

// Classifier-free guidance: uncond + w * (cond - uncond).
inline ImageField cfg_combine(const ImageField& cond, const ImageField& uncond,
                              double w) {
  require_same_shape(cond, uncond, "cfg_combine");
  ImageField out(cond.height, cond.width);
  for (size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = uncond.values[i] + w * (cond.values[i] - uncond.values[i]);
  return out;
}

// Gaussian prior diagonal in a patch-DCT basis: coefficient f ~ N(mean_f, var_f).
struct GaussianToyPrior {
  FreqField mean;
  std::vector<double> var;
  int patch = 1;  // basis patch size (per-patch DCT; 0 = whole-image DCT)

  void validate() const {
    if (var.size() != mean.size())
      throw std::invalid_argument("GaussianToyPrior: var size mismatch");
    for (double v : var)
      if (!(v > 0.0)) throw std::invalid_argument("GaussianToyPrior: variances must be > 0");
  }

  FreqField sample_freq(RandomSource& rng) const {
    FreqField u = mean;
    for (size_t i = 0; i < u.coeffs.size(); ++i)
      u.coeffs[i] += std::sqrt(var[i]) * rng.next_normal();
    return u;
  }

  ImageField sample(RandomSource& rng) const {
    FreqField u = sample_freq(rng);
    return patch == 0 ? idct2(u) : patch_idct2(u, patch);
  }
};

// Zero-mean prior with per-frequency variance scale / (1 + slope*(a^2+b^2))
// tiled over within-patch frequencies (a, b).
inline GaussianToyPrior make_patch_power_prior(int h, int w, int k, double scale,
                                               double slope = 3.0) {
  GaussianToyPrior p;
  p.mean = FreqField(h, w, 0.0);
  p.patch = k;
  p.var.resize(static_cast<size_t>(h) * w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      int a = i % k, b = j % k;
      p.var[static_cast<size_t>(i) * w + j] = scale / (1.0 + slope * (a * a + b * b));
    }
  return p;
}

// Per-frequency posterior mean for u_t = d_f u_0 + sigma * eps with prior
// u_0,f ~ N(mu_f, c_f):
//   E[u_0 | u_t]_f = mu_f + c_f d_f / (c_f d_f^2 + sigma^2) * (u_t,f - d_f mu_f).
inline FreqField analytic_denoiser(const GaussianToyPrior& prior, const FreqField& u_t,
                                   double sigma, const BlurOperator& blur) {
  if (sigma <= 0.0) throw std::invalid_argument("analytic_denoiser: sigma must be > 0");
  require_same_shape(prior.mean, u_t, "analytic_denoiser");
  FreqField out = u_t;
  double s2 = sigma * sigma;
  for (size_t i = 0; i < out.coeffs.size(); ++i) {
    double d = blur.decay[i], c = prior.var[i], mu = prior.mean.coeffs[i];
    double gain = c * d / (c * d * d + s2);
    out.coeffs[i] = mu + gain * (u_t.coeffs[i] - d * mu);
  }
  return out;
}

// Denoiser surface used by the sampler: everything happens in the sampler's
// frequency basis, and the current blur operator is available (the analytic
// denoiser needs its decay; network adapters ignore it).
class FreqDenoiser {
 public:
  virtual ~FreqDenoiser() = default;
  virtual FreqField estimate_u0(const FreqField& u, double sigma,
                                const BlurOperator& blur) const = 0;
};

class AnalyticDenoiser : public FreqDenoiser {
 public:
  explicit AnalyticDenoiser(GaussianToyPrior prior) : prior_(std::move(prior)) {
    prior_.validate();
  }
  FreqField estimate_u0(const FreqField& u, double sigma,
                        const BlurOperator& blur) const override {
    return analytic_denoiser(prior_, u, sigma, blur);
  }
  const GaussianToyPrior& prior() const { return prior_; }

 private:
  GaussianToyPrior prior_;
};

// Adapts an image-space denoiser (e.g. the conv net) to the sampler surface.
class ImageDenoiserAdapter : public FreqDenoiser {
 public:
  ImageDenoiserAdapter(const Denoiser& d, std::optional<int> label = std::nullopt)
      : d_(d), label_(label) {}
  FreqField estimate_u0(const FreqField& u, double sigma,
                        const BlurOperator& blur) const override {
    ImageField x0 = d_.evaluate(to_image(u, blur), sigma, label_);
    return to_freq(x0, blur);
  }

 private:
  const Denoiser& d_;
  std::optional<int> label_;
};

// Guided wrapper combining conditional and unconditional predictions.
class GuidedDenoiser : public Denoiser {
 public:
  GuidedDenoiser(const Denoiser& base, int label, double weight)
      : base_(base), label_(label), weight_(weight) {}
  ImageField evaluate(const ImageField& x, double sigma,
                      std::optional<int> /*label*/ = std::nullopt) const override {
    ImageField cond = base_.evaluate(x, sigma, label_);
    if (weight_ == 1.0) return cond;
    ImageField uncond = base_.evaluate(x, sigma, std::nullopt);
    return cfg_combine(cond, uncond, weight_);
  }

 private:
  const Denoiser& base_;
  int label_;
  double weight_;
};

}  // namespace rdm

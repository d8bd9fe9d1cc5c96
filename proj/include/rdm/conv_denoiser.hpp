#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rdm/blur.hpp"
#include "rdm/denoiser.hpp"
#include "rdm/field.hpp"
#include "rdm/schedule.hpp"

namespace rdm {

// Tiny 3-layer conv stack (3x3 kernels, circular padding, SiLU) wrapped in
// EDM preconditioning. Gradients are derived by hand; finite-difference
// tests keep them honest.
//
//   in  = c_in * x_t,  cn = ln(sigma)/4
//   a1[c] = w1[c] (*) in + b1[c] + e1[c]*cn + cls[label][c]   h1 = silu(a1)
//   a2[c] = sum_c' w2[c,c'] (*) h1[c'] + b2[c] + e2[c]*cn     h2 = silu(a2)
//   raw   = sum_c' w3[c'] (*) h2[c'] + b3
//   D     = c_skip * x_t + c_out * raw
struct ConvDenoiserParams {
  int channels = 8;
  int n_classes = 0;
  double sigma_data = 0.5;
  std::vector<double> w1, b1, e1;  // [C*9], [C], [C]
  std::vector<double> cls;         // [n_classes*C]
  std::vector<double> w2, b2, e2;  // [C*C*9], [C], [C]
  std::vector<double> w3, b3;      // [C*9], [1]

  static ConvDenoiserParams zeros(int channels, int n_classes = 0,
                                  double sigma_data = 0.5) {
    ConvDenoiserParams p;
    p.channels = channels;
    p.n_classes = n_classes;
    p.sigma_data = sigma_data;
    p.w1.assign(static_cast<size_t>(channels) * 9, 0.0);
    p.b1.assign(channels, 0.0);
    p.e1.assign(channels, 0.0);
    p.cls.assign(static_cast<size_t>(n_classes) * channels, 0.0);
    p.w2.assign(static_cast<size_t>(channels) * channels * 9, 0.0);
    p.b2.assign(channels, 0.0);
    p.e2.assign(channels, 0.0);
    p.w3.assign(static_cast<size_t>(channels) * 9, 0.0);
    p.b3.assign(1, 0.0);
    return p;
  }

  static ConvDenoiserParams init(int channels, int n_classes, double sigma_data,
                                 RandomSource& rng) {
    ConvDenoiserParams p = zeros(channels, n_classes, sigma_data);
    auto fill = [&rng](std::vector<double>& v, double std) {
      for (double& x : v) x = std * rng.next_normal();
    };
    fill(p.w1, 1.0 / 3.0);
    fill(p.w2, 1.0 / (3.0 * std::sqrt(static_cast<double>(channels))));
    fill(p.w3, 1.0 / (3.0 * std::sqrt(static_cast<double>(channels))));
    return p;
  }

  size_t param_count() const {
    return w1.size() + b1.size() + e1.size() + cls.size() + w2.size() +
           b2.size() + e2.size() + w3.size() + b3.size();
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(param_count());
    for (const auto* v : {&w1, &b1, &e1, &cls, &w2, &b2, &e2, &w3, &b3})
      out.insert(out.end(), v->begin(), v->end());
    return out;
  }

  void unflatten(const std::vector<double>& flat) {
    if (flat.size() != param_count())
      throw std::invalid_argument("ConvDenoiserParams: flat size mismatch");
    size_t off = 0;
    for (auto* v : {&w1, &b1, &e1, &cls, &w2, &b2, &e2, &w3, &b3}) {
      std::copy(flat.begin() + off, flat.begin() + off + v->size(), v->begin());
      off += v->size();
    }
  }

  void axpy(double a, const ConvDenoiserParams& g) {
    auto add = [a](std::vector<double>& x, const std::vector<double>& y) {
      for (size_t i = 0; i < x.size(); ++i) x[i] += a * y[i];
    };
    add(w1, g.w1); add(b1, g.b1); add(e1, g.e1); add(cls, g.cls);
    add(w2, g.w2); add(b2, g.b2); add(e2, g.e2); add(w3, g.w3); add(b3, g.b3);
  }
};

namespace detail {

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }
inline double silu_grad(double x) {
  double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

// out += K (*) in, 3x3 circular cross-correlation.
inline void conv3_acc(const double* in, const double* k9, double* out, int h, int w) {
  for (int y = 0; y < h; ++y) {
    int ym = y == 0 ? h - 1 : y - 1;
    int yp = y == h - 1 ? 0 : y + 1;
    const double* r0 = in + static_cast<size_t>(ym) * w;
    const double* r1 = in + static_cast<size_t>(y) * w;
    const double* r2 = in + static_cast<size_t>(yp) * w;
    double* o = out + static_cast<size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      int xm = x == 0 ? w - 1 : x - 1;
      int xp = x == w - 1 ? 0 : x + 1;
      o[x] += k9[0] * r0[xm] + k9[1] * r0[x] + k9[2] * r0[xp] +
              k9[3] * r1[xm] + k9[4] * r1[x] + k9[5] * r1[xp] +
              k9[6] * r2[xm] + k9[7] * r2[x] + k9[8] * r2[xp];
    }
  }
}

// Adjoint of conv3_acc with respect to the input: gin += K^T (*) gout.
inline void conv3_adj_acc(const double* gout, const double* k9, double* gin,
                          int h, int w) {
  double kr[9];  // 180-degree rotation turns correlation into its adjoint
  for (int i = 0; i < 9; ++i) kr[i] = k9[8 - i];
  conv3_acc(gout, kr, gin, h, w);
}

// gk[o] += sum_p gout[p] * in[p + o], kernel gradient of conv3_acc.
inline void conv3_kgrad_acc(const double* in, const double* gout, double* gk,
                            int h, int w) {
  for (int y = 0; y < h; ++y) {
    int ym = y == 0 ? h - 1 : y - 1;
    int yp = y == h - 1 ? 0 : y + 1;
    const double* r0 = in + static_cast<size_t>(ym) * w;
    const double* r1 = in + static_cast<size_t>(y) * w;
    const double* r2 = in + static_cast<size_t>(yp) * w;
    const double* g = gout + static_cast<size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      int xm = x == 0 ? w - 1 : x - 1;
      int xp = x == w - 1 ? 0 : x + 1;
      double gv = g[x];
      gk[0] += gv * r0[xm]; gk[1] += gv * r0[x]; gk[2] += gv * r0[xp];
      gk[3] += gv * r1[xm]; gk[4] += gv * r1[x]; gk[5] += gv * r1[xp];
      gk[6] += gv * r2[xm]; gk[7] += gv * r2[x]; gk[8] += gv * r2[xp];
    }
  }
}

struct ConvActivations {
  int h = 0, w = 0;
  std::vector<double> in;      // c_in * x_t
  std::vector<double> a1, h1;  // [C*H*W]
  std::vector<double> a2, h2;  // [C*H*W]
  std::vector<double> raw;     // [H*W]
};

inline void conv_forward(const ConvDenoiserParams& p, const ImageField& x_t,
                         double sigma, std::optional<int> label,
                         ConvActivations& ws) {
  const int C = p.channels, h = x_t.height, w = x_t.width;
  const size_t n = static_cast<size_t>(h) * w;
  double c_in = 1.0 / std::sqrt(sigma * sigma + p.sigma_data * p.sigma_data);
  double cn = std::log(sigma) / 4.0;

  ws.h = h; ws.w = w;
  ws.in.resize(n);
  for (size_t i = 0; i < n; ++i) ws.in[i] = c_in * x_t.values[i];
  ws.a1.assign(static_cast<size_t>(C) * n, 0.0);
  ws.h1.resize(static_cast<size_t>(C) * n);
  ws.a2.assign(static_cast<size_t>(C) * n, 0.0);
  ws.h2.resize(static_cast<size_t>(C) * n);
  ws.raw.assign(n, 0.0);

  for (int c = 0; c < C; ++c) {
    double* a = ws.a1.data() + static_cast<size_t>(c) * n;
    double base = p.b1[c] + p.e1[c] * cn;
    if (label) base += p.cls[static_cast<size_t>(*label) * C + c];
    for (size_t i = 0; i < n; ++i) a[i] = base;
    conv3_acc(ws.in.data(), p.w1.data() + static_cast<size_t>(c) * 9, a, h, w);
    double* hh = ws.h1.data() + static_cast<size_t>(c) * n;
    for (size_t i = 0; i < n; ++i) hh[i] = silu(a[i]);
  }
  for (int c = 0; c < C; ++c) {
    double* a = ws.a2.data() + static_cast<size_t>(c) * n;
    double base = p.b2[c] + p.e2[c] * cn;
    for (size_t i = 0; i < n; ++i) a[i] = base;
    for (int cp = 0; cp < C; ++cp)
      conv3_acc(ws.h1.data() + static_cast<size_t>(cp) * n,
                p.w2.data() + (static_cast<size_t>(c) * C + cp) * 9, a, h, w);
    double* hh = ws.h2.data() + static_cast<size_t>(c) * n;
    for (size_t i = 0; i < n; ++i) hh[i] = silu(a[i]);
  }
  for (size_t i = 0; i < n; ++i) ws.raw[i] = p.b3[0];
  for (int cp = 0; cp < C; ++cp)
    conv3_acc(ws.h2.data() + static_cast<size_t>(cp) * n,
              p.w3.data() + static_cast<size_t>(cp) * 9, ws.raw.data(), h, w);
}

// Backpropagates d(loss)/d(raw) into parameter gradients.
inline void conv_backward(const ConvDenoiserParams& p, double sigma,
                          std::optional<int> label, const ConvActivations& ws,
                          const std::vector<double>& g_raw,
                          ConvDenoiserParams& grad) {
  const int C = p.channels, h = ws.h, w = ws.w;
  const size_t n = static_cast<size_t>(h) * w;
  double cn = std::log(sigma) / 4.0;

  for (size_t i = 0; i < n; ++i) grad.b3[0] += g_raw[i];

  std::vector<double> g_h2(static_cast<size_t>(C) * n, 0.0);
  for (int cp = 0; cp < C; ++cp) {
    conv3_kgrad_acc(ws.h2.data() + static_cast<size_t>(cp) * n, g_raw.data(),
                    grad.w3.data() + static_cast<size_t>(cp) * 9, h, w);
    conv3_adj_acc(g_raw.data(), p.w3.data() + static_cast<size_t>(cp) * 9,
                  g_h2.data() + static_cast<size_t>(cp) * n, h, w);
  }

  std::vector<double> g_a2(static_cast<size_t>(C) * n);
  for (size_t i = 0; i < g_a2.size(); ++i)
    g_a2[i] = g_h2[i] * silu_grad(ws.a2[i]);

  std::vector<double> g_h1(static_cast<size_t>(C) * n, 0.0);
  for (int c = 0; c < C; ++c) {
    const double* ga = g_a2.data() + static_cast<size_t>(c) * n;
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += ga[i];
    grad.b2[c] += s;
    grad.e2[c] += s * cn;
    for (int cp = 0; cp < C; ++cp) {
      conv3_kgrad_acc(ws.h1.data() + static_cast<size_t>(cp) * n, ga,
                      grad.w2.data() + (static_cast<size_t>(c) * C + cp) * 9, h, w);
      conv3_adj_acc(ga, p.w2.data() + (static_cast<size_t>(c) * C + cp) * 9,
                    g_h1.data() + static_cast<size_t>(cp) * n, h, w);
    }
  }

  for (int c = 0; c < C; ++c) {
    const double* gh = g_h1.data() + static_cast<size_t>(c) * n;
    const double* a = ws.a1.data() + static_cast<size_t>(c) * n;
    std::vector<double> ga(n);
    for (size_t i = 0; i < n; ++i) ga[i] = gh[i] * silu_grad(a[i]);
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += ga[i];
    grad.b1[c] += s;
    grad.e1[c] += s * cn;
    if (label) grad.cls[static_cast<size_t>(*label) * C + c] += s;
    conv3_kgrad_acc(ws.in.data(), ga.data(),
                    grad.w1.data() + static_cast<size_t>(c) * 9, h, w);
  }
}

}  // namespace detail

class ConvDenoiser : public Denoiser {
 public:
  explicit ConvDenoiser(ConvDenoiserParams params) : p_(std::move(params)) {}

  ImageField evaluate(const ImageField& x_t, double sigma,
                      std::optional<int> label = std::nullopt) const override {
    if (sigma <= 0.0) throw std::invalid_argument("ConvDenoiser: sigma must be > 0");
    require_finite(x_t, "ConvDenoiser");
    check_label(label);
    detail::ConvActivations ws;
    detail::conv_forward(p_, x_t, sigma, label, ws);
    ImageField raw(x_t.height, x_t.width);
    raw.values = ws.raw;
    return precondition(raw, x_t, sigma, p_.sigma_data);
  }

  const ConvDenoiserParams& params() const { return p_; }

 private:
  void check_label(std::optional<int> label) const {
    if (label && (*label < 0 || *label >= p_.n_classes))
      throw std::invalid_argument("ConvDenoiser: label out of range");
  }
  ConvDenoiserParams p_;
};

// Training loss of the relay stage: corrupt x with blur + mixed noise at
// sigma'(t), evaluate the denoiser, mean squared error over pixels.
inline double rdm_loss(const Denoiser& d, const ImageField& x, double t,
                       const ScheduleConfig& cfg, RandomSource& rng,
                       std::optional<int> label = std::nullopt) {
  double tc = t < cfg.t_min ? cfg.t_min : t;
  double sigma = truncated_sigma(tc, cfg);
  ImageField x_t = forward_corrupt(x, t, cfg, rng);
  ImageField dx = d.evaluate(x_t, sigma, label);
  double acc = 0.0;
  for (size_t i = 0; i < x.values.size(); ++i) {
    double r = dx.values[i] - x.values[i];
    acc += r * r;
  }
  return acc / static_cast<double>(x.values.size());
}

// Same corruption path, evaluated through a frequency-domain denoiser.
inline double rdm_loss(const FreqDenoiser& d, const ImageField& x, double t,
                       const ScheduleConfig& cfg, RandomSource& rng) {
  double tc = t < cfg.t_min ? cfg.t_min : t;
  double sigma = truncated_sigma(tc, cfg);
  ImageField x_t = forward_corrupt(x, t, cfg, rng);
  BlurOperator op =
      patch_blur_operator(x.height, x.width, cfg.patch, blur_schedule(t, cfg));
  ImageField dx = to_image(d.estimate_u0(to_freq(x_t, op), sigma, op), op);
  double acc = 0.0;
  for (size_t i = 0; i < x.values.size(); ++i) {
    double r = dx.values[i] - x.values[i];
    acc += r * r;
  }
  return acc / static_cast<double>(x.values.size());
}

struct LossAndGrad {
  double loss = 0.0;
  ConvDenoiserParams grad;
};

// Loss plus exact parameter gradients for the conv denoiser. The corruption
// path is bitwise the one rdm_loss uses.
inline LossAndGrad rdm_loss_grad(const ConvDenoiserParams& p, const ImageField& x,
                                 double t, const ScheduleConfig& cfg,
                                 RandomSource& rng,
                                 std::optional<int> label = std::nullopt) {
  double tc = t < cfg.t_min ? cfg.t_min : t;
  double sigma = truncated_sigma(tc, cfg);
  ImageField x_t = forward_corrupt(x, t, cfg, rng);

  detail::ConvActivations ws;
  detail::conv_forward(p, x_t, sigma, label, ws);

  double s2 = sigma * sigma, d2 = p.sigma_data * p.sigma_data;
  double c_skip = d2 / (s2 + d2);
  double c_out = sigma * p.sigma_data / std::sqrt(s2 + d2);

  const size_t n = x.values.size();
  LossAndGrad out;
  out.grad = ConvDenoiserParams::zeros(p.channels, p.n_classes, p.sigma_data);
  std::vector<double> g_raw(n);
  for (size_t i = 0; i < n; ++i) {
    double r = c_skip * x_t.values[i] + c_out * ws.raw[i] - x.values[i];
    out.loss += r * r;
    g_raw[i] = 2.0 * c_out * r / static_cast<double>(n);
  }
  out.loss /= static_cast<double>(n);
  detail::conv_backward(p, sigma, label, ws, g_raw, out.grad);
  return out;
}

}  // namespace rdm

// rdm: command-line surface for the relay-diffusion toolkit. Every
// subcommand is a pure function of (config, flags, seed) to output bytes;
// artifacts land under --out with a manifest of content hashes.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rdm/checkpoint.hpp"
#include "rdm/config.hpp"
#include "rdm/csv.hpp"
#include "rdm/manifest.hpp"
#include "rdm/pgm.hpp"
#include "rdm/relay.hpp"
#include "rdm/verify.hpp"

namespace fs = std::filesystem;
using namespace rdm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Invocation {
  std::string subcommand;
  ConfigMap cfg;
  uint64_t seed = 0;
  std::string out_dir = "out";
  std::vector<std::string> artifacts;  // relative paths, in creation order
};

void emit(Invocation& inv, const std::string& rel, const std::string& bytes) {
  write_text_file(inv.out_dir + "/" + rel, bytes);
  inv.artifacts.push_back(rel);
}

void emit_pgm(Invocation& inv, const std::string& rel, const ImageField& img) {
  write_pgm(inv.out_dir + "/" + rel, img);
  inv.artifacts.push_back(rel);
}

void check_keys(const Invocation& inv, const std::set<std::string>& allowed) {
  if (auto bad = inv.cfg.unknown_key(allowed)) {
    std::cerr << "error: unknown config key '" << *bad << "' for subcommand '"
              << inv.subcommand << "'\n";
    std::exit(kExitUsage);
  }
}

ScheduleConfig schedule_from(const ConfigMap& c, const std::string& steps_key = "steps",
                             const std::string& eta_key = "eta") {
  ScheduleConfig s;
  s.p_mean = c.get_double("p_mean", s.p_mean);
  s.p_std = c.get_double("p_std", s.p_std);
  s.t_s = c.get_double("t_s", s.t_s);
  s.sigma_b_max = c.get_double("sigma_b_max", s.sigma_b_max);
  s.n_steps = static_cast<int>(c.get_int(steps_key, s.n_steps));
  s.eta = c.get_double(eta_key, s.eta);
  s.noise.kernel = static_cast<int>(c.get_int("kernel", s.noise.kernel));
  s.noise.alpha = c.get_double("alpha", s.noise.alpha);
  s.patch = static_cast<int>(c.get_int("patch", s.patch));
  s.t_min = c.get_double("t_min", s.t_min);
  s.grid_power = c.get_double("grid_power", s.grid_power);
  s.sigma_data = c.get_double("sigma_data", s.sigma_data);
  return s;
}

std::vector<std::string> list_pgms(const std::string& input) {
  std::vector<std::string> files;
  if (fs::is_directory(input)) {
    for (const auto& e : fs::directory_iterator(input))
      if (e.is_regular_file() && e.path().extension() == ".pgm")
        files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(input);
  }
  if (files.empty()) throw std::runtime_error("no .pgm inputs under " + input);
  return files;
}

// ---------------------------------------------------------------- spectra --

int cmd_spectra(Invocation& inv) {
  check_keys(inv, {"input", "bins"});
  if (!inv.cfg.has("input")) throw std::runtime_error("spectra: --input is required");
  int bins = static_cast<int>(inv.cfg.get_int("bins", 64));
  auto files = list_pgms(inv.cfg.get_str("input", ""));
  SpectrumCurve mean = make_curve(bins);
  for (const std::string& f : files) {
    ImageField img = read_pgm(f);
    SpectrumCurve c = psd_curve(dct2(img), bins);
    for (int b = 0; b < bins; ++b) {
      mean.power[b] += c.power[b] / files.size();
      mean.count[b] = c.count[b];
    }
    emit(inv, "psd_" + fs::path(f).stem().string() + ".csv", spectrum_csv(c));
  }
  emit(inv, "psd_mean.csv", spectrum_csv(mean));
  return kExitOk;
}

// ------------------------------------------------------------------ noise --

int cmd_noise(Invocation& inv) {
  check_keys(inv, {"kind", "size", "sigma", "kernel", "alpha", "count", "cov_draws"});
  std::string kind = inv.cfg.get_str("kind", "block");
  int size = static_cast<int>(inv.cfg.get_int("size", 32));
  NoiseSpec spec;
  spec.sigma = inv.cfg.get_double("sigma", 1.0);
  spec.kernel = static_cast<int>(inv.cfg.get_int("kernel", 4));
  spec.alpha = inv.cfg.get_double("alpha", 0.15);
  int count = static_cast<int>(inv.cfg.get_int("count", 1));
  int draws = static_cast<int>(inv.cfg.get_int("cov_draws", 20000));

  auto generate = [&](RandomSource& r) {
    if (kind == "iid") return gaussian_field(size, size, spec.sigma, r);
    if (kind == "block") return block_noise(size, size, spec, r);
    if (kind == "mixed") return mixed_noise(size, size, spec, r);
    throw std::runtime_error("noise: kind must be iid, block, or mixed");
  };
  RandomSource root(inv.seed);
  for (int i = 0; i < count; ++i) {
    RandomSource r = root.derive(i);
    emit_pgm(inv, "noise_" + std::to_string(i) + ".pgm", generate(r));
  }

  auto analytic_cov = [&](int dx, int dy) {
    NoiseSpec blk{spec.sigma, kind == "iid" ? 1 : spec.kernel, 0.0};
    double block_cov = block_covariance_oracle(dx, dy, blk, size, size);
    if (kind != "mixed") return block_cov;
    double iid_cov = (dx == 0 && dy == 0) ? spec.sigma * spec.sigma : 0.0;
    double a2 = spec.alpha * spec.alpha;
    NoiseSpec full{spec.sigma, spec.kernel, 0.0};
    return (iid_cov + a2 * block_covariance_oracle(dx, dy, full, size, size)) /
           (1.0 + a2);
  };
  std::vector<CovarianceRow> rows;
  RandomSource cov_root = root.derive(0xc0u);
  const int ci = size / 2, cj = size / 2;
  std::vector<std::vector<double>> prods(25);
  for (auto& p : prods) p.assign(draws, 0.0);
  parallel_for(draws, [&](int64_t d) {
    RandomSource r = cov_root.derive(d);
    ImageField f = generate(r);
    double center = f.at(ci, cj);
    for (int dy = -2; dy <= 2; ++dy)
      for (int dx = -2; dx <= 2; ++dx)
        prods[(dy + 2) * 5 + (dx + 2)][d] = center * f.at(ci + dy, cj + dx);
  });
  for (int dy = -2; dy <= 2; ++dy)
    for (int dx = -2; dx <= 2; ++dx) {
      const auto& p = prods[(dy + 2) * 5 + (dx + 2)];
      double s = 0.0, q = 0.0;
      for (double v : p) {
        s += v;
        q += v * v;
      }
      double mean = s / draws;
      double se = std::sqrt((q / draws - mean * mean) / draws);
      rows.push_back({dx, dy, analytic_cov(dx, dy), mean, se});
    }
  emit(inv, "covariance.csv", covariance_csv(rows));
  return kExitOk;
}

// ---------------------------------------------------------------- forward --

int cmd_forward(Invocation& inv) {
  check_keys(inv, {"input", "t_values", "p_mean", "p_std", "t_s", "sigma_b_max",
                   "patch", "kernel", "alpha", "t_min", "grid_power"});
  if (!inv.cfg.has("input")) throw std::runtime_error("forward: --input is required");
  ScheduleConfig cfg = schedule_from(inv.cfg);
  ImageField x = read_pgm(inv.cfg.get_str("input", ""));
  std::string tlist = inv.cfg.get_str("t_values", "0.2,0.5,0.8");
  RandomSource root(inv.seed);
  std::stringstream ss(tlist);
  std::string tok;
  int idx = 0;
  while (std::getline(ss, tok, ',')) {
    double t = std::stod(tok);
    RandomSource r = root.derive(idx);
    ImageField y = forward_corrupt(x, t, cfg, r);
    emit_pgm(inv, "forward_" + std::to_string(idx) + ".pgm", y);
    ++idx;
  }
  emit(inv, "schedule.csv", schedule_csv(cfg));
  return kExitOk;
}

// ------------------------------------------------------------------ train --

ToyDataset dataset_from(const ConfigMap& c) {
  std::string kind = c.get_str("dataset", "checkerboard");
  int size = static_cast<int>(c.get_int("size", 8));
  if (kind == "checkerboard")
    return ToyDataset::checkerboards(size, size,
                                     static_cast<int>(c.get_int("cell", 2)),
                                     c.get_double("contrast", 0.8));
  if (kind == "gaussian") {
    int patch = static_cast<int>(c.get_int("patch", 4));
    return ToyDataset::gaussian(make_patch_power_prior(
        size, size, patch, c.get_double("prior_scale", 0.25),
        c.get_double("prior_slope", 3.0)));
  }
  throw std::runtime_error("dataset must be checkerboard or gaussian");
}

int cmd_train(Invocation& inv) {
  check_keys(inv, {"dataset", "size", "cell", "contrast", "prior_scale",
                   "prior_slope", "epochs", "steps", "lr", "channels", "p_mean",
                   "p_std", "t_s", "sigma_b_max", "patch", "kernel", "alpha",
                   "t_min", "grid_power", "sigma_data"});
  ScheduleConfig cfg = schedule_from(inv.cfg);
  ToyDataset data = dataset_from(inv.cfg);
  int epochs = static_cast<int>(inv.cfg.get_int("epochs", 10));
  int steps = static_cast<int>(inv.cfg.get_int("steps", 50));
  double lr = inv.cfg.get_double("lr", 1e-3);
  int channels = static_cast<int>(inv.cfg.get_int("channels", 8));
  RandomSource rng(inv.seed);
  TrainResult res = train_toy(data, cfg, epochs, steps, lr, channels, rng);
  save_checkpoint(inv.out_dir + "/checkpoint.rdmk", res.params);
  inv.artifacts.push_back("checkpoint.rdmk");
  emit(inv, "train_log.csv", train_log_csv(res.log));
  return kExitOk;
}

// ----------------------------------------------------------------- sample --

int cmd_sample(Invocation& inv) {
  check_keys(inv, {"checkpoint", "size", "count", "label", "cfg_weight",
                   "prior_scale", "prior_slope", "p_mean", "p_std", "t_s",
                   "sigma_b_max", "patch", "kernel", "alpha", "t_min",
                   "grid_power", "sigma_data", "steps", "eta"});
  ScheduleConfig cfg = schedule_from(inv.cfg);
  int size = static_cast<int>(inv.cfg.get_int("size", 32));
  int count = static_cast<int>(inv.cfg.get_int("count", 4));
  Sampler sampler(size, size, cfg);

  std::optional<ConvDenoiserParams> params;
  std::optional<ConvDenoiser> conv;
  std::optional<GuidedDenoiser> guided;
  std::optional<AnalyticDenoiser> analytic;
  std::unique_ptr<FreqDenoiser> den;
  if (inv.cfg.has("checkpoint")) {
    params = load_checkpoint(inv.cfg.get_str("checkpoint", ""));
    conv.emplace(*params);
    int label = static_cast<int>(inv.cfg.get_int("label", -1));
    double w = inv.cfg.get_double("cfg_weight", 1.0);
    if (label >= 0) {
      guided.emplace(*conv, label, w);
      den = std::make_unique<ImageDenoiserAdapter>(*guided);
    } else {
      den = std::make_unique<ImageDenoiserAdapter>(*conv);
    }
  } else {
    analytic.emplace(make_patch_power_prior(size, size, cfg.patch,
                                            inv.cfg.get_double("prior_scale", 0.25),
                                            inv.cfg.get_double("prior_slope", 3.0)));
    den = std::make_unique<AnalyticDenoiser>(*analytic);
  }

  RandomSource root(inv.seed);
  for (int i = 0; i < count; ++i) {
    RandomSource r = root.derive(i);
    auto [img, trace] = sampler.run(*den, std::nullopt, r);
    emit_pgm(inv, "sample_" + std::to_string(i) + ".pgm", img);
    emit(inv, "trace_" + std::to_string(i) + ".csv", trace_csv(trace));
  }
  return kExitOk;
}

// ------------------------------------------------------------------ relay --

RelayConfig relay_from(const ConfigMap& c) {
  RelayConfig r;
  r.low_res = static_cast<int>(c.get_int("low_res", 8));
  r.factor = static_cast<int>(c.get_int("factor", 4));
  r.stage1 = schedule_from(c, "steps1", "eta1");
  r.stage1.patch = 1;
  r.stage1.t_s = 1.0;
  r.stage1.sigma_b_max = 0.0;
  r.stage1.noise = NoiseSpec{1.0, 1, 0.0};
  if (!c.has("eta1")) r.stage1.eta = 0.2;
  r.stage2 = schedule_from(c, "steps2", "eta");
  r.stage2.patch = r.factor;
  if (!c.has("t_s")) r.stage2.t_s = 0.8;
  if (!c.has("sigma_b_max")) r.stage2.sigma_b_max = 2.0;
  if (!c.has("alpha")) r.stage2.noise.alpha = 0.15;
  if (!c.has("kernel")) r.stage2.noise.kernel = r.factor;
  if (!c.has("steps1")) r.stage1.n_steps = 20;
  if (!c.has("steps2")) r.stage2.n_steps = 40;
  if (!c.has("eta")) r.stage2.eta = 0.2;
  return r;
}

struct RelayDenoisers {
  GaussianToyPrior low, high;
  std::optional<AnalyticDenoiser> d1a, d2a;
  std::optional<ConvDenoiserParams> p2;
  std::optional<ConvDenoiser> conv2;
  std::optional<ImageDenoiserAdapter> d2c;
  const FreqDenoiser* d1 = nullptr;
  const FreqDenoiser* d2 = nullptr;
};

RelayDenoisers relay_denoisers(const RelayConfig& r, const ConfigMap& c) {
  RelayDenoisers d;
  double scale = c.get_double("prior_scale", 0.25);
  double slope = c.get_double("prior_slope", 3.0);
  int hi = r.high_res();
  d.high = make_patch_power_prior(hi, hi, r.factor, scale, slope);
  d.low = make_patch_power_prior(r.low_res, r.low_res, 1,
                                 scale / (r.factor * r.factor), 0.0);
  d.d1a.emplace(d.low);
  d.d1 = &*d.d1a;
  if (c.has("checkpoint2")) {
    d.p2 = load_checkpoint(c.get_str("checkpoint2", ""));
    d.conv2.emplace(*d.p2);
    d.d2c.emplace(*d.conv2);
    d.d2 = &*d.d2c;
  } else {
    d.d2a.emplace(d.high);
    d.d2 = &*d.d2a;
  }
  return d;
}

int cmd_relay(Invocation& inv) {
  check_keys(inv, {"low_res", "factor", "steps1", "steps2", "eta", "eta1", "t_s",
                   "sigma_b_max", "alpha", "kernel", "prior_scale", "prior_slope",
                   "grid_power", "count", "checkpoint2", "p_mean", "p_std",
                   "t_min", "sigma_data", "patch", "steps"});
  RelayConfig cfg = relay_from(inv.cfg);
  cfg.validate();
  RelayDenoisers den = relay_denoisers(cfg, inv.cfg);
  int count = static_cast<int>(inv.cfg.get_int("count", 1));
  RandomSource root(inv.seed);
  for (int i = 0; i < count; ++i) {
    RandomSource r = root.derive(i);
    RelayResult res = run_relay(cfg, *den.d1, *den.d2, r);
    emit_pgm(inv, "stage1_" + std::to_string(i) + ".pgm", res.stage1_image);
    emit_pgm(inv, "relay_" + std::to_string(i) + ".pgm", res.image);
    emit(inv, "trace1_" + std::to_string(i) + ".csv", trace_csv(res.trace1));
    emit(inv, "trace2_" + std::to_string(i) + ".csv", trace_csv(res.trace2));
  }
  return kExitOk;
}

// ------------------------------------------------------------------ sweep --

int cmd_sweep(Invocation& inv) {
  check_keys(inv, {"kind", "samples", "ref_samples", "budget", "low_res", "factor",
                   "steps1", "steps2", "eta", "eta1", "t_s", "sigma_b_max", "alpha",
                   "kernel", "prior_scale", "prior_slope", "grid_power", "p_mean",
                   "p_std", "t_min", "sigma_data", "patch", "steps"});
  RelayConfig cfg = relay_from(inv.cfg);
  cfg.validate();
  RelayDenoisers den = relay_denoisers(cfg, inv.cfg);
  int samples = static_cast<int>(inv.cfg.get_int("samples", 64));
  int ref_samples = static_cast<int>(inv.cfg.get_int("ref_samples", 256));
  RandomSource root(inv.seed);
  std::vector<ImageField> reference(ref_samples);
  parallel_for(ref_samples, [&](int64_t i) {
    RandomSource r = root.derive(0x5ef00ull + i);
    reference[i] = den.high.sample(r);
  });
  std::string kind = inv.cfg.get_str("kind", "eta");
  if (kind == "eta") {
    auto rows = eta_sweep(cfg, default_eta_grid(), *den.d1, *den.d2, reference,
                          samples, root);
    emit(inv, "eta_sweep.csv", eta_sweep_csv(rows));
  } else if (kind == "nfe") {
    int budget = static_cast<int>(inv.cfg.get_int("budget", 20));
    auto rows = nfe_sweep(cfg, nfe_allocations(budget), *den.d1, *den.d2,
                          reference, samples, root);
    emit(inv, "nfe_sweep.csv", nfe_sweep_csv(rows));
  } else {
    throw std::runtime_error("sweep: kind must be eta or nfe");
  }
  return kExitOk;
}

// ----------------------------------------------------------------- verify --

int cmd_verify(Invocation& inv) {
  check_keys(inv, {"suite"});
  std::string suite = inv.cfg.get_str("suite", "all");
  std::vector<SuiteResult> results;
  uint64_t seed = inv.seed;
  if (suite == "all") {
    results = verify_all(seed);
  } else if (suite == "dct") {
    results.push_back(verify_dct(seed));
  } else if (suite == "covariance") {
    results.push_back(verify_covariance(seed));
  } else if (suite == "mixednoise") {
    results.push_back(verify_mixednoise(seed));
  } else if (suite == "schedule") {
    results.push_back(verify_schedule_identity(seed));
  } else if (suite == "patchblur") {
    results.push_back(verify_patch_terminal(seed));
  } else if (suite == "spectrum") {
    results.push_back(verify_spectrum_equivalence(seed));
  } else if (suite == "snr") {
    results.push_back(verify_snr_shift(seed));
  } else if (suite == "ode") {
    results.push_back(verify_ode_reduction(seed));
  } else if (suite == "gradcheck") {
    results.push_back(verify_gradcheck(seed));
  } else if (suite == "marginal") {
    results.push_back(verify_marginal(seed));
  } else {
    std::cerr << "error: unknown suite '" << suite << "'\n";
    return kExitUsage;
  }
  bool all_pass = true;
  double total = 0.0;
  std::string summary = "suite,pass,seconds,detail\n";
  for (const auto& r : results) {
    all_pass = all_pass && r.pass;
    total += r.seconds;
    char line[160];
    std::snprintf(line, sizeof(line), "[%s] %-10s (%7.2f s) %s", r.pass ? "PASS" : "FAIL",
                  r.name.c_str(), r.seconds, r.detail.c_str());
    std::cout << line << "\n";
    summary += r.name + "," + (r.pass ? "1" : "0") + "," + fmt_g(r.seconds) + ",\"" +
               r.detail + "\"\n";
    for (const auto& [name, content] : r.artifacts) emit(inv, name, content);
  }
  std::cout << (all_pass ? "all suites PASS" : "some suites FAILED") << " (total "
            << fmt_g(total) << " s)\n";
  emit(inv, "verify_summary.csv", summary);
  return all_pass ? kExitOk : kExitRuntime;
}

using Handler = int (*)(Invocation&);

void add_key_option(CLI::App* cmd, Invocation& inv, const std::string& flag,
                    const std::string& key, const std::string& help) {
  cmd->add_option_function<std::string>(
      flag,
      [&inv, key](const std::string& v) { inv.cfg.set(key, v); },
      help + " [key: " + key + "]");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relay-diffusion toolkit: spectra, noise, schedules, samplers"};
  app.require_subcommand(1);

  Invocation inv;
  std::string config_path;
  std::vector<std::string> overrides;

  app.add_option("--config", config_path, "config file (key=value lines)")
      ->envname("RDMK_CONFIG");
  app.add_option("--seed", inv.seed, "base seed, echoed into the manifest");
  app.add_option("--out", inv.out_dir, "output directory");
  app.add_option("--set", overrides, "config override key=value (repeatable)");

  std::map<std::string, Handler> handlers;
  auto sub = [&](const std::string& name, const std::string& desc, Handler h) {
    CLI::App* cmd = app.add_subcommand(name, desc);
    cmd->fallthrough();  // --seed/--out/--set may follow the subcommand
    handlers[name] = h;
    return cmd;
  };

  CLI::App* c_spectra = sub("spectra", "PSD curves of PGM images", cmd_spectra);
  add_key_option(c_spectra, inv, "--input", "input", "PGM file or directory");
  add_key_option(c_spectra, inv, "--bins", "bins", "radial bin count");

  CLI::App* c_noise = sub("noise", "noise fields and covariance reports", cmd_noise);
  add_key_option(c_noise, inv, "--kind", "kind", "iid | block | mixed");
  add_key_option(c_noise, inv, "--size", "size", "field size");
  add_key_option(c_noise, inv, "--sigma", "sigma", "marginal std");
  add_key_option(c_noise, inv, "--kernel", "kernel", "block kernel s");
  add_key_option(c_noise, inv, "--alpha", "alpha", "block mixing weight");
  add_key_option(c_noise, inv, "--count", "count", "fields to emit");
  add_key_option(c_noise, inv, "--cov-draws", "cov_draws", "Monte Carlo draws");

  CLI::App* c_forward = sub("forward", "forward corruption of an image", cmd_forward);
  add_key_option(c_forward, inv, "--input", "input", "input PGM");
  add_key_option(c_forward, inv, "--t", "t_values", "comma-separated t values");
  add_key_option(c_forward, inv, "--t-s", "t_s", "truncation start");
  add_key_option(c_forward, inv, "--sigma-b-max", "sigma_b_max", "terminal blur");
  add_key_option(c_forward, inv, "--patch", "patch", "patch size k");
  add_key_option(c_forward, inv, "--kernel", "kernel", "block kernel s");
  add_key_option(c_forward, inv, "--alpha", "alpha", "block mixing weight");

  CLI::App* c_train = sub("train", "train the toy conv denoiser", cmd_train);
  add_key_option(c_train, inv, "--dataset", "dataset", "checkerboard | gaussian");
  add_key_option(c_train, inv, "--size", "size", "field size");
  add_key_option(c_train, inv, "--cell", "cell", "checkerboard cell");
  add_key_option(c_train, inv, "--epochs", "epochs", "epoch count");
  add_key_option(c_train, inv, "--steps", "steps", "steps per epoch");
  add_key_option(c_train, inv, "--lr", "lr", "learning rate");
  add_key_option(c_train, inv, "--channels", "channels", "conv channels");
  add_key_option(c_train, inv, "--patch", "patch", "patch size k");
  add_key_option(c_train, inv, "--t-s", "t_s", "truncation start");
  add_key_option(c_train, inv, "--sigma-b-max", "sigma_b_max", "terminal blur");
  add_key_option(c_train, inv, "--kernel", "kernel", "block kernel s");
  add_key_option(c_train, inv, "--alpha", "alpha", "block mixing weight");

  CLI::App* c_sample = sub("sample", "sample from a denoiser", cmd_sample);
  add_key_option(c_sample, inv, "--checkpoint", "checkpoint", "RDMK checkpoint");
  add_key_option(c_sample, inv, "--size", "size", "field size");
  add_key_option(c_sample, inv, "--count", "count", "samples to draw");
  add_key_option(c_sample, inv, "--steps", "steps", "sampler steps N");
  add_key_option(c_sample, inv, "--eta", "eta", "stochasticity");
  add_key_option(c_sample, inv, "--label", "label", "class label (-1 = none)");
  add_key_option(c_sample, inv, "--cfg-weight", "cfg_weight", "guidance weight");
  add_key_option(c_sample, inv, "--patch", "patch", "patch size k");
  add_key_option(c_sample, inv, "--t-s", "t_s", "truncation start");
  add_key_option(c_sample, inv, "--sigma-b-max", "sigma_b_max", "terminal blur");
  add_key_option(c_sample, inv, "--kernel", "kernel", "block kernel s");
  add_key_option(c_sample, inv, "--alpha", "alpha", "block mixing weight");

  CLI::App* c_relay = sub("relay", "two-stage relay generation", cmd_relay);
  add_key_option(c_relay, inv, "--low-res", "low_res", "stage-1 resolution");
  add_key_option(c_relay, inv, "--factor", "factor", "upsampling factor k");
  add_key_option(c_relay, inv, "--steps1", "steps1", "stage-1 steps");
  add_key_option(c_relay, inv, "--steps2", "steps2", "stage-2 steps");
  add_key_option(c_relay, inv, "--eta", "eta", "stage-2 stochasticity");
  add_key_option(c_relay, inv, "--t-s", "t_s", "truncation start");
  add_key_option(c_relay, inv, "--sigma-b-max", "sigma_b_max", "terminal blur");
  add_key_option(c_relay, inv, "--alpha", "alpha", "block mixing weight");
  add_key_option(c_relay, inv, "--count", "count", "relay runs");
  add_key_option(c_relay, inv, "--checkpoint2", "checkpoint2", "stage-2 checkpoint");
  add_key_option(c_relay, inv, "--grid-power", "grid_power", "grid exponent");

  CLI::App* c_sweep = sub("sweep", "eta / NFE-allocation sweeps", cmd_sweep);
  add_key_option(c_sweep, inv, "--kind", "kind", "eta | nfe");
  add_key_option(c_sweep, inv, "--samples", "samples", "samples per cell");
  add_key_option(c_sweep, inv, "--ref-samples", "ref_samples", "reference corpus");
  add_key_option(c_sweep, inv, "--budget", "budget", "effective NFE budget");
  add_key_option(c_sweep, inv, "--grid-power", "grid_power", "grid exponent");

  CLI::App* c_verify = sub("verify", "run verification suites", cmd_verify);
  add_key_option(c_verify, inv, "--suite", "suite",
                 "all | dct | covariance | mixednoise | schedule | patchblur | "
                 "spectrum | snr | ode | gradcheck | marginal");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp")
      return app.exit(e);
    app.exit(e);
    return kExitUsage;
  }

  try {
    // config file first, then flag overrides on top
    if (!config_path.empty()) {
      ConfigMap file_cfg = ConfigMap::parse_file(config_path);
      for (const auto& [k, v] : inv.cfg.entries()) file_cfg.set(k, v);
      for (const auto& [k, v] : file_cfg.entries()) inv.cfg.set(k, v);
    }
    for (const std::string& o : overrides) inv.cfg.apply_override(o);

    CLI::App* picked = app.get_subcommands().front();
    inv.subcommand = picked->get_name();
    fs::create_directories(inv.out_dir);

    int rc = handlers.at(inv.subcommand)(inv);

    // resolved config + seed, then the manifest over everything
    std::string run_cfg = "# resolved configuration\nseed=" +
                          std::to_string(inv.seed) + "\n" + inv.cfg.render();
    write_text_file(inv.out_dir + "/run.cfg", run_cfg);
    inv.artifacts.push_back("run.cfg");
    write_text_file(inv.out_dir + "/manifest.txt",
                    render_manifest(inv.seed, inv.artifacts, inv.out_dir));
    return rc;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

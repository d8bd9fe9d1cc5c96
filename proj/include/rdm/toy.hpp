#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "rdm/denoiser.hpp"
#include "rdm/field.hpp"
#include "rdm/rng.hpp"

namespace rdm {

enum class ToyKind { gaussian_field, checkerboard, pgm_corpus };

// Synthetic data sources standing in for image datasets. Sampling is a pure
// function of the RandomSource handed in; callers derive one stream per item.
struct ToyDataset {
  ToyKind kind = ToyKind::checkerboard;
  int height = 8, width = 8;

  GaussianToyPrior prior;  // gaussian_field kind

  int cell = 2;            // checkerboard cell size
  double contrast = 1.0;   // checkerboard amplitude scale

  std::vector<ImageField> corpus;  // pgm_corpus kind

  static ToyDataset gaussian(GaussianToyPrior p) {
    ToyDataset d;
    d.kind = ToyKind::gaussian_field;
    d.height = p.mean.height;
    d.width = p.mean.width;
    d.prior = std::move(p);
    return d;
  }

  static ToyDataset checkerboards(int h, int w, int cell, double contrast = 1.0) {
    if (cell < 1) throw std::invalid_argument("ToyDataset: cell must be >= 1");
    ToyDataset d;
    d.kind = ToyKind::checkerboard;
    d.height = h;
    d.width = w;
    d.cell = cell;
    d.contrast = contrast;
    return d;
  }

  static ToyDataset from_corpus(std::vector<ImageField> images) {
    if (images.empty()) throw std::invalid_argument("ToyDataset: empty corpus");
    ToyDataset d;
    d.kind = ToyKind::pgm_corpus;
    d.height = images.front().height;
    d.width = images.front().width;
    d.corpus = std::move(images);
    return d;
  }

  ImageField sample(RandomSource& rng) const {
    switch (kind) {
      case ToyKind::gaussian_field:
        return prior.sample(rng);
      case ToyKind::checkerboard: {
        // random phase offsets, sign flip, and amplitude in [0.5, 1]*contrast
        int oi = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(cell));
        int oj = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(cell));
        double sign = (rng.next_u64() & 1) ? 1.0 : -1.0;
        double amp = contrast * (0.5 + 0.5 * rng.next_uniform()) * sign;
        ImageField f(height, width);
        for (int i = 0; i < height; ++i)
          for (int j = 0; j < width; ++j) {
            int par = ((i + oi) / cell + (j + oj) / cell) & 1;
            f.at(i, j) = par ? amp : -amp;
          }
        return f;
      }
      case ToyKind::pgm_corpus:
        return corpus[rng.next_u64() % corpus.size()];
    }
    throw std::logic_error("ToyDataset: unknown kind");
  }
};

}  // namespace rdm

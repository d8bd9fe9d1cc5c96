#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include "rdm/field.hpp"

namespace rdm {

// Binary PGM (magic P5), 8-bit or 16-bit. Pixel mapping is linear:
// v in [0, maxval] <-> 2v/maxval - 1. 16-bit rasters are big-endian per the
// format convention.
inline void write_pgm(const std::string& path, const ImageField& img,
                      int maxval = 65535) {
  if (maxval != 255 && maxval != 65535)
    throw std::invalid_argument("write_pgm: maxval must be 255 or 65535");
  require_finite(img, "write_pgm");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pgm: cannot open " + path);
  out << "P5\n" << img.width << " " << img.height << "\n" << maxval << "\n";
  for (double v : img.values) {
    double q = std::round((v + 1.0) / 2.0 * maxval);
    if (q < 0.0) q = 0.0;
    if (q > maxval) q = maxval;
    auto u = static_cast<uint32_t>(q);
    if (maxval == 255) {
      out.put(static_cast<char>(u));
    } else {
      out.put(static_cast<char>(u >> 8));
      out.put(static_cast<char>(u & 0xff));
    }
  }
  if (!out) throw std::runtime_error("write_pgm: write failed for " + path);
}

namespace detail {

inline int pgm_token(std::istream& in) {
  // skips whitespace and '#' comment lines
  int c = in.get();
  for (;;) {
    while (c != EOF && std::isspace(c)) c = in.get();
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
      continue;
    }
    break;
  }
  int value = 0;
  bool any = false;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    any = true;
    c = in.get();
  }
  if (!any) throw std::runtime_error("read_pgm: malformed header");
  return value;
}

}  // namespace detail

inline ImageField read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_pgm: cannot open " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || m1 != '5')
    throw std::runtime_error("read_pgm: not a binary PGM (P5): " + path);
  int w = detail::pgm_token(in);
  int h = detail::pgm_token(in);
  int maxval = detail::pgm_token(in);
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535)
    throw std::runtime_error("read_pgm: bad header in " + path);
  // pgm_token consumed the single whitespace after maxval
  ImageField img(h, w);
  const bool wide = maxval > 255;
  for (double& v : img.values) {
    int u;
    if (wide) {
      int hi = in.get(), lo = in.get();
      if (hi == EOF || lo == EOF) throw std::runtime_error("read_pgm: truncated raster");
      u = (hi << 8) | lo;
    } else {
      u = in.get();
      if (u == EOF) throw std::runtime_error("read_pgm: truncated raster");
    }
    v = 2.0 * u / maxval - 1.0;
  }
  return img;
}

}  // namespace rdm

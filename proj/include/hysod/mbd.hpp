#pragma once

#include <limits>

#include "hysod/image.hpp"

namespace hysod {

/// Raster-scan minimum barrier distance transform seeded from the image
/// boundary. A path's cost is max(value) - min(value) along it; each pass
/// relaxes against the two causal neighbours, alternating forward and
/// backward scans. Boundary pixels have distance 0 by construction.
inline Map mbd_transform(const Map& gray, int passes = 3) {
  const int h = gray.h, w = gray.w;
  Map dist(h, w, std::numeric_limits<double>::infinity());
  Map upper = gray;  // running path maximum
  Map lower = gray;  // running path minimum
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (y == 0 || y == h - 1 || x == 0 || x == w - 1) dist.at(y, x) = 0.0;

  auto relax = [&](int y, int x, int ny, int nx) {
    if (dist.at(ny, nx) == std::numeric_limits<double>::infinity()) return;
    double u = std::max(upper.at(ny, nx), gray.at(y, x));
    double l = std::min(lower.at(ny, nx), gray.at(y, x));
    if (u - l < dist.at(y, x)) {
      dist.at(y, x) = u - l;
      upper.at(y, x) = u;
      lower.at(y, x) = l;
    }
  };

  for (int pass = 0; pass < passes; ++pass) {
    if (pass % 2 == 0) {
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          if (y > 0) relax(y, x, y - 1, x);
          if (x > 0) relax(y, x, y, x - 1);
        }
    } else {
      for (int y = h - 1; y >= 0; --y)
        for (int x = w - 1; x >= 0; --x) {
          if (y < h - 1) relax(y, x, y + 1, x);
          if (x < w - 1) relax(y, x, y, x + 1);
        }
    }
  }
  return dist;
}

/// Min-max normalization with a constant-map guard (all zeros when flat).
inline Map normalize_minmax(const Map& m) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : m.v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  Map out(m.h, m.w);
  if (!(hi - lo > 1e-12)) return out;
  double inv = 1.0 / (hi - lo);
  for (std::size_t i = 0; i < m.v.size(); ++i) out.v[i] = (m.v[i] - lo) * inv;
  return out;
}

}  // namespace hysod

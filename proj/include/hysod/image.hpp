#pragma once

#include <cmath>
#include <vector>

#include "hysod/common.hpp"

namespace hysod {

/// Single-channel map in [0, 1], row-major.
struct Map {
  int h = 0;
  int w = 0;
  std::vector<double> v;

  Map() = default;
  Map(int h_, int w_, double fill = 0.0)
      : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, fill) {}

  double& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
  double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
  bool empty() const { return v.empty(); }
  bool same_shape(const Map& o) const { return h == o.h && w == o.w; }
};

/// Three-channel image in [0, 1], planar (channel, row, column).
struct Image {
  int h = 0;
  int w = 0;
  std::vector<double> v;

  Image() = default;
  Image(int h_, int w_, double fill = 0.0)
      : h(h_), w(w_), v(static_cast<std::size_t>(3) * h_ * w_, fill) {}

  double& at(int c, int y, int x) {
    return v[(static_cast<std::size_t>(c) * h + y) * w + x];
  }
  double at(int c, int y, int x) const {
    return v[(static_cast<std::size_t>(c) * h + y) * w + x];
  }
  bool empty() const { return v.empty(); }
};

inline Map to_gray(const Image& img) {
  Map g(img.h, img.w);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      g.at(y, x) = (img.at(0, y, x) + img.at(1, y, x) + img.at(2, y, x)) / 3.0;
  return g;
}

inline Map resize_bilinear(const Map& m, int oh, int ow) {
  if (oh == m.h && ow == m.w) return m;
  Map out(oh, ow);
  for (int oy = 0; oy < oh; ++oy) {
    LerpCoef ry = lerp_coef(m.h, oh, oy);
    for (int ox = 0; ox < ow; ++ox) {
      LerpCoef rx = lerp_coef(m.w, ow, ox);
      out.at(oy, ox) =
          ry.w_lo * (rx.w_lo * m.at(ry.lo, rx.lo) + rx.w_hi * m.at(ry.lo, rx.hi)) +
          ry.w_hi * (rx.w_lo * m.at(ry.hi, rx.lo) + rx.w_hi * m.at(ry.hi, rx.hi));
    }
  }
  return out;
}

inline Image resize_bilinear(const Image& img, int oh, int ow) {
  if (oh == img.h && ow == img.w) return img;
  Image out(oh, ow);
  for (int oy = 0; oy < oh; ++oy) {
    LerpCoef ry = lerp_coef(img.h, oh, oy);
    for (int ox = 0; ox < ow; ++ox) {
      LerpCoef rx = lerp_coef(img.w, ow, ox);
      for (int c = 0; c < 3; ++c)
        out.at(c, oy, ox) =
            ry.w_lo * (rx.w_lo * img.at(c, ry.lo, rx.lo) + rx.w_hi * img.at(c, ry.lo, rx.hi)) +
            ry.w_hi * (rx.w_lo * img.at(c, ry.hi, rx.lo) + rx.w_hi * img.at(c, ry.hi, rx.hi));
    }
  }
  return out;
}

inline void clamp_map(Map& m) {
  for (double& x : m.v) x = clamp01(x);
}

inline Map hflip(const Map& m) {
  Map out(m.h, m.w);
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x) out.at(y, x) = m.at(y, m.w - 1 - x);
  return out;
}

inline Image hflip(const Image& img) {
  Image out(img.h, img.w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) out.at(c, y, x) = img.at(c, y, img.w - 1 - x);
  return out;
}

/// Rotation by `quarter_turns` * 90 degrees counter-clockwise, exact index
/// remapping (no interpolation).
inline Map rot90(const Map& m, int quarter_turns) {
  int k = ((quarter_turns % 4) + 4) % 4;
  if (k == 0) return m;
  Map out = (k == 2) ? Map(m.h, m.w) : Map(m.w, m.h);
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x) {
      double val = m.at(y, x);
      if (k == 1)
        out.at(m.w - 1 - x, y) = val;
      else if (k == 2)
        out.at(m.h - 1 - y, m.w - 1 - x) = val;
      else
        out.at(x, m.h - 1 - y) = val;
    }
  return out;
}

inline Image rot90(const Image& img, int quarter_turns) {
  int k = ((quarter_turns % 4) + 4) % 4;
  if (k == 0) return img;
  Image out = (k == 2) ? Image(img.h, img.w) : Image(img.w, img.h);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) {
        double val = img.at(c, y, x);
        if (k == 1)
          out.at(c, img.w - 1 - x, y) = val;
        else if (k == 2)
          out.at(c, img.h - 1 - y, img.w - 1 - x) = val;
        else
          out.at(c, x, img.h - 1 - y) = val;
      }
  return out;
}

/// Nearest-neighbour rotation about the map centre; samples falling outside
/// the source read as 0.
inline Map rotate_nearest(const Map& m, double degrees) {
  if (degrees == 0.0) return m;
  Map out(m.h, m.w);
  double rad = degrees * 3.14159265358979323846 / 180.0;
  double cs = std::cos(rad), sn = std::sin(rad);
  double cy = (m.h - 1) / 2.0, cx = (m.w - 1) / 2.0;
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x) {
      // Inverse-map the output pixel into the source.
      double dy = y - cy, dx = x - cx;
      double sy = cs * dy - sn * dx + cy;
      double sx = sn * dy + cs * dx + cx;
      int iy = static_cast<int>(std::lround(sy));
      int ix = static_cast<int>(std::lround(sx));
      if (iy >= 0 && iy < m.h && ix >= 0 && ix < m.w) out.at(y, x) = m.at(iy, ix);
    }
  return out;
}

/// Crops a window whose sides shrink by `fraction`, anchored at (off_y, off_x),
/// then resizes back to the original size.
inline Map crop_resize(const Map& m, double fraction, int off_y, int off_x) {
  int ch = std::max(1, static_cast<int>(std::lround((1.0 - fraction) * m.h)));
  int cw = std::max(1, static_cast<int>(std::lround((1.0 - fraction) * m.w)));
  if (ch == m.h && cw == m.w) return m;
  off_y = std::min(std::max(off_y, 0), m.h - ch);
  off_x = std::min(std::max(off_x, 0), m.w - cw);
  Map window(ch, cw);
  for (int y = 0; y < ch; ++y)
    for (int x = 0; x < cw; ++x) window.at(y, x) = m.at(off_y + y, off_x + x);
  Map out = resize_bilinear(window, m.h, m.w);
  clamp_map(out);
  return out;
}

inline void occlude(Map& m, int y, int x, int rh, int rw) {
  for (int yy = std::max(y, 0); yy < std::min(y + rh, m.h); ++yy)
    for (int xx = std::max(x, 0); xx < std::min(x + rw, m.w); ++xx) m.at(yy, xx) = 0.0;
}

}  // namespace hysod

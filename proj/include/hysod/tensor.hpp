#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "hysod/common.hpp"

namespace hysod {

/// Dense rank-4 array (batch, channels, height, width), double precision,
/// row-major with width fastest.
struct Tensor {
  int b = 0;
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int b_, int c_, int h_, int w_, double fill = 0.0)
      : b(b_), c(c_), h(h_), w(w_), v(static_cast<std::size_t>(b_) * c_ * h_ * w_, fill) {}

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.b, t.c, t.h, t.w); }

  static Tensor scalar(double value) {
    Tensor t(1, 1, 1, 1);
    t.v[0] = value;
    return t;
  }

  std::size_t numel() const { return v.size(); }
  bool empty() const { return v.empty(); }

  std::size_t index(int bi, int ci, int yi, int xi) const {
    return ((static_cast<std::size_t>(bi) * c + ci) * h + yi) * w + xi;
  }

  double& at(int bi, int ci, int yi, int xi) { return v[index(bi, ci, yi, xi)]; }
  double at(int bi, int ci, int yi, int xi) const { return v[index(bi, ci, yi, xi)]; }

  bool same_shape(const Tensor& o) const {
    return b == o.b && c == o.c && h == o.h && w == o.w;
  }

  bool all_finite() const {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }

  void fill(double value) {
    for (double& x : v) x = value;
  }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(what) + ": tensor shape mismatch");
}

}  // namespace hysod

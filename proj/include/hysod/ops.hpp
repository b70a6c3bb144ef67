#pragma once

#include <algorithm>
#include <cmath>

#include "hysod/autograd.hpp"

namespace hysod {

inline Var add(const Var& a, const Var& b) {
  require_same_shape(a->value, b->value, "add");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.numel(); ++i) out.v[i] += b->value.v[i];
  return make_node(std::move(out), {a, b}, [a, b](Node& n) {
    Tensor& ga = a->ensure_grad();
    Tensor& gb = b->ensure_grad();
    for (std::size_t i = 0; i < n.grad.numel(); ++i) {
      ga.v[i] += n.grad.v[i];
      gb.v[i] += n.grad.v[i];
    }
  });
}

/// scale * x + shift, elementwise.
inline Var affine(const Var& x, double scale, double shift) {
  Tensor out = x->value;
  for (double& v : out.v) v = scale * v + shift;
  return make_node(std::move(out), {x}, [x, scale](Node& n) {
    Tensor& gx = x->ensure_grad();
    for (std::size_t i = 0; i < n.grad.numel(); ++i) gx.v[i] += scale * n.grad.v[i];
  });
}

inline Var mul(const Var& a, const Var& b) {
  require_same_shape(a->value, b->value, "mul");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.numel(); ++i) out.v[i] *= b->value.v[i];
  return make_node(std::move(out), {a, b}, [a, b](Node& n) {
    Tensor& ga = a->ensure_grad();
    Tensor& gb = b->ensure_grad();
    for (std::size_t i = 0; i < n.grad.numel(); ++i) {
      ga.v[i] += n.grad.v[i] * b->value.v[i];
      gb.v[i] += n.grad.v[i] * a->value.v[i];
    }
  });
}

/// x * weights, weights shaped (B, C, 1, 1) and broadcast over H x W.
inline Var mul_channel(const Var& x, const Var& weights) {
  const Tensor& t = x->value;
  const Tensor& a = weights->value;
  if (a.b != t.b || a.c != t.c || a.h != 1 || a.w != 1)
    throw std::invalid_argument("mul_channel: weights must be (B, C, 1, 1)");
  Tensor out = t;
  for (int bi = 0; bi < t.b; ++bi)
    for (int ci = 0; ci < t.c; ++ci) {
      double s = a.at(bi, ci, 0, 0);
      double* row = &out.v[out.index(bi, ci, 0, 0)];
      for (int i = 0; i < t.h * t.w; ++i) row[i] *= s;
    }
  return make_node(std::move(out), {x, weights}, [x, weights](Node& n) {
    const Tensor& t = x->value;
    const Tensor& a = weights->value;
    Tensor& gx = x->ensure_grad();
    Tensor& ga = weights->ensure_grad();
    for (int bi = 0; bi < t.b; ++bi)
      for (int ci = 0; ci < t.c; ++ci) {
        double s = a.at(bi, ci, 0, 0);
        std::size_t base = t.index(bi, ci, 0, 0);
        double acc = 0.0;
        for (int i = 0; i < t.h * t.w; ++i) {
          gx.v[base + i] += n.grad.v[base + i] * s;
          acc += n.grad.v[base + i] * t.v[base + i];
        }
        ga.at(bi, ci, 0, 0) += acc;
      }
  });
}

/// x * mask, mask shaped (B, 1, H, W) and broadcast over channels.
inline Var mul_spatial(const Var& x, const Var& mask) {
  const Tensor& t = x->value;
  const Tensor& m = mask->value;
  if (m.b != t.b || m.c != 1 || m.h != t.h || m.w != t.w)
    throw std::invalid_argument("mul_spatial: mask must be (B, 1, H, W)");
  Tensor out = t;
  for (int bi = 0; bi < t.b; ++bi)
    for (int ci = 0; ci < t.c; ++ci)
      for (int yi = 0; yi < t.h; ++yi)
        for (int xi = 0; xi < t.w; ++xi)
          out.at(bi, ci, yi, xi) *= m.at(bi, 0, yi, xi);
  return make_node(std::move(out), {x, mask}, [x, mask](Node& n) {
    const Tensor& t = x->value;
    const Tensor& m = mask->value;
    Tensor& gx = x->ensure_grad();
    Tensor& gm = mask->ensure_grad();
    for (int bi = 0; bi < t.b; ++bi)
      for (int ci = 0; ci < t.c; ++ci)
        for (int yi = 0; yi < t.h; ++yi)
          for (int xi = 0; xi < t.w; ++xi) {
            double g = n.grad.at(bi, ci, yi, xi);
            gx.at(bi, ci, yi, xi) += g * m.at(bi, 0, yi, xi);
            gm.at(bi, 0, yi, xi) += g * t.at(bi, ci, yi, xi);
          }
  });
}

inline Var concat_channels(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_channels: empty input");
  const Tensor& first = xs[0]->value;
  int total_c = 0;
  for (const auto& x : xs) {
    const Tensor& t = x->value;
    if (t.b != first.b || t.h != first.h || t.w != first.w)
      throw std::invalid_argument("concat_channels: spatial/batch mismatch");
    total_c += t.c;
  }
  Tensor out(first.b, total_c, first.h, first.w);
  int c_off = 0;
  for (const auto& x : xs) {
    const Tensor& t = x->value;
    for (int bi = 0; bi < t.b; ++bi)
      for (int ci = 0; ci < t.c; ++ci)
        std::copy_n(&t.v[t.index(bi, ci, 0, 0)], t.h * t.w,
                    &out.v[out.index(bi, c_off + ci, 0, 0)]);
    c_off += t.c;
  }
  std::vector<Var> inputs = xs;
  return make_node(std::move(out), std::move(inputs), [xs](Node& n) {
    int c_off = 0;
    for (const auto& x : xs) {
      Tensor& gx = x->ensure_grad();
      const Tensor& t = x->value;
      for (int bi = 0; bi < t.b; ++bi)
        for (int ci = 0; ci < t.c; ++ci) {
          const double* src = &n.grad.v[n.grad.index(bi, c_off + ci, 0, 0)];
          double* dst = &gx.v[gx.index(bi, ci, 0, 0)];
          for (int i = 0; i < t.h * t.w; ++i) dst[i] += src[i];
        }
      c_off += t.c;
    }
  });
}

inline Var relu(const Var& x) {
  Tensor out = x->value;
  for (double& v : out.v) v = v > 0.0 ? v : 0.0;
  return make_node(std::move(out), {x}, [x](Node& n) {
    Tensor& gx = x->ensure_grad();
    for (std::size_t i = 0; i < n.grad.numel(); ++i)
      if (x->value.v[i] > 0.0) gx.v[i] += n.grad.v[i];
  });
}

inline Var sigmoid(const Var& x) {
  Tensor out = x->value;
  for (double& v : out.v) v = 1.0 / (1.0 + std::exp(-v));
  Tensor saved = out;
  return make_node(std::move(out), {x}, [x, saved](Node& n) {
    Tensor& gx = x->ensure_grad();
    for (std::size_t i = 0; i < n.grad.numel(); ++i) {
      double y = saved.v[i];
      gx.v[i] += n.grad.v[i] * y * (1.0 - y);
    }
  });
}

inline int conv_out_size(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

/// 2-D convolution. weight (Cout, Cin, K, K), bias (1, Cout, 1, 1).
inline Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
  const Tensor& t = x->value;
  const Tensor& wt = weight->value;
  const Tensor& bt = bias->value;
  if (wt.c != t.c) throw std::invalid_argument("conv2d: input channel mismatch");
  if (bt.b != 1 || bt.c != wt.b || bt.h != 1 || bt.w != 1)
    throw std::invalid_argument("conv2d: bias must be (1, Cout, 1, 1)");
  const int k = wt.h;
  const int oh = conv_out_size(t.h, k, stride, pad);
  const int ow = conv_out_size(t.w, k, stride, pad);
  if (oh <= 0 || ow <= 0) throw std::invalid_argument("conv2d: output would be empty");

  Tensor out(t.b, wt.b, oh, ow);
  for (int bi = 0; bi < t.b; ++bi)
    for (int co = 0; co < wt.b; ++co) {
      double bv = bt.at(0, co, 0, 0);
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = bv;
          for (int ci = 0; ci < t.c; ++ci)
            for (int ky = 0; ky < k; ++ky) {
              int yi = oy * stride + ky - pad;
              if (yi < 0 || yi >= t.h) continue;
              for (int kx = 0; kx < k; ++kx) {
                int xi = ox * stride + kx - pad;
                if (xi < 0 || xi >= t.w) continue;
                acc += t.at(bi, ci, yi, xi) * wt.at(co, ci, ky, kx);
              }
            }
          out.at(bi, co, oy, ox) = acc;
        }
    }

  return make_node(std::move(out), {x, weight, bias}, [x, weight, bias, stride, pad](Node& n) {
    const Tensor& t = x->value;
    const Tensor& wt = weight->value;
    const int k = wt.h;
    Tensor& gx = x->ensure_grad();
    Tensor& gw = weight->ensure_grad();
    Tensor& gb = bias->ensure_grad();
    const Tensor& go = n.grad;
    for (int bi = 0; bi < t.b; ++bi)
      for (int co = 0; co < wt.b; ++co)
        for (int oy = 0; oy < go.h; ++oy)
          for (int ox = 0; ox < go.w; ++ox) {
            double g = go.at(bi, co, oy, ox);
            if (g == 0.0) continue;
            gb.at(0, co, 0, 0) += g;
            for (int ci = 0; ci < t.c; ++ci)
              for (int ky = 0; ky < k; ++ky) {
                int yi = oy * stride + ky - pad;
                if (yi < 0 || yi >= t.h) continue;
                for (int kx = 0; kx < k; ++kx) {
                  int xi = ox * stride + kx - pad;
                  if (xi < 0 || xi >= t.w) continue;
                  gx.at(bi, ci, yi, xi) += g * wt.at(co, ci, ky, kx);
                  gw.at(co, ci, ky, kx) += g * t.at(bi, ci, yi, xi);
                }
              }
          }
  });
}

/// Bilinear resize to (oh, ow), half-pixel-center convention. Same-size calls
/// are the identity.
inline Var resize_bilinear(const Var& x, int oh, int ow) {
  const Tensor& t = x->value;
  if (oh == t.h && ow == t.w) return x;
  Tensor out(t.b, t.c, oh, ow);
  for (int oy = 0; oy < oh; ++oy) {
    LerpCoef ry = lerp_coef(t.h, oh, oy);
    for (int ox = 0; ox < ow; ++ox) {
      LerpCoef rx = lerp_coef(t.w, ow, ox);
      for (int bi = 0; bi < t.b; ++bi)
        for (int ci = 0; ci < t.c; ++ci)
          out.at(bi, ci, oy, ox) =
              ry.w_lo * (rx.w_lo * t.at(bi, ci, ry.lo, rx.lo) + rx.w_hi * t.at(bi, ci, ry.lo, rx.hi)) +
              ry.w_hi * (rx.w_lo * t.at(bi, ci, ry.hi, rx.lo) + rx.w_hi * t.at(bi, ci, ry.hi, rx.hi));
    }
  }
  return make_node(std::move(out), {x}, [x, oh, ow](Node& n) {
    const Tensor& t = x->value;
    Tensor& gx = x->ensure_grad();
    for (int oy = 0; oy < oh; ++oy) {
      LerpCoef ry = lerp_coef(t.h, oh, oy);
      for (int ox = 0; ox < ow; ++ox) {
        LerpCoef rx = lerp_coef(t.w, ow, ox);
        for (int bi = 0; bi < t.b; ++bi)
          for (int ci = 0; ci < t.c; ++ci) {
            double g = n.grad.at(bi, ci, oy, ox);
            gx.at(bi, ci, ry.lo, rx.lo) += g * ry.w_lo * rx.w_lo;
            gx.at(bi, ci, ry.lo, rx.hi) += g * ry.w_lo * rx.w_hi;
            gx.at(bi, ci, ry.hi, rx.lo) += g * ry.w_hi * rx.w_lo;
            gx.at(bi, ci, ry.hi, rx.hi) += g * ry.w_hi * rx.w_hi;
          }
      }
    }
  });
}

inline Var global_avg_pool(const Var& x) {
  const Tensor& t = x->value;
  Tensor out(t.b, t.c, 1, 1);
  const double inv = 1.0 / (t.h * t.w);
  for (int bi = 0; bi < t.b; ++bi)
    for (int ci = 0; ci < t.c; ++ci) {
      double acc = 0.0;
      const double* row = &t.v[t.index(bi, ci, 0, 0)];
      for (int i = 0; i < t.h * t.w; ++i) acc += row[i];
      out.at(bi, ci, 0, 0) = acc * inv;
    }
  return make_node(std::move(out), {x}, [x, inv](Node& n) {
    const Tensor& t = x->value;
    Tensor& gx = x->ensure_grad();
    for (int bi = 0; bi < t.b; ++bi)
      for (int ci = 0; ci < t.c; ++ci) {
        double g = n.grad.at(bi, ci, 0, 0) * inv;
        double* row = &gx.v[gx.index(bi, ci, 0, 0)];
        for (int i = 0; i < t.h * t.w; ++i) row[i] += g;
      }
  });
}

inline Var global_max_pool(const Var& x) {
  const Tensor& t = x->value;
  Tensor out(t.b, t.c, 1, 1);
  std::vector<int> argmax(static_cast<std::size_t>(t.b) * t.c);
  for (int bi = 0; bi < t.b; ++bi)
    for (int ci = 0; ci < t.c; ++ci) {
      const double* row = &t.v[t.index(bi, ci, 0, 0)];
      int best = 0;
      for (int i = 1; i < t.h * t.w; ++i)
        if (row[i] > row[best]) best = i;
      out.at(bi, ci, 0, 0) = row[best];
      argmax[static_cast<std::size_t>(bi) * t.c + ci] = best;
    }
  return make_node(std::move(out), {x}, [x, argmax](Node& n) {
    const Tensor& t = x->value;
    Tensor& gx = x->ensure_grad();
    for (int bi = 0; bi < t.b; ++bi)
      for (int ci = 0; ci < t.c; ++ci)
        gx.v[gx.index(bi, ci, 0, 0) + argmax[static_cast<std::size_t>(bi) * t.c + ci]] +=
            n.grad.at(bi, ci, 0, 0);
  });
}

/// Per-position mean over channels -> (B, 1, H, W).
inline Var channel_mean(const Var& x) {
  const Tensor& t = x->value;
  Tensor out(t.b, 1, t.h, t.w);
  const double inv = 1.0 / t.c;
  for (int bi = 0; bi < t.b; ++bi)
    for (int ci = 0; ci < t.c; ++ci)
      for (int yi = 0; yi < t.h; ++yi)
        for (int xi = 0; xi < t.w; ++xi)
          out.at(bi, 0, yi, xi) += t.at(bi, ci, yi, xi) * inv;
  return make_node(std::move(out), {x}, [x, inv](Node& n) {
    const Tensor& t = x->value;
    Tensor& gx = x->ensure_grad();
    for (int bi = 0; bi < t.b; ++bi)
      for (int ci = 0; ci < t.c; ++ci)
        for (int yi = 0; yi < t.h; ++yi)
          for (int xi = 0; xi < t.w; ++xi)
            gx.at(bi, ci, yi, xi) += n.grad.at(bi, 0, yi, xi) * inv;
  });
}

/// Per-position max over channels -> (B, 1, H, W).
inline Var channel_max(const Var& x) {
  const Tensor& t = x->value;
  Tensor out(t.b, 1, t.h, t.w);
  std::vector<int> argmax(static_cast<std::size_t>(t.b) * t.h * t.w);
  for (int bi = 0; bi < t.b; ++bi)
    for (int yi = 0; yi < t.h; ++yi)
      for (int xi = 0; xi < t.w; ++xi) {
        int best = 0;
        double bv = t.at(bi, 0, yi, xi);
        for (int ci = 1; ci < t.c; ++ci) {
          double v = t.at(bi, ci, yi, xi);
          if (v > bv) {
            bv = v;
            best = ci;
          }
        }
        out.at(bi, 0, yi, xi) = bv;
        argmax[(static_cast<std::size_t>(bi) * t.h + yi) * t.w + xi] = best;
      }
  return make_node(std::move(out), {x}, [x, argmax](Node& n) {
    const Tensor& t = x->value;
    Tensor& gx = x->ensure_grad();
    for (int bi = 0; bi < t.b; ++bi)
      for (int yi = 0; yi < t.h; ++yi)
        for (int xi = 0; xi < t.w; ++xi) {
          int ci = argmax[(static_cast<std::size_t>(bi) * t.h + yi) * t.w + xi];
          gx.at(bi, ci, yi, xi) += n.grad.at(bi, 0, yi, xi);
        }
  });
}

}  // namespace hysod

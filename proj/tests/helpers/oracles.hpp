// Test-side reference implementations, kept independent of the library code
// paths they check.
#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <unistd.h>
#include <vector>

#include "hysod/image.hpp"
#include "hysod/nn.hpp"
#include "hysod/tensor.hpp"

namespace oracles {

// Scalar mean BCE with clamping, written as a plain loop.
inline double bce(const std::vector<double>& pred, const std::vector<double>& label,
                  double eps = 1e-7) {
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    double p = std::min(std::max(pred[i], eps), 1.0 - eps);
    acc -= label[i] * std::log(p) + (1.0 - label[i]) * std::log(1.0 - p);
  }
  return acc / static_cast<double>(pred.size());
}

// Brute-force per-threshold counting with direct comparisons.
struct PrOracle {
  std::vector<double> precision = std::vector<double>(256, 0.0);
  std::vector<double> recall = std::vector<double>(256, 0.0);
};

inline PrOracle pr_curve(const std::vector<hysod::Map>& preds, const std::vector<hysod::Map>& gts) {
  PrOracle out;
  for (int t = 0; t < 256; ++t) {
    double threshold = t / 255.0;
    double p_sum = 0.0, r_sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      long long tp = 0, fp = 0, fn = 0;
      for (std::size_t px = 0; px < preds[i].v.size(); ++px) {
        bool pos = preds[i].v[px] >= threshold;
        bool gt_pos = gts[i].v[px] >= 0.5;
        if (pos && gt_pos) ++tp;
        if (pos && !gt_pos) ++fp;
        if (!pos && gt_pos) ++fn;
      }
      p_sum += tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
      r_sum += tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    }
    out.precision[t] = p_sum / static_cast<double>(preds.size());
    out.recall[t] = r_sum / static_cast<double>(preds.size());
  }
  return out;
}

inline double max_f(const PrOracle& curve, double beta2 = 0.3) {
  double best = 0.0;
  for (int t = 0; t < 256; ++t) {
    double denom = beta2 * curve.precision[t] + curve.recall[t];
    double f = denom > 0.0 ? (1.0 + beta2) * curve.precision[t] * curve.recall[t] / denom : 0.0;
    best = std::max(best, f);
  }
  return best;
}

// Structure measure translated literally from the reference definition
// (1-based centroid rounding, N-1 normalizations, machine-epsilon guards).
namespace sm {

inline double mean2(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

inline double object_term(const std::vector<double>& values) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  if (values.empty()) return 0.0;
  double x = mean2(values);
  double sq = 0.0;
  for (double v : values) sq += (v - x) * (v - x);
  double sigma = values.size() > 1 ? std::sqrt(sq / (static_cast<double>(values.size()) - 1.0)) : 0.0;
  return 2.0 * x / (x * x + 1.0 + sigma + eps);
}

inline double s_object(const hysod::Map& pred, const hysod::Map& gt) {
  std::vector<double> fg_vals, bg_vals;
  for (std::size_t i = 0; i < pred.v.size(); ++i) {
    if (gt.v[i] >= 0.5)
      fg_vals.push_back(pred.v[i]);
    else
      bg_vals.push_back(1.0 - pred.v[i]);
  }
  double u = mean2(gt.v);
  return u * object_term(fg_vals) + (1.0 - u) * object_term(bg_vals);
}

inline double ssim_block(const std::vector<double>& x, const std::vector<double>& y) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  double n = static_cast<double>(x.size());
  double mx = mean2(x), my = mean2(y);
  double vx = 0.0, vy = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
    cov += (x[i] - mx) * (y[i] - my);
  }
  vx /= n - 1.0 + eps;
  vy /= n - 1.0 + eps;
  cov /= n - 1.0 + eps;
  double alpha = 4.0 * mx * my * cov;
  double beta = (mx * mx + my * my) * (vx + vy);
  if (alpha != 0.0) return alpha / (beta + eps);
  if (beta == 0.0) return 1.0;
  return 0.0;
}

inline double s_region(const hysod::Map& pred, const hysod::Map& gt) {
  double total = 0.0, sx = 0.0, sy = 0.0;
  for (int y = 0; y < gt.h; ++y)
    for (int x = 0; x < gt.w; ++x)
      if (gt.at(y, x) >= 0.5) {
        total += 1.0;
        sx += x + 1.0;  // 1-based, as in the reference
        sy += y + 1.0;
      }
  int cut_x, cut_y;
  if (total == 0.0) {
    cut_x = static_cast<int>(std::lround(gt.w / 2.0));
    cut_y = static_cast<int>(std::lround(gt.h / 2.0));
  } else {
    cut_x = static_cast<int>(std::lround(sx / total));
    cut_y = static_cast<int>(std::lround(sy / total));
  }

  auto block = [&](const hysod::Map& m, int y0, int y1, int x0, int x1) {
    std::vector<double> vals;
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) vals.push_back(m.at(y, x));
    return vals;
  };
  struct Quad { int y0, y1, x0, x1; };
  Quad quads[4] = {{0, cut_y, 0, cut_x},
                   {0, cut_y, cut_x, gt.w},
                   {cut_y, gt.h, 0, cut_x},
                   {cut_y, gt.h, cut_x, gt.w}};
  double weights[4];
  double area = static_cast<double>(gt.h) * gt.w;
  for (int i = 0; i < 3; ++i)
    weights[i] = static_cast<double>((quads[i].y1 - quads[i].y0) * (quads[i].x1 - quads[i].x0)) / area;
  weights[3] = 1.0 - weights[0] - weights[1] - weights[2];

  double score = 0.0;
  for (int i = 0; i < 4; ++i) {
    auto px = block(pred, quads[i].y0, quads[i].y1, quads[i].x0, quads[i].x1);
    auto gx = block(gt, quads[i].y0, quads[i].y1, quads[i].x0, quads[i].x1);
    if (!px.empty()) score += weights[i] * ssim_block(px, gx);
  }
  return score;
}

}  // namespace sm

inline double s_measure(const hysod::Map& pred, const hysod::Map& gt, double alpha = 0.5) {
  double y = sm::mean2(gt.v);
  double q;
  if (y == 0.0)
    q = 1.0 - sm::mean2(pred.v);
  else if (y == 1.0)
    q = sm::mean2(pred.v);
  else
    q = alpha * sm::s_object(pred, gt) + (1.0 - alpha) * sm::s_region(pred, gt);
  return std::clamp(q, 0.0, 1.0);
}

// Exact minimum barrier distance by breadth-first search over
// (pixel, path-min, path-max) states; exact for maps with few distinct
// values.
inline hysod::Map exact_mbd(const hysod::Map& gray) {
  const int h = gray.h, w = gray.w;
  std::vector<double> values(gray.v.begin(), gray.v.end());
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  const int nv = static_cast<int>(values.size());
  auto value_index = [&](double v) {
    return static_cast<int>(std::lower_bound(values.begin(), values.end(), v) - values.begin());
  };

  // state = ((y * w + x) * nv + lo) * nv + hi
  std::vector<char> seen(static_cast<std::size_t>(h) * w * nv * nv, 0);
  std::deque<std::array<int, 4>> queue;
  auto push = [&](int y, int x, int lo, int hi) {
    std::size_t idx = ((static_cast<std::size_t>(y) * w + x) * nv + lo) * nv + hi;
    if (seen[idx]) return;
    seen[idx] = 1;
    queue.push_back({y, x, lo, hi});
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (y == 0 || y == h - 1 || x == 0 || x == w - 1) {
        int vi = value_index(gray.at(y, x));
        push(y, x, vi, vi);
      }
  const int dy[4] = {-1, 1, 0, 0};
  const int dx[4] = {0, 0, -1, 1};
  while (!queue.empty()) {
    auto [y, x, lo, hi] = queue.front();
    queue.pop_front();
    for (int d = 0; d < 4; ++d) {
      int ny = y + dy[d], nx = x + dx[d];
      if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
      int vi = value_index(gray.at(ny, nx));
      push(ny, nx, std::min(lo, vi), std::max(hi, vi));
    }
  }
  hysod::Map dist(h, w, std::numeric_limits<double>::infinity());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int lo = 0; lo < nv; ++lo)
        for (int hi = lo; hi < nv; ++hi) {
          std::size_t idx = ((static_cast<std::size_t>(y) * w + x) * nv + lo) * nv + hi;
          if (seen[idx]) dist.at(y, x) = std::min(dist.at(y, x), values[hi] - values[lo]);
        }
  return dist;
}

// Reference bilinear interpolation (half-pixel centers), plain loops.
inline hysod::Map bilinear(const hysod::Map& src, int oh, int ow) {
  hysod::Map out(oh, ow);
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox) {
      double sy = (oy + 0.5) * (static_cast<double>(src.h) / oh) - 0.5;
      double sx = (ox + 0.5) * (static_cast<double>(src.w) / ow) - 0.5;
      sy = std::clamp(sy, 0.0, static_cast<double>(src.h - 1));
      sx = std::clamp(sx, 0.0, static_cast<double>(src.w - 1));
      int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
      int y1 = std::min(y0 + 1, src.h - 1), x1 = std::min(x0 + 1, src.w - 1);
      double fy = sy - y0, fx = sx - x0;
      out.at(oy, ox) = (1 - fy) * ((1 - fx) * src.at(y0, x0) + fx * src.at(y0, x1)) +
                       fy * ((1 - fx) * src.at(y1, x0) + fx * src.at(y1, x1));
    }
  return out;
}

// Central finite differences over every entry of every parameter.
// Returns the worst relative error, with |a - f| compared absolutely when both
// magnitudes are tiny.
inline double max_grad_error(const std::vector<hysod::Parameter*>& params,
                             const std::function<double()>& loss_fn,
                             const std::function<void()>& backward_fn, double h = 1e-5) {
  for (auto* p : params) p->zero_grad();
  backward_fn();
  std::vector<hysod::Tensor> analytic;
  for (auto* p : params) analytic.push_back(p->grad);

  double worst = 0.0;
  hysod::NoGrad guard;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    hysod::Parameter& p = *params[pi];
    for (std::size_t i = 0; i < p.value.numel(); ++i) {
      double saved = p.value.v[i];
      double step = h * std::max(1.0, std::abs(saved));
      p.value.v[i] = saved + step;
      double up = loss_fn();
      p.value.v[i] = saved - step;
      double down = loss_fn();
      p.value.v[i] = saved;
      double numeric = (up - down) / (2.0 * step);
      double a = analytic[pi].v[i];
      double scale = std::max(std::abs(a), std::abs(numeric));
      double err = scale > 1e-6 ? std::abs(a - numeric) / scale : std::abs(a - numeric) * 1e2;
      worst = std::max(worst, err);
    }
  }
  for (auto* p : params) p->zero_grad();
  return worst;
}

// Deterministic fillers for test fixtures.
inline void fill_uniform(hysod::Tensor& t, hysod::Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (double& v : t.v) v = rng.uniform(lo, hi);
}

inline hysod::Map random_map(hysod::Rng& rng, int h, int w) {
  hysod::Map m(h, w);
  for (double& v : m.v) v = rng.uniform();
  return m;
}

inline hysod::Map random_binary_map(hysod::Rng& rng, int h, int w) {
  hysod::Map m(h, w);
  for (double& v : m.v) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
  return m;
}

// Unique scratch directory under the system temp root, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("hysod_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

private:
  std::filesystem::path path_;
};

}  // namespace oracles

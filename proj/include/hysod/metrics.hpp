#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "hysod/data.hpp"

namespace hysod {

inline constexpr int kPrThresholdCount = 256;
inline constexpr double kFMeasureBeta2 = 0.3;
inline constexpr double kGtBinarizeThreshold = 128.0 / 255.0;

inline double mae(const Map& pred, const Map& gt) {
  if (!pred.same_shape(gt)) throw std::invalid_argument("mae: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.v.size(); ++i) acc += std::abs(pred.v[i] - gt.v[i]);
  return acc / static_cast<double>(pred.v.size());
}

inline Map binarize(const Map& m, double threshold = kGtBinarizeThreshold) {
  Map out(m.h, m.w);
  for (std::size_t i = 0; i < m.v.size(); ++i) out.v[i] = m.v[i] >= threshold ? 1.0 : 0.0;
  return out;
}

struct PrPoint {
  double threshold = 0.0;
  double precision = 1.0;
  double recall = 0.0;
};

inline const std::array<double, kPrThresholdCount>& pr_thresholds() {
  static const std::array<double, kPrThresholdCount> thresholds = [] {
    std::array<double, kPrThresholdCount> t{};
    for (int i = 0; i < kPrThresholdCount; ++i) t[i] = i / 255.0;
    return t;
  }();
  return thresholds;
}

/// Per-image TP/FP/FN counts at the 256 thresholds i/255, binarizing the
/// prediction with >=. Empty-denominator conventions: precision 1, recall 0.
struct PrCounts {
  std::array<long long, kPrThresholdCount> tp{}, fp{}, fn{};

  void accumulate(const Map& pred, const Map& gt) {
    if (!pred.same_shape(gt)) throw std::invalid_argument("pr_curve: shape mismatch");
    const auto& thr = pr_thresholds();
    // Histogram by the last threshold index each pixel still clears; suffix
    // sums then give exact per-threshold counts.
    std::array<long long, kPrThresholdCount + 1> hist_fg{}, hist_bg{};
    long long total_fg = 0;
    for (std::size_t i = 0; i < pred.v.size(); ++i) {
      bool positive_gt = gt.v[i] >= 0.5;
      int last_positive =
          static_cast<int>(std::upper_bound(thr.begin(), thr.end(), pred.v[i]) - thr.begin()) - 1;
      if (positive_gt) {
        ++total_fg;
        ++hist_fg[last_positive + 1];
      } else {
        ++hist_bg[last_positive + 1];
      }
    }
    long long fg_tail = 0, bg_tail = 0;
    for (int t = kPrThresholdCount - 1; t >= 0; --t) {
      fg_tail += hist_fg[t + 1];
      bg_tail += hist_bg[t + 1];
      tp[t] += fg_tail;
      fp[t] += bg_tail;
      fn[t] += total_fg - fg_tail;
    }
  }

  void add_to(std::array<double, kPrThresholdCount>& precision_sum,
              std::array<double, kPrThresholdCount>& recall_sum) const {
    for (int t = 0; t < kPrThresholdCount; ++t) {
      precision_sum[t] += tp[t] + fp[t] > 0
                              ? static_cast<double>(tp[t]) / static_cast<double>(tp[t] + fp[t])
                              : 1.0;
      recall_sum[t] += tp[t] + fn[t] > 0
                           ? static_cast<double>(tp[t]) / static_cast<double>(tp[t] + fn[t])
                           : 0.0;
    }
  }
};

/// Cross-image averaged precision/recall curve over 256 thresholds.
inline std::vector<PrPoint> pr_curve(const std::vector<Map>& preds, const std::vector<Map>& gts) {
  if (preds.empty() || preds.size() != gts.size())
    throw std::invalid_argument("pr_curve: empty or mismatched prediction/gt lists");
  std::array<double, kPrThresholdCount> precision_sum{}, recall_sum{};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    PrCounts counts;
    counts.accumulate(preds[i], gts[i]);
    counts.add_to(precision_sum, recall_sum);
  }
  std::vector<PrPoint> curve(kPrThresholdCount);
  for (int t = 0; t < kPrThresholdCount; ++t) {
    curve[t].threshold = t / 255.0;
    curve[t].precision = precision_sum[t] / static_cast<double>(preds.size());
    curve[t].recall = recall_sum[t] / static_cast<double>(preds.size());
  }
  return curve;
}

/// Max F-measure over the curve; zero denominators score 0.
inline double max_f(const std::vector<PrPoint>& curve, double beta2 = kFMeasureBeta2) {
  double best = 0.0;
  for (const auto& pt : curve) {
    double denom = beta2 * pt.precision + pt.recall;
    double f = denom > 0.0 ? (1.0 + beta2) * pt.precision * pt.recall / denom : 0.0;
    best = std::max(best, f);
  }
  return best;
}

namespace smeasure_detail {

inline double mean_of(const Map& m) {
  double acc = 0.0;
  for (double v : m.v) acc += v;
  return acc / static_cast<double>(m.v.size());
}

// Similarity of prediction values over one region: 2 x̄ / (x̄² + 1 + σ_x).
inline double object_score(const Map& pred, const Map& mask) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  double sum = 0.0;
  long long n = 0;
  for (std::size_t i = 0; i < pred.v.size(); ++i)
    if (mask.v[i] >= 0.5) {
      sum += pred.v[i];
      ++n;
    }
  if (n == 0) return 0.0;
  double mean = sum / static_cast<double>(n);
  double sq = 0.0;
  for (std::size_t i = 0; i < pred.v.size(); ++i)
    if (mask.v[i] >= 0.5) sq += (pred.v[i] - mean) * (pred.v[i] - mean);
  double sd = n > 1 ? std::sqrt(sq / static_cast<double>(n - 1)) : 0.0;
  return 2.0 * mean / (mean * mean + 1.0 + sd + eps);
}

inline double s_object(const Map& pred, const Map& gt) {
  Map pred_fg = pred;
  Map pred_bg(pred.h, pred.w);
  Map gt_inv(gt.h, gt.w);
  for (std::size_t i = 0; i < pred.v.size(); ++i) {
    bool fg = gt.v[i] >= 0.5;
    pred_fg.v[i] = fg ? pred.v[i] : 0.0;
    pred_bg.v[i] = fg ? 0.0 : 1.0 - pred.v[i];
    gt_inv.v[i] = fg ? 0.0 : 1.0;
  }
  double u = mean_of(gt);
  return u * object_score(pred_fg, gt) + (1.0 - u) * object_score(pred_bg, gt_inv);
}

// Foreground centroid with 1-based rounding semantics; returns 0-based cut
// sizes (number of rows/columns in the top/left blocks).
inline void centroid_cut(const Map& gt, int& cut_y, int& cut_x) {
  double total = 0.0;
  for (double v : gt.v) total += v >= 0.5 ? 1.0 : 0.0;
  if (total == 0.0) {
    cut_x = static_cast<int>(std::lround(gt.w / 2.0));
    cut_y = static_cast<int>(std::lround(gt.h / 2.0));
    return;
  }
  double sx = 0.0, sy = 0.0;
  for (int y = 0; y < gt.h; ++y)
    for (int x = 0; x < gt.w; ++x)
      if (gt.at(y, x) >= 0.5) {
        sx += x + 1.0;
        sy += y + 1.0;
      }
  cut_x = static_cast<int>(std::lround(sx / total));
  cut_y = static_cast<int>(std::lround(sy / total));
}

struct Quadrant {
  int y0, y1, x0, x1;  // half-open
  long long area() const { return static_cast<long long>(y1 - y0) * (x1 - x0); }
};

inline double ssim_region(const Map& pred, const Map& gt, const Quadrant& q) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  long long n = q.area();
  if (n == 0) return 0.0;
  double mx = 0.0, my = 0.0;
  for (int y = q.y0; y < q.y1; ++y)
    for (int x = q.x0; x < q.x1; ++x) {
      mx += pred.at(y, x);
      my += gt.at(y, x);
    }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double vx = 0.0, vy = 0.0, cov = 0.0;
  for (int y = q.y0; y < q.y1; ++y)
    for (int x = q.x0; x < q.x1; ++x) {
      double dx = pred.at(y, x) - mx;
      double dy = gt.at(y, x) - my;
      vx += dx * dx;
      vy += dy * dy;
      cov += dx * dy;
    }
  double denom_n = static_cast<double>(n) - 1.0 + eps;
  vx /= denom_n;
  vy /= denom_n;
  cov /= denom_n;
  double alpha = 4.0 * mx * my * cov;
  double beta = (mx * mx + my * my) * (vx + vy);
  if (alpha != 0.0) return alpha / (beta + eps);
  if (beta == 0.0) return 1.0;
  return 0.0;
}

inline double s_region(const Map& pred, const Map& gt) {
  int cut_y = 0, cut_x = 0;
  centroid_cut(gt, cut_y, cut_x);
  cut_y = std::clamp(cut_y, 0, gt.h);
  cut_x = std::clamp(cut_x, 0, gt.w);
  Quadrant quads[4] = {
      {0, cut_y, 0, cut_x},          // top-left
      {0, cut_y, cut_x, gt.w},       // top-right
      {cut_y, gt.h, 0, cut_x},       // bottom-left
      {cut_y, gt.h, cut_x, gt.w}};   // bottom-right
  double total_area = static_cast<double>(gt.h) * gt.w;
  double score = 0.0;
  double w_acc = 0.0;
  for (int i = 0; i < 3; ++i) {
    double wgt = quads[i].area() / total_area;
    w_acc += wgt;
    if (quads[i].area() > 0) score += wgt * ssim_region(pred, gt, quads[i]);
  }
  double w4 = 1.0 - w_acc;
  if (quads[3].area() > 0) score += w4 * ssim_region(pred, gt, quads[3]);
  return score;
}

}  // namespace smeasure_detail

/// Structure measure: alpha * object similarity + (1 - alpha) * region
/// similarity, with the all-background / all-foreground degenerate conventions
/// of the reference definition. Clamped to [0, 1].
inline double s_measure(const Map& pred, const Map& gt, double alpha = 0.5) {
  if (!pred.same_shape(gt)) throw std::invalid_argument("s_measure: shape mismatch");
  double y = smeasure_detail::mean_of(gt);
  double q;
  if (y == 0.0)
    q = 1.0 - smeasure_detail::mean_of(pred);
  else if (y == 1.0)
    q = smeasure_detail::mean_of(pred);
  else
    q = alpha * smeasure_detail::s_object(pred, gt) +
        (1.0 - alpha) * smeasure_detail::s_region(pred, gt);
  return std::clamp(q, 0.0, 1.0);
}

struct PerImageMetrics {
  std::string id;
  double mae = 0.0;
  double s_measure = 0.0;
};

struct MetricsReport {
  std::string dataset;
  int n = 0;
  double mae = 0.0;
  double max_f = 0.0;
  double s_measure = 0.0;
  std::vector<PrPoint> pr;
  std::vector<PerImageMetrics> per_image;

  json to_json() const {
    json pr_json = json::array();
    for (const auto& pt : pr)
      pr_json.push_back({{"t", pt.threshold}, {"p", pt.precision}, {"r", pt.recall}});
    json j{{"dataset", dataset}, {"n", n},           {"mae", mae},
           {"max_f", max_f},     {"s_measure", s_measure}, {"pr", std::move(pr_json)}};
    if (!per_image.empty()) {
      json per = json::array();
      for (const auto& pi : per_image)
        per.push_back({{"id", pi.id}, {"mae", pi.mae}, {"s_measure", pi.s_measure}});
      j["per_image"] = std::move(per);
    }
    return j;
  }

  std::string table() const {
    std::ostringstream os;
    os << std::left << std::setw(16) << "dataset" << std::setw(8) << "n" << std::setw(10)
       << "max_f" << std::setw(10) << "s_m" << std::setw(10) << "mae" << "\n";
    os << std::left << std::setw(16) << dataset << std::setw(8) << n << std::fixed
       << std::setprecision(4) << std::setw(10) << max_f << std::setw(10) << s_measure
       << std::setw(10) << mae << "\n";
    return os.str();
  }

  void write_pr_csv(std::ostream& os) const {
    os << "threshold,precision,recall\n";
    for (const auto& pt : pr)
      os << pt.threshold << "," << pt.precision << "," << pt.recall << "\n";
  }
};

/// Corpus evaluation over matching filenames: predictions are resized to the
/// ground-truth size when needed, ground truths binarized at 128/255.
/// Unmatched files are reported through `warnings` and skipped.
inline MetricsReport evaluate_corpus(const fs::path& pred_dir, const fs::path& gt_dir,
                                     const std::string& dataset_name = "",
                                     bool keep_per_image = false,
                                     std::vector<std::string>* warnings = nullptr,
                                     int num_threads = 0) {
  auto pred_ids = list_png_ids(pred_dir);
  auto gt_ids = list_png_ids(gt_dir);
  std::vector<std::string> common;
  std::set_intersection(pred_ids.begin(), pred_ids.end(), gt_ids.begin(), gt_ids.end(),
                        std::back_inserter(common));
  if (warnings) {
    for (const auto& id : pred_ids)
      if (!std::binary_search(gt_ids.begin(), gt_ids.end(), id))
        warnings->push_back("prediction without ground truth: " + id);
    for (const auto& id : gt_ids)
      if (!std::binary_search(pred_ids.begin(), pred_ids.end(), id))
        warnings->push_back("ground truth without prediction: " + id);
  }
  if (common.empty()) throw DataError("no matching prediction/ground-truth pairs");

  struct Row {
    double mae = 0.0, sm = 0.0;
    PrCounts counts;
  };
  std::vector<Row> rows(common.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Map pred = load_map_png(pred_dir / (common[i] + ".png"));
      Map gt = binarize(load_map_png(gt_dir / (common[i] + ".png")));
      if (!pred.same_shape(gt)) {
        pred = resize_bilinear(pred, gt.h, gt.w);
        clamp_map(pred);
      }
      rows[i].mae = mae(pred, gt);
      rows[i].sm = s_measure(pred, gt);
      rows[i].counts.accumulate(pred, gt);
    }
  };
  int threads = num_threads > 0 ? num_threads
                                : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min<int>(threads, static_cast<int>(common.size()));
  if (threads <= 1) {
    work(0, common.size());
  } else {
    std::vector<std::thread> pool;
    std::size_t chunk = (common.size() + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      std::size_t begin = t * chunk;
      std::size_t end = std::min(common.size(), begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  // Serial reduce in id order keeps results independent of thread scheduling.
  MetricsReport report;
  report.dataset = dataset_name.empty() ? gt_dir.filename().string() : dataset_name;
  report.n = static_cast<int>(common.size());
  std::array<double, kPrThresholdCount> precision_sum{}, recall_sum{};
  for (std::size_t i = 0; i < common.size(); ++i) {
    report.mae += rows[i].mae;
    report.s_measure += rows[i].sm;
    rows[i].counts.add_to(precision_sum, recall_sum);
    if (keep_per_image) report.per_image.push_back({common[i], rows[i].mae, rows[i].sm});
  }
  report.mae /= static_cast<double>(common.size());
  report.s_measure /= static_cast<double>(common.size());
  report.pr.resize(kPrThresholdCount);
  for (int t = 0; t < kPrThresholdCount; ++t) {
    report.pr[t].threshold = t / 255.0;
    report.pr[t].precision = precision_sum[t] / static_cast<double>(common.size());
    report.pr[t].recall = recall_sum[t] / static_cast<double>(common.size());
  }
  report.max_f = max_f(report.pr);
  return report;
}

}  // namespace hysod

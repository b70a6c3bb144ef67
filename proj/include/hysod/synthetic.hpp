#pragma once

#include <filesystem>
#include <string>

#include "hysod/data.hpp"

namespace hysod {

struct SyntheticOptions {
  int count = 200;
  int size = 48;
  std::uint64_t seed = 7;
  std::string prefix = "s";
};

namespace synth_detail {

struct Shape {
  int kind = 0;  // 0 rectangle, 1 ellipse
  double cy = 0, cx = 0, ry = 0, rx = 0;

  bool contains(int y, int x) const {
    if (kind == 0) return std::abs(y - cy) <= ry && std::abs(x - cx) <= rx;
    double dy = (y - cy) / ry, dx = (x - cx) / rx;
    return dy * dy + dx * dx <= 1.0;
  }
};

inline Shape random_shape(Rng& rng, int size) {
  Shape s;
  s.kind = rng.uniform_int(2);
  s.cy = rng.uniform(0.22, 0.78) * size;
  s.cx = rng.uniform(0.22, 0.78) * size;
  s.ry = rng.uniform(0.10, 0.26) * size;
  s.rx = rng.uniform(0.10, 0.26) * size;
  return s;
}

inline Map dilate(const Map& m, int radius) {
  Map out(m.h, m.w);
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x) {
      double best = 0.0;
      for (int dy = -radius; dy <= radius && best < 0.5; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
          int yy = y + dy, xx = x + dx;
          if (yy >= 0 && yy < m.h && xx >= 0 && xx < m.w && m.at(yy, xx) >= 0.5) {
            best = 1.0;
            break;
          }
        }
      out.at(y, x) = best;
    }
  return out;
}

inline Map box_blur(const Map& m, int radius) {
  Map out(m.h, m.w);
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x) {
      double acc = 0.0;
      int n = 0;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
          int yy = y + dy, xx = x + dx;
          if (yy >= 0 && yy < m.h && xx >= 0 && xx < m.w) {
            acc += m.at(yy, xx);
            ++n;
          }
        }
      out.at(y, x) = acc / n;
    }
  return out;
}

}  // namespace synth_detail

/// One synthetic sample mimicking the hybrid-label setting. Scenes are
/// deliberately varied -- shaded backgrounds, up to two dimmer distractor
/// shapes, wide color ranges -- so a handful of real labels cannot cover the
/// appearance distribution. The ground truth masks only the brightest
/// (salient) shape. The coarse label behaves like an unsupervised method's
/// output: a soft, halo-edged blob that frequently swallows distractors,
/// sometimes latches onto the wrong object entirely, and carries patch noise.
struct SyntheticSample {
  Image image;
  Map ground_truth;
  Map coarse;
};

inline SyntheticSample make_synthetic_sample(int size, std::uint64_t seed) {
  using synth_detail::Shape;
  Rng rng(seed);
  SyntheticSample out;
  out.image = Image(size, size);
  out.ground_truth = Map(size, size);

  // Shaded background; the salient color is the brightest thing in its own
  // image, but ranges overlap across images, so the cue is relative.
  double bg[3], fg[3], grad_y[3], grad_x[3];
  for (int c = 0; c < 3; ++c) {
    bg[c] = rng.uniform(0.04, 0.30);
    fg[c] = rng.uniform(0.55, 0.95);
    grad_y[c] = rng.uniform(-0.12, 0.12) / size;
    grad_x[c] = rng.uniform(-0.12, 0.12) / size;
  }
  Shape salient = synth_detail::random_shape(rng, size);
  int num_distractors = rng.uniform_int(10) < 1 ? 0 : 1 + rng.uniform_int(2);
  Shape distractors[2];
  double dim[2][3];
  for (int d = 0; d < num_distractors; ++d) {
    distractors[d] = synth_detail::random_shape(rng, size);
    double factor = rng.uniform(0.50, 0.85);
    for (int c = 0; c < 3; ++c) dim[d][c] = fg[c] * factor;
  }

  Map distractor_mask(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      bool in_salient = salient.contains(y, x);
      int hit = -1;
      if (!in_salient)
        for (int d = 0; d < num_distractors && hit < 0; ++d)
          if (distractors[d].contains(y, x)) hit = d;
      out.ground_truth.at(y, x) = in_salient ? 1.0 : 0.0;
      distractor_mask.at(y, x) = hit >= 0 ? 1.0 : 0.0;
      for (int c = 0; c < 3; ++c) {
        double base = in_salient
                          ? fg[c]
                          : (hit >= 0 ? dim[hit][c] : bg[c] + grad_y[c] * y + grad_x[c] * x);
        out.image.at(c, y, x) = clamp01(base + 0.05 * rng.normal());
      }
    }

  // Coarse label: a plausible unsupervised result -- a soft, halo-edged map
  // rather than a crisp mask. A third of the maps latch onto the wrong
  // object, another quarter swallow the distractors too; the rest are merely
  // dilated. Patch noise on top.
  double mode = rng.uniform();
  if (num_distractors > 0 && mode < 0.35) {
    out.coarse = synth_detail::dilate(distractor_mask, 1 + rng.uniform_int(2));
  } else {
    out.coarse = synth_detail::dilate(out.ground_truth, 1 + rng.uniform_int(3));
    if (num_distractors > 0 && mode < 0.60) {
      Map extra = synth_detail::dilate(distractor_mask, 1);
      for (std::size_t i = 0; i < extra.v.size(); ++i)
        if (extra.v[i] >= 0.5) out.coarse.v[i] = 1.0;
    }
  }
  out.coarse = synth_detail::box_blur(out.coarse, 1 + rng.uniform_int(2));
  int patches = 2 + rng.uniform_int(3);
  for (int p = 0; p < patches; ++p) {
    int ph = 2 + rng.uniform_int(4), pw = 2 + rng.uniform_int(4);
    int py = rng.uniform_int(std::max(1, size - ph)), px = rng.uniform_int(std::max(1, size - pw));
    for (int y = py; y < std::min(size, py + ph); ++y)
      for (int x = px; x < std::min(size, px + pw); ++x)
        out.coarse.at(y, x) = 1.0 - out.coarse.at(y, x);
  }
  return out;
}

/// Writes a synthetic corpus in the dataset layout. Every image gets a coarse
/// label; real labels are written for the first `real_labels` ids (all of
/// them when real_labels < 0, as validation sets need).
inline void generate_synthetic_dataset(const fs::path& root, const SyntheticOptions& options,
                                       int real_labels = -1) {
  fs::create_directories(images_dir(root));
  fs::create_directories(labels_real_dir(root));
  fs::create_directories(labels_coarse_dir(root));
  for (int i = 0; i < options.count; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%s%04d", options.prefix.c_str(), i);
    std::string id(buf);
    SyntheticSample s = make_synthetic_sample(options.size, seed_for(options.seed, "synth", i));
    save_image_png(images_dir(root) / (id + ".png"), s.image);
    save_map_png(labels_coarse_dir(root) / (id + ".png"), s.coarse);
    if (real_labels < 0 || i < real_labels)
      save_map_png(labels_real_dir(root) / (id + ".png"), s.ground_truth);
  }
}

}  // namespace hysod

#pragma once

#include <istream>
#include <ostream>
#include <vector>

#include "hysod/image.hpp"
#include "hysod/tensor.hpp"

namespace hysod {

inline Tensor to_image_tensor(const std::vector<Image>& images) {
  if (images.empty()) throw std::invalid_argument("empty image batch");
  int h = images[0].h, w = images[0].w;
  Tensor t(static_cast<int>(images.size()), 3, h, w);
  for (std::size_t b = 0; b < images.size(); ++b) {
    if (images[b].h != h || images[b].w != w)
      throw std::invalid_argument("image batch size mismatch");
    std::copy(images[b].v.begin(), images[b].v.end(), t.v.begin() + b * images[b].v.size());
  }
  return t;
}

inline Tensor to_map_tensor(const std::vector<Map>& maps) {
  if (maps.empty()) throw std::invalid_argument("empty map batch");
  int h = maps[0].h, w = maps[0].w;
  Tensor t(static_cast<int>(maps.size()), 1, h, w);
  for (std::size_t b = 0; b < maps.size(); ++b) {
    if (maps[b].h != h || maps[b].w != w) throw std::invalid_argument("map batch size mismatch");
    std::copy(maps[b].v.begin(), maps[b].v.end(), t.v.begin() + b * maps[b].v.size());
  }
  return t;
}

inline std::vector<Map> tensor_to_maps(const Tensor& t) {
  std::vector<Map> maps(t.b);
  for (int b = 0; b < t.b; ++b) {
    maps[b] = Map(t.h, t.w);
    std::copy(t.v.begin() + t.index(b, 0, 0, 0), t.v.begin() + t.index(b, 0, 0, 0) + t.h * t.w,
              maps[b].v.begin());
  }
  return maps;
}

/// Refinement model surface: (RGB image, coarse map) -> refined map.
class RefinerNetwork {
public:
  virtual ~RefinerNetwork() = default;
  virtual double train_step(const std::vector<Image>& images, const std::vector<Map>& coarse,
                            const std::vector<Map>& labels, double lr) = 0;
  virtual std::vector<Map> predict(const std::vector<Image>& images,
                                   const std::vector<Map>& coarse) = 0;
  virtual void save(std::ostream& os) const = 0;
  virtual void load(std::istream& is) = 0;
  virtual void reset_optimizer() = 0;
  virtual int input_size() const = 0;
};

/// Replaceable saliency model surface: RGB image -> map. Anything satisfying
/// this contract slots into the trainer unchanged.
class SaliencyNetwork {
public:
  virtual ~SaliencyNetwork() = default;
  virtual double train_step(const std::vector<Image>& images, const std::vector<Map>& labels,
                            double lr) = 0;
  virtual std::vector<Map> predict(const std::vector<Image>& images) = 0;
  virtual void save(std::ostream& os) const = 0;
  virtual void load(std::istream& is) = 0;
  virtual void reset_optimizer() = 0;
  virtual int input_size() const = 0;
};

}  // namespace hysod

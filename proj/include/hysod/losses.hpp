#pragma once

#include <array>

#include "hysod/image.hpp"
#include "hysod/ops.hpp"

namespace hysod {

inline constexpr double kBceEps = 1e-7;

/// Deep-supervision weights for the three auxiliary side outputs.
struct LossWeights {
  std::array<double, 3> lambda{0.2, 0.4, 0.8};

  void validate() const {
    for (double l : lambda)
      if (l < 0.0) throw ConfigError("loss weights must be nonnegative");
  }
};

/// Mean binary cross-entropy over all elements; predictions are clamped to
/// [eps, 1 - eps] before the logs.
inline double bce(const Tensor& pred, const Tensor& label, double eps = kBceEps) {
  require_same_shape(pred, label, "bce");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    double p = pred.v[i];
    p = p < eps ? eps : (p > 1.0 - eps ? 1.0 - eps : p);
    double y = label.v[i];
    acc += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  }
  return acc / static_cast<double>(pred.numel());
}

inline double bce(const Map& pred, const Map& label, double eps = kBceEps) {
  if (!pred.same_shape(label)) throw std::invalid_argument("bce: map shape mismatch");
  Tensor p(1, 1, pred.h, pred.w), y(1, 1, label.h, label.w);
  p.v = pred.v;
  y.v = label.v;
  return bce(p, y, eps);
}

/// Autograd BCE against a fixed target. Gradient is (p - y) / (p (1 - p)) / N
/// on the clamped prediction, zero where the clamp saturates.
inline Var bce(const Var& pred, const Tensor& label, double eps = kBceEps) {
  require_same_shape(pred->value, label, "bce");
  Tensor out = Tensor::scalar(bce(pred->value, label, eps));
  Tensor target = label;
  return make_node(std::move(out), {pred}, [pred, target, eps](Node& n) {
    Tensor& gp = pred->ensure_grad();
    double g = n.grad.v[0] / static_cast<double>(target.numel());
    for (std::size_t i = 0; i < target.numel(); ++i) {
      double p = pred->value.v[i];
      if (p < eps || p > 1.0 - eps) continue;
      gp.v[i] += g * (p - target.v[i]) / (p * (1.0 - p));
    }
  });
}

/// Final map plus the three auxiliary side outputs, all in [0, 1] at input
/// resolution.
struct SaliencyPrediction {
  Tensor final;
  std::array<Tensor, 3> aux;
};

/// Total refinement loss: bce(final) + sum_i lambda_i * bce(aux_i). The same
/// formula serves real- and pseudo-labeled batches; the training loop decides
/// which phase a batch belongs to.
inline double rnet_loss(const SaliencyPrediction& pred, const Tensor& label,
                        const LossWeights& weights = {}) {
  double total = bce(pred.final, label);
  for (int i = 0; i < 3; ++i) total += weights.lambda[i] * bce(pred.aux[i], label);
  return total;
}

inline Var rnet_loss(const Var& final, const std::array<Var, 3>& aux, const Tensor& label,
                     const LossWeights& weights = {}) {
  Var total = bce(final, label);
  for (int i = 0; i < 3; ++i) total = add(total, affine(bce(aux[i], label), weights.lambda[i], 0.0));
  return total;
}

}  // namespace hysod

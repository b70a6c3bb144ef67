#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hysod/ops.hpp"

namespace hysod {

/// A named learnable tensor with an accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor t) : name(std::move(n)), value(std::move(t)) {
    grad = Tensor::zeros_like(value);
  }

  void zero_grad() { grad.fill(0.0); }
};

/// Leaf node backed by a Parameter; backward accumulates into the parameter's
/// grad buffer. A fresh leaf per forward call keeps shared use sites correct.
inline Var leaf(Parameter& p) {
  auto n = std::make_shared<Node>();
  n->value = p.value;
  if (grad_enabled()) {
    n->requires_grad = true;
    Parameter* ptr = &p;
    n->backprop = [ptr](Node& node) {
      for (std::size_t i = 0; i < node.grad.numel(); ++i) ptr->grad.v[i] += node.grad.v[i];
    };
  }
  return n;
}

class Conv2d {
public:
  Conv2d() = default;

  Conv2d(std::string name, int in_ch, int out_ch, int ksize, int stride, int pad, Rng& rng)
      : stride_(stride), pad_(pad) {
    Tensor w(out_ch, in_ch, ksize, ksize);
    // He-normal init.
    double std_dev = std::sqrt(2.0 / (static_cast<double>(in_ch) * ksize * ksize));
    for (double& v : w.v) v = rng.normal() * std_dev;
    weight = Parameter(name + ".weight", std::move(w));
    bias = Parameter(name + ".bias", Tensor(1, out_ch, 1, 1));
  }

  Var operator()(const Var& x) { return conv2d(x, leaf(weight), leaf(bias), stride_, pad_); }

  void collect(std::vector<Parameter*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }

  int out_channels() const { return weight.value.b; }

  Parameter weight;
  Parameter bias;

private:
  int stride_ = 1;
  int pad_ = 0;
};

/// Channel attention: global average + max pooled descriptors through a shared
/// two-layer bottleneck, summed, squashed to (0, 1).
class ChannelAttention {
public:
  ChannelAttention() = default;

  ChannelAttention(const std::string& name, int channels, Rng& rng)
      : fc1_(name + ".fc1", channels, hidden_for(channels), 1, 1, 0, rng),
        fc2_(name + ".fc2", hidden_for(channels), channels, 1, 1, 0, rng) {}

  static int hidden_for(int channels) { return std::max(channels / 16, 4); }

  /// Attention weights (B, C, 1, 1).
  Var weights(const Var& f) {
    if (forced_value) {
      Tensor m(f->value.b, f->value.c, 1, 1, *forced_value);
      return constant(std::move(m));
    }
    Var avg_path = fc2_(relu(fc1_(global_avg_pool(f))));
    Var max_path = fc2_(relu(fc1_(global_max_pool(f))));
    return sigmoid(add(avg_path, max_path));
  }

  Var operator()(const Var& f) { return mul_channel(f, weights(f)); }

  void collect(std::vector<Parameter*>& out) {
    fc1_.collect(out);
    fc2_.collect(out);
  }

  /// Test hook: pins every attention weight to a constant.
  std::optional<double> forced_value;

private:
  Conv2d fc1_;
  Conv2d fc2_;
};

/// Spatial attention: channel-wise average and max maps, concatenated, 7x7
/// convolved, squashed to a 1-channel mask in (0, 1).
class SpatialAttention {
public:
  SpatialAttention() = default;

  SpatialAttention(const std::string& name, Rng& rng)
      : conv_(name + ".conv", 2, 1, 7, 1, 3, rng) {}

  /// Mask (B, 1, H, W).
  Var mask(const Var& f) {
    if (forced_value) {
      Tensor m(f->value.b, 1, f->value.h, f->value.w, *forced_value);
      return constant(std::move(m));
    }
    return sigmoid(conv_(concat_channels({channel_mean(f), channel_max(f)})));
  }

  Var operator()(const Var& f) { return mul_spatial(f, mask(f)); }

  void collect(std::vector<Parameter*>& out) { conv_.collect(out); }

  /// Test hook: pins the mask to a constant.
  std::optional<double> forced_value;

private:
  Conv2d conv_;
};

/// Adam with L2 weight decay folded into the gradient. `momentum` is the
/// first-moment coefficient beta1.
class Adam {
public:
  Adam() = default;

  Adam(std::vector<Parameter*> params, double beta1, double weight_decay,
       double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), weight_decay_(weight_decay),
        eps_(eps) {
    reset();
  }

  void reset() {
    t_ = 0;
    m_.clear();
    v_.clear();
    for (Parameter* p : params_) {
      m_.push_back(Tensor::zeros_like(p->value));
      v_.push_back(Tensor::zeros_like(p->value));
    }
  }

  /// Applies one update from the accumulated gradients, then clears them.
  void step(double lr) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
      Parameter& p = *params_[pi];
      for (std::size_t i = 0; i < p.value.numel(); ++i) {
        double g = p.grad.v[i] + weight_decay_ * p.value.v[i];
        m_[pi].v[i] = beta1_ * m_[pi].v[i] + (1.0 - beta1_) * g;
        v_[pi].v[i] = beta2_ * v_[pi].v[i] + (1.0 - beta2_) * g * g;
        double m_hat = m_[pi].v[i] / bc1;
        double v_hat = v_[pi].v[i] / bc2;
        p.value.v[i] -= lr * m_hat / (std::sqrt(v_hat) + eps_);
      }
      p.zero_grad();
    }
  }

private:
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double weight_decay_ = 0.0;
  double eps_ = 1e-8;
  long t_ = 0;
};

}  // namespace hysod

#pragma once

#include <array>
#include <string>
#include <vector>

#include "json.hpp"

#include "hysod/data.hpp"
#include "hysod/losses.hpp"
#include "hysod/net_interface.hpp"
#include "hysod/serialize.hpp"

namespace hysod {

struct RNetConfig {
  std::array<int, 5> encoder_channels{16, 32, 64, 128, 128};
  int input_size = 288;
  LossWeights loss_weights;
  double momentum = 0.9;      // Adam beta1
  double weight_decay = 5e-4;

  static constexpr int kMainstreamInChannels = 4;  // RGB + coarse map
  static constexpr int kGuidanceInChannels = 3;

  void validate() const {
    for (int c : encoder_channels)
      if (c < 1) throw ConfigError("rnet: encoder channels must be positive");
    if (input_size < 2) throw ConfigError("rnet: input size too small");
    loss_weights.validate();
  }

  json to_json() const {
    return json{{"type", "rnet"},
                {"channels", encoder_channels},
                {"input_size", input_size},
                {"lambda", loss_weights.lambda}};
  }
};

/// Five stride-2 stages of 3x3 convolutions, ReLU activated. Feature level i
/// sits at stride 2^(i+1) relative to the input.
class StageEncoder {
public:
  StageEncoder() = default;

  StageEncoder(const std::string& name, int in_channels, const std::array<int, 5>& channels,
               Rng& rng) {
    int prev = in_channels;
    for (int i = 0; i < 5; ++i) {
      stages_[i] = Conv2d(name + "." + std::to_string(i), prev, channels[i], 3, 2, 1, rng);
      prev = channels[i];
    }
  }

  std::array<Var, 5> forward(const Var& x) {
    std::array<Var, 5> feats;
    Var cur = x;
    for (int i = 0; i < 5; ++i) {
      cur = relu(stages_[i](cur));
      feats[i] = cur;
    }
    return feats;
  }

  void collect(std::vector<Parameter*>& out) {
    for (auto& s : stages_) s.collect(out);
  }

private:
  std::array<Conv2d, 5> stages_;
};

/// Guidance-stage fusion of one level: channel attention over the concatenated
/// streams, a spatial mask from the RGB features reinforcing the result, and a
/// 1x1 projection back to the level width.
class GuidanceFusion {
public:
  GuidanceFusion() = default;

  GuidanceFusion(const std::string& name, int channels, Rng& rng)
      : ca(name + ".ca", 2 * channels, rng),
        sa(name + ".sa", rng),
        proj(name + ".proj", 2 * channels, channels, 1, 1, 0, rng) {}

  /// F_com: channel-attended concatenation of the two streams.
  Var complement(const Var& refine_feat, const Var& rgb_feat) {
    return ca(concat_channels({refine_feat, rgb_feat}));
  }

  /// Full guidance stage output.
  Var fuse(const Var& refine_feat, const Var& rgb_feat) {
    require_same_shape(refine_feat->value, rgb_feat->value, "guidance_fusion");
    Var com = complement(refine_feat, rgb_feat);
    Var masked = mul_spatial(com, sa.mask(rgb_feat));
    return proj(add(masked, com));
  }

  void collect(std::vector<Parameter*>& out) {
    ca.collect(out);
    sa.collect(out);
    proj.collect(out);
  }

  ChannelAttention ca;
  SpatialAttention sa;
  Conv2d proj;
};

/// Importance-weighted blend of the global semantic features with one level's
/// encoder features: gate * global + (1 - gate) * encoder.
class SemanticGate {
public:
  SemanticGate() = default;

  SemanticGate(const std::string& name, int channels, Rng& rng)
      : gate_conv(name + ".gate", 2 * channels, 1, 1, 1, 0, rng) {}

  Var gate(const Var& global_feat, const Var& encoder_feat) {
    if (forced_gate) {
      Tensor m(global_feat->value.b, 1, global_feat->value.h, global_feat->value.w, *forced_gate);
      return constant(std::move(m));
    }
    return sigmoid(gate_conv(concat_channels({global_feat, encoder_feat})));
  }

  Var fuse(const Var& global_feat, const Var& encoder_feat) {
    require_same_shape(global_feat->value, encoder_feat->value, "semantic_gate");
    Var p = gate(global_feat, encoder_feat);
    Var inv = affine(p, -1.0, 1.0);
    return add(mul_spatial(global_feat, p), mul_spatial(encoder_feat, inv));
  }

  void collect(std::vector<Parameter*>& out) { gate_conv.collect(out); }

  /// Test hook: pins the gate to a constant.
  std::optional<double> forced_gate;

  Conv2d gate_conv;
};

/// Aggregation-stage fusion of one level: the upsampled decoder features are
/// modulated by the activated semantic features and supplemented by the
/// spatially attended encoder features.
class AggregationFusion {
public:
  AggregationFusion() = default;

  AggregationFusion(const std::string& name, Rng& rng) : sa(name + ".sa", rng) {}

  /// decoder_above is the level-(i+1) decoder output; upsampling is bilinear
  /// to the encoder level's spatial size.
  Var fuse(const Var& decoder_above, const Var& semantic_feat, const Var& encoder_feat) {
    const Tensor& target = encoder_feat->value;
    Var up = resize_bilinear(decoder_above, target.h, target.w);
    require_same_shape(up->value, target, "aggregation_fusion");
    Var modulated = mul(up, sigmoid(semantic_feat));
    Var supplement = mul_spatial(encoder_feat, sa.mask(encoder_feat));
    return add(add(up, modulated), supplement);
  }

  void collect(std::vector<Parameter*>& out) { sa.collect(out); }

  SpatialAttention sa;
};

struct RNetVarOutput {
  Var final;
  std::array<Var, 3> aux;  // deepest middle level first
};

/// Two-stream refinement network. The mainstream encoder consumes the
/// 4-channel [RGB, coarse] stack, the guidance encoder the RGB image alone;
/// decoding runs the guidance and aggregation fusions from the top level down.
class RNet : public RefinerNetwork {
public:
  explicit RNet(const RNetConfig& config, std::uint64_t seed = 1) : config_(config) {
    config_.validate();
    Rng rng(seed_for(seed, "rnet_init"));
    const auto& ch = config_.encoder_channels;
    mainstream_ = StageEncoder("rnet.ms", RNetConfig::kMainstreamInChannels, ch, rng);
    guidance_enc_ = StageEncoder("rnet.guide", RNetConfig::kGuidanceInChannels, ch, rng);
    for (int i = 0; i < 5; ++i)
      guidance_[i] = GuidanceFusion("rnet.gfuse" + std::to_string(i), ch[i], rng);
    global_conv_ = Conv2d("rnet.global", 2 * ch[4], ch[4], 1, 1, 0, rng);
    for (int i = 0; i < 4; ++i) {
      global_proj_[i] = Conv2d("rnet.gproj" + std::to_string(i), ch[4], ch[i], 1, 1, 0, rng);
      semantic_[i] = SemanticGate("rnet.sem" + std::to_string(i), ch[i], rng);
      aggregation_[i] = AggregationFusion("rnet.agg" + std::to_string(i), rng);
    }
    for (int i = 0; i < 5; ++i) {
      int out_ch = i > 0 ? ch[i - 1] : ch[0];
      transition_[i] = Conv2d("rnet.dec" + std::to_string(i), ch[i], out_ch, 3, 1, 1, rng);
    }
    head_final_ = Conv2d("rnet.head", ch[0], 1, 1, 1, 0, rng);
    for (int i = 0; i < 3; ++i) {
      // aux heads attach to decoder levels 4, 3, 2 (outputs of the levels
      // above, so channel widths ch[2], ch[1], ch[0])
      int in_ch = i == 0 ? ch[2] : (i == 1 ? ch[1] : ch[0]);
      head_aux_[i] = Conv2d("rnet.aux" + std::to_string(i), in_ch, 1, 1, 1, 0, rng);
    }
    collect_parameters();
    optimizer_ = Adam(params_, config_.momentum, config_.weight_decay);
  }

  /// Both encoder stacks; the mainstream consumes [image, coarse].
  std::pair<std::array<Var, 5>, std::array<Var, 5>> encode(const Var& image, const Var& coarse) {
    if (image->value.h != coarse->value.h || image->value.w != coarse->value.w ||
        image->value.b != coarse->value.b)
      throw std::invalid_argument("rnet: image/coarse shape mismatch");
    Var stacked = concat_channels({image, coarse});
    return {mainstream_.forward(stacked), guidance_enc_.forward(image)};
  }

  RNetVarOutput forward(const Var& image, const Var& coarse) {
    auto [ms, rgb] = encode(image, coarse);

    std::array<Var, 5> fused;
    for (int i = 0; i < 5; ++i) fused[i] = guidance_[i].fuse(ms[i], rgb[i]);

    Var global_sem = global_conv_(concat_channels({ms[4], rgb[4]}));

    std::array<Var, 5> dec;
    dec[4] = relu(transition_[4](fused[4]));
    for (int i = 3; i >= 0; --i) {
      const Tensor& lvl = fused[i]->value;
      Var global_i = global_proj_[i](resize_bilinear(global_sem, lvl.h, lvl.w));
      Var semantic = semantic_[i].fuse(global_i, fused[i]);
      Var merged = aggregation_[i].fuse(dec[i + 1], semantic, fused[i]);
      dec[i] = relu(transition_[i](merged));
    }

    const int out_h = image->value.h, out_w = image->value.w;
    RNetVarOutput out;
    out.final = sigmoid(resize_bilinear(head_final_(dec[0]), out_h, out_w));
    // Side outputs from the middle three decoder levels (4, 3, 2).
    for (int i = 0; i < 3; ++i)
      out.aux[i] = sigmoid(resize_bilinear(head_aux_[i](dec[3 - i]), out_h, out_w));
    return out;
  }

  double train_step(const std::vector<Image>& images, const std::vector<Map>& coarse,
                    const std::vector<Map>& labels, double lr) override {
    Var image = constant(to_image_tensor(images));
    Var coarse_t = constant(to_map_tensor(coarse));
    RNetVarOutput out = forward(image, coarse_t);
    Var loss = rnet_loss(out.final, out.aux, to_map_tensor(labels), config_.loss_weights);
    backward(loss);
    optimizer_.step(lr);
    return loss->value.v[0];
  }

  std::vector<Map> predict(const std::vector<Image>& images,
                           const std::vector<Map>& coarse) override {
    NoGrad guard;
    RNetVarOutput out = forward(constant(to_image_tensor(images)), constant(to_map_tensor(coarse)));
    return tensor_to_maps(out.final->value);
  }

  void save(std::ostream& os) const override {
    save_parameters(os, config_.to_json().dump(), params_);
  }

  void load(std::istream& is) override { load_parameters(is, params_); }

  void reset_optimizer() override { optimizer_.reset(); }

  int input_size() const override { return config_.input_size; }

  const RNetConfig& config() const { return config_; }
  const std::vector<Parameter*>& parameters() const { return params_; }

  // Blocks are exposed for sub-block tests and the mask override hooks.
  StageEncoder mainstream_;
  StageEncoder guidance_enc_;
  std::array<GuidanceFusion, 5> guidance_;
  Conv2d global_conv_;
  std::array<Conv2d, 4> global_proj_;
  std::array<SemanticGate, 4> semantic_;
  std::array<AggregationFusion, 4> aggregation_;
  std::array<Conv2d, 5> transition_;
  Conv2d head_final_;
  std::array<Conv2d, 3> head_aux_;

private:
  void collect_parameters() {
    params_.clear();
    mainstream_.collect(params_);
    guidance_enc_.collect(params_);
    for (auto& g : guidance_) g.collect(params_);
    global_conv_.collect(params_);
    for (auto& p : global_proj_) p.collect(params_);
    for (auto& s : semantic_) s.collect(params_);
    for (auto& a : aggregation_) a.collect(params_);
    for (auto& t : transition_) t.collect(params_);
    head_final_.collect(params_);
    for (auto& h : head_aux_) h.collect(params_);
  }

  RNetConfig config_;
  std::vector<Parameter*> params_;
  Adam optimizer_;
};

/// Batched refinement inference over samples: each copy gets the predicted
/// map (resized back to its own resolution) as a pseudo label.
inline std::vector<Sample> predict_pseudo_labels(RefinerNetwork& net,
                                                 const std::vector<Sample>& samples,
                                                 int batch_size = 8) {
  std::vector<Sample> out;
  out.reserve(samples.size());
  for (const auto& s : samples)
    if (!s.coarse) throw DataError("predict_pseudo_labels: sample " + s.id + " has no coarse map");
  for (std::size_t begin = 0; begin < samples.size(); begin += batch_size) {
    std::size_t end = std::min(samples.size(), begin + batch_size);
    std::vector<Image> images;
    std::vector<Map> coarse;
    for (std::size_t i = begin; i < end; ++i) {
      Sample resized = resize_sample(samples[i], net.input_size());
      images.push_back(std::move(resized.image));
      coarse.push_back(std::move(*resized.coarse));
    }
    std::vector<Map> preds = net.predict(images, coarse);
    for (std::size_t i = begin; i < end; ++i) {
      Sample copy = samples[i];
      Map label = resize_bilinear(preds[i - begin], copy.image.h, copy.image.w);
      clamp_map(label);
      copy.label = std::move(label);
      copy.kind = LabelKind::pseudo;
      out.push_back(std::move(copy));
    }
  }
  return out;
}

}  // namespace hysod

#pragma once

#include <array>
#include <string>
#include <vector>

#include "json.hpp"

#include "hysod/data.hpp"
#include "hysod/losses.hpp"
#include "hysod/net_interface.hpp"
#include "hysod/rnet.hpp"
#include "hysod/serialize.hpp"

namespace hysod {

struct SNetConfig {
  std::array<int, 5> encoder_channels{16, 32, 64, 128, 128};
  int input_size = 320;
  double momentum = 0.9;
  double weight_decay = 5e-4;

  void validate() const {
    for (int c : encoder_channels)
      if (c < 1) throw ConfigError("snet: encoder channels must be positive");
    if (input_size < 2) throw ConfigError("snet: input size too small");
  }

  json to_json() const {
    return json{{"type", "snet"}, {"channels", encoder_channels}, {"input_size", input_size}};
  }

  static SNetConfig from_json(const json& j) {
    SNetConfig cfg;
    auto ch = j.at("channels").get<std::vector<int>>();
    if (ch.size() != 5) throw DataError("snet checkpoint: expected 5 encoder channels");
    std::copy(ch.begin(), ch.end(), cfg.encoder_channels.begin());
    cfg.input_size = j.at("input_size").get<int>();
    return cfg;
  }
};

/// Reference saliency network: a plain five-stage encoder-decoder with skip
/// connections and a sigmoid head, trained with BCE. Stands in for any
/// replaceable SOD model behind the SaliencyNetwork interface.
class ReferenceSNet : public SaliencyNetwork {
public:
  explicit ReferenceSNet(const SNetConfig& config, std::uint64_t seed = 1) : config_(config) {
    config_.validate();
    Rng rng(seed_for(seed, "snet_init"));
    const auto& ch = config_.encoder_channels;
    encoder_ = StageEncoder("snet.enc", 3, ch, rng);
    for (int i = 0; i < 5; ++i) {
      int out_ch = i > 0 ? ch[i - 1] : ch[0];
      int in_ch = i == 4 ? ch[4] : ch[i] + ch[i];  // upsampled decoder + skip
      decoder_[i] = Conv2d("snet.dec" + std::to_string(i), in_ch, out_ch, 3, 1, 1, rng);
    }
    head_ = Conv2d("snet.head", ch[0], 1, 1, 1, 0, rng);
    collect_parameters();
    optimizer_ = Adam(params_, config_.momentum, config_.weight_decay);
  }

  Var forward(const Var& image) {
    std::array<Var, 5> enc = encoder_.forward(image);
    Var dec = relu(decoder_[4](enc[4]));
    for (int i = 3; i >= 0; --i) {
      Var up = resize_bilinear(dec, enc[i]->value.h, enc[i]->value.w);
      dec = relu(decoder_[i](concat_channels({up, enc[i]})));
    }
    return sigmoid(resize_bilinear(head_(dec), image->value.h, image->value.w));
  }

  double train_step(const std::vector<Image>& images, const std::vector<Map>& labels,
                    double lr) override {
    Var pred = forward(constant(to_image_tensor(images)));
    Var loss = bce(pred, to_map_tensor(labels));
    backward(loss);
    optimizer_.step(lr);
    return loss->value.v[0];
  }

  std::vector<Map> predict(const std::vector<Image>& images) override {
    NoGrad guard;
    Var pred = forward(constant(to_image_tensor(images)));
    return tensor_to_maps(pred->value);
  }

  void save(std::ostream& os) const override {
    save_parameters(os, config_.to_json().dump(), params_);
  }

  void load(std::istream& is) override { load_parameters(is, params_); }

  /// Rebuilds a network from a checkpoint's config echo (used by `predict`).
  static ReferenceSNet from_checkpoint(std::istream& is) {
    Checkpoint ckpt = Checkpoint::read(is);
    json cfg_json = json::parse(ckpt.config_json);
    if (cfg_json.value("type", "") != "snet")
      throw DataError("checkpoint does not hold a saliency network");
    ReferenceSNet net(SNetConfig::from_json(cfg_json));
    for (Parameter* p : net.params_) {
      bool found = false;
      for (auto& e : ckpt.entries)
        if (e.name == p->name) {
          if (!e.tensor.same_shape(p->value)) throw DataError("checkpoint shape mismatch " + p->name);
          p->value = e.tensor;
          found = true;
          break;
        }
      if (!found) throw DataError("checkpoint missing parameter " + p->name);
    }
    return net;
  }

  void reset_optimizer() override { optimizer_.reset(); }

  int input_size() const override { return config_.input_size; }

  const SNetConfig& config() const { return config_; }
  const std::vector<Parameter*>& parameters() const { return params_; }

private:
  void collect_parameters() {
    params_.clear();
    encoder_.collect(params_);
    for (auto& d : decoder_) d.collect(params_);
    head_.collect(params_);
  }

  SNetConfig config_;
  StageEncoder encoder_;
  std::array<Conv2d, 5> decoder_;
  Conv2d head_;
  std::vector<Parameter*> params_;
  Adam optimizer_;
};

/// Saliency-network counterpart of predict_pseudo_labels; only the RGB image
/// is consumed.
inline std::vector<Sample> predict_pseudo_labels_s(SaliencyNetwork& net,
                                                   const std::vector<Sample>& samples,
                                                   int batch_size = 8) {
  std::vector<Sample> out;
  out.reserve(samples.size());
  for (std::size_t begin = 0; begin < samples.size(); begin += batch_size) {
    std::size_t end = std::min(samples.size(), begin + batch_size);
    std::vector<Image> images;
    for (std::size_t i = begin; i < end; ++i)
      images.push_back(resize_bilinear(samples[i].image, net.input_size(), net.input_size()));
    std::vector<Map> preds = net.predict(images);
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

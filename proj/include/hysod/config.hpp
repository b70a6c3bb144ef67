#pragma once

#include <array>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hysod/data.hpp"

namespace hysod {

enum class AblationMode { full, m1, m2, m3, no1, no2, no3, no4 };

inline const char* to_string(AblationMode m) {
  switch (m) {
    case AblationMode::full: return "full";
    case AblationMode::m1: return "M1";
    case AblationMode::m2: return "M2";
    case AblationMode::m3: return "M3";
    case AblationMode::no1: return "No1";
    case AblationMode::no2: return "No2";
    case AblationMode::no3: return "No3";
    default: return "No4";
  }
}

inline AblationMode ablation_mode_from_string(const std::string& s) {
  if (s == "full") return AblationMode::full;
  if (s == "M1") return AblationMode::m1;
  if (s == "M2") return AblationMode::m2;
  if (s == "M3") return AblationMode::m3;
  if (s == "No1") return AblationMode::no1;
  if (s == "No2") return AblationMode::no2;
  if (s == "No3") return AblationMode::no3;
  if (s == "No4") return AblationMode::no4;
  throw ConfigError("unknown ablation mode: " + s +
                    " (expected full|M1|M2|M3|No1|No2|No3|No4)");
}

/// Optimization policy. `momentum` is Adam's first-moment coefficient; the
/// learning rate divides by ten every `lr_decay_every_epochs`; linear warmup
/// over `warmup_steps` applies in the first iteration only.
struct OptimizerPolicy {
  int batch_size = 8;
  double learning_rate = 1e-4;
  int lr_decay_every_epochs = 10;
  double weight_decay = 5e-4;
  double momentum = 0.9;
  int epochs_per_net = 30;
  int warmup_steps = 500;

  void validate() const {
    if (batch_size < 1) throw ConfigError("optimizer.batch_size must be positive");
    if (learning_rate <= 0.0) throw ConfigError("optimizer.learning_rate must be positive");
    if (lr_decay_every_epochs < 1) throw ConfigError("optimizer.lr_decay_every_epochs must be positive");
    if (weight_decay < 0.0) throw ConfigError("optimizer.weight_decay must be nonnegative");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("optimizer.momentum must lie in [0, 1)");
    if (epochs_per_net < 1) throw ConfigError("optimizer.epochs_per_net must be positive");
    if (warmup_steps < 0) throw ConfigError("optimizer.warmup_steps must be nonnegative");
  }

  /// Stepped decay, epochs 1-based: /10 at epoch 10, /100 at epoch 20, ...
  double lr_for_epoch(int epoch) const {
    int k = epoch / lr_decay_every_epochs;
    return learning_rate / std::pow(10.0, k);
  }

  /// Per-step rate including the first-iteration linear warmup ramp.
  double lr_for_step(int iteration, int epoch, int step) const {
    double lr = lr_for_epoch(epoch);
    if (iteration == 1 && warmup_steps > 0 && step < warmup_steps)
      lr *= static_cast<double>(step) / warmup_steps;
    return lr;
  }
};

struct RunConfig {
  std::string train_dir;
  std::string val_dir;
  std::string out_dir = "run";
  int num_groups = 10;
  int num_real = 1000;
  int rnet_input_size = 288;
  int snet_input_size = 320;
  std::vector<int> rnet_channels{16, 32, 64, 128, 128};
  std::vector<int> snet_channels{16, 32, 64, 128, 128};
  OptimizerPolicy optimizer;
  ContaminationSpec contamination;
  bool augment = true;
  AblationMode ablation_mode = AblationMode::full;
  std::uint64_t seed = 1;

  void validate() const {
    if (num_groups < 2) throw ConfigError("num_groups must be at least 2");
    if (num_real < 1) throw ConfigError("num_real must be positive");
    if (rnet_input_size < 2 || snet_input_size < 2) throw ConfigError("input sizes too small");
    if (rnet_channels.size() != 5 || snet_channels.size() != 5)
      throw ConfigError("encoder channel lists must have 5 entries");
    optimizer.validate();
    contamination.validate();
  }

  json to_json() const {
    return json{
        {"train_dir", train_dir},
        {"val_dir", val_dir},
        {"out_dir", out_dir},
        {"num_groups", num_groups},
        {"num_real", num_real},
        {"rnet_input_size", rnet_input_size},
        {"snet_input_size", snet_input_size},
        {"rnet_channels", rnet_channels},
        {"snet_channels", snet_channels},
        {"optimizer",
         {{"batch_size", optimizer.batch_size},
          {"learning_rate", optimizer.learning_rate},
          {"lr_decay_every_epochs", optimizer.lr_decay_every_epochs},
          {"weight_decay", optimizer.weight_decay},
          {"momentum", optimizer.momentum},
          {"epochs_per_net", optimizer.epochs_per_net},
          {"warmup_steps", optimizer.warmup_steps}}},
        {"contamination",
         {{"rotation_degrees", {contamination.rotation_min_deg, contamination.rotation_max_deg}},
          {"crop_fraction", {contamination.crop_min, contamination.crop_max}},
          {"occlusion_fraction", {contamination.occlusion_min, contamination.occlusion_max}}}},
        {"augment", augment},
        {"ablation_mode", to_string(ablation_mode)},
        {"seed", seed}};
  }

  /// Strict parse: unknown keys anywhere are configuration errors.
  static RunConfig from_json(const json& j) {
    RunConfig cfg;
    auto range = [](const json& v, const char* key, double& lo, double& hi) {
      if (!v.is_array() || v.size() != 2)
        throw ConfigError(std::string(key) + " must be a [lo, hi] pair");
      lo = v[0].get<double>();
      hi = v[1].get<double>();
    };
    for (const auto& [key, value] : j.items()) {
      if (key == "train_dir") cfg.train_dir = value.get<std::string>();
      else if (key == "val_dir") cfg.val_dir = value.get<std::string>();
      else if (key == "out_dir") cfg.out_dir = value.get<std::string>();
      else if (key == "num_groups") cfg.num_groups = value.get<int>();
      else if (key == "num_real") cfg.num_real = value.get<int>();
      else if (key == "rnet_input_size") cfg.rnet_input_size = value.get<int>();
      else if (key == "snet_input_size") cfg.snet_input_size = value.get<int>();
      else if (key == "rnet_channels") cfg.rnet_channels = value.get<std::vector<int>>();
      else if (key == "snet_channels") cfg.snet_channels = value.get<std::vector<int>>();
      else if (key == "augment") cfg.augment = value.get<bool>();
      else if (key == "ablation_mode") cfg.ablation_mode = ablation_mode_from_string(value.get<std::string>());
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "optimizer") {
        for (const auto& [okey, ovalue] : value.items()) {
          if (okey == "batch_size") cfg.optimizer.batch_size = ovalue.get<int>();
          else if (okey == "learning_rate") cfg.optimizer.learning_rate = ovalue.get<double>();
          else if (okey == "lr_decay_every_epochs") cfg.optimizer.lr_decay_every_epochs = ovalue.get<int>();
          else if (okey == "weight_decay") cfg.optimizer.weight_decay = ovalue.get<double>();
          else if (okey == "momentum") cfg.optimizer.momentum = ovalue.get<double>();
          else if (okey == "epochs_per_net") cfg.optimizer.epochs_per_net = ovalue.get<int>();
          else if (okey == "warmup_steps") cfg.optimizer.warmup_steps = ovalue.get<int>();
          else throw ConfigError("unknown config key: optimizer." + okey);
        }
      } else if (key == "contamination") {
        for (const auto& [ckey, cvalue] : value.items()) {
          if (ckey == "rotation_degrees")
            range(cvalue, "contamination.rotation_degrees", cfg.contamination.rotation_min_deg,
                  cfg.contamination.rotation_max_deg);
          else if (ckey == "crop_fraction")
            range(cvalue, "contamination.crop_fraction", cfg.contamination.crop_min,
                  cfg.contamination.crop_max);
          else if (ckey == "occlusion_fraction")
            range(cvalue, "contamination.occlusion_fraction", cfg.contamination.occlusion_min,
                  cfg.contamination.occlusion_max);
          else throw ConfigError("unknown config key: contamination." + ckey);
        }
      } else {
        throw ConfigError("unknown config key: " + key);
      }
    }
    cfg.validate();
    return cfg;
  }

  static RunConfig load(const fs::path& path, const json& overrides = json::object()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw ConfigError("config parse error in " + path.string() + ": " + e.what());
    }
    j.merge_patch(overrides);
    return from_json(j);
  }

  /// Output directory, honoring the HYSOD_OUT_ROOT override for relative
  /// paths.
  fs::path resolved_out_dir() const {
    fs::path out(out_dir);
    if (out.is_absolute()) return out;
    if (const char* root = std::getenv("HYSOD_OUT_ROOT")) return fs::path(root) / out;
    return out;
  }
};

}  // namespace hysod

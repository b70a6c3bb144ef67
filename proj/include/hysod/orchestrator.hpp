#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hysod/config.hpp"
#include "hysod/eventlog.hpp"
#include "hysod/metrics.hpp"
#include "hysod/rnet.hpp"
#include "hysod/schedule.hpp"
#include "hysod/snet.hpp"
#include "hysod/store.hpp"

namespace hysod {

/// Strict-improvement acceptance rule; the first iteration always accepts.
/// Ties keep the previous best.
inline bool gate_accepts(int iteration, double candidate_mae, double best_mae) {
  return iteration <= 1 || candidate_mae < best_mae;
}

struct GateRecord {
  int iteration = 0;
  std::string network;
  std::string decision;  // init | accept | reject
  double candidate_mae = 0.0;
  double best_mae_after = 0.0;

  json to_json() const {
    return json{{"iteration", iteration},
                {"network", network},
                {"decision", decision},
                {"candidate_mae", candidate_mae},
                {"best_mae_after", best_mae_after}};
  }
};

/// Per-network best-model record for the credibility verification gate.
struct CredibilityEntry {
  bool has_best = false;
  double best_mae = std::numeric_limits<double>::infinity();
  std::string best_params;  // serialized checkpoint bytes
};

struct CredibilityState {
  CredibilityEntry rnet;
  CredibilityEntry snet;
  std::vector<GateRecord> decisions;
};

struct EpochStats {
  int pseudo_batches = 0;
  int real_batches = 0;
  double mean_loss = 0.0;
};

/// Drives the full hybrid-label pipeline: builds the incremental schedule,
/// alternates refiner and saliency training with the first-pseudo-then-real
/// epoch ordering, gates pseudo-label generation through validation MAE, and
/// persists everything needed to resume from the last completed iteration.
class Trainer {
public:
  Trainer(const RunConfig& config, RefinerNetwork& rnet, SaliencyNetwork& snet)
      : cfg_(config), rnet_(rnet), snet_(snet) {
    cfg_.validate();
    store_ = RunStore(cfg_.resolved_out_dir());
    lock_ = LockFile(store_.lock_path());
  }

  RunStore& store() { return store_; }
  const EventLog& log() const { return log_; }
  const Schedule& schedule() const { return schedule_; }
  const CredibilityState& credibility() const { return cred_; }
  const std::map<std::string, Sample>& samples() const { return samples_; }

  /// Executes the configured pipeline. `stop_after` ends the run after that
  /// many completed iterations without finalizing (the on-disk state then
  /// matches a run interrupted at an iteration boundary).
  void run(std::optional<int> stop_after = std::nullopt) {
    load_dataset();
    bool scheduled = cfg_.ablation_mode == AblationMode::full ||
                     cfg_.ablation_mode == AblationMode::no2 ||
                     cfg_.ablation_mode == AblationMode::no3 ||
                     cfg_.ablation_mode == AblationMode::no4;
    if (scheduled) schedule_ = make_schedule();

    if (store_.has_manifest()) {
      resume_state(scheduled);
    } else {
      log_ = EventLog(store_.events_path());
      log_.run_start();
      write_manifest(false);
    }
    if (finalized_) return;

    switch (cfg_.ablation_mode) {
      case AblationMode::full:
      case AblationMode::no2:
      case AblationMode::no3:
      case AblationMode::no4:
        for (const auto& plan : schedule_.plans) {
          if (stop_after && plan.index > *stop_after) return;
          if (plan.index > completed_iterations_) run_iteration(plan);
        }
        break;
      case AblationMode::m1: run_m1(); break;
      case AblationMode::m2: run_m2(); break;
      case AblationMode::m3: run_m3(); break;
      case AblationMode::no1: run_no1(); break;
    }

    store_.save_checkpoint("snet_final", snet_);
    finalized_ = true;
    write_manifest(true);
    log_.emit("run_end", 0, "setup", "-");
  }

  /// One alternate-training round (refiner first, then the saliency net).
  void run_iteration(const IterationPlan& plan) {
    log_.emit("iteration_start", plan.index, "setup", "-");

    train_network(NetworkKind::rnet, plan.rnet_train_groups, plan);
    gate_and_predict(NetworkKind::rnet, plan.index, plan.rnet_predict_group);

    train_network(NetworkKind::snet, plan.snet_train_groups, plan);
    gate_and_predict(NetworkKind::snet, plan.index, plan.snet_predict_group);

    log_.emit("iteration_end", plan.index, "setup", "-");
    completed_iterations_ = plan.index;
    persist_iteration();
  }

  /// One training epoch: every pseudo/contaminated batch is consumed before
  /// any real batch; the learning rate follows the policy (stepped decay,
  /// warmup in iteration 1 only).
  EpochStats epoch_loop(NetworkKind kind, const std::vector<const Sample*>& pseudo_set,
                        const std::vector<const Sample*>& real_set, int iteration, int epoch,
                        int& step) {
    if (pseudo_set.empty() && real_set.empty())
      throw ConfigError("epoch_loop: both batch sets are empty");
    const int kind_idx = kind == NetworkKind::rnet ? 0 : 1;
    log_.emit("epoch_start", iteration, "train", network_name(kind), std::nullopt,
              static_cast<double>(epoch));

    EpochStats stats;
    double loss_sum = 0.0;
    int batches = 0;
    for (int phase = 0; phase < 2; ++phase) {
      std::vector<const Sample*> order = phase == 0 ? pseudo_set : real_set;
      Rng rng(seed_for(cfg_.seed, "order", kind_idx, iteration, epoch, phase));
      rng.shuffle(order);
      const int bs = cfg_.optimizer.batch_size;
      for (std::size_t begin = 0; begin < order.size(); begin += bs) {
        std::size_t end = std::min(order.size(), begin + bs);
        double lr = cfg_.optimizer.lr_for_step(iteration, epoch, ++step);
        double loss = train_batch(kind, {order.begin() + begin, order.begin() + end}, iteration,
                                  epoch, lr);
        if (!std::isfinite(loss))
          throw RuntimeAbort("non-finite loss in iteration " + std::to_string(iteration) +
                             ", epoch " + std::to_string(epoch));
        loss_sum += loss;
        ++batches;
        log_.emit(phase == 0 ? "batch_pseudo" : "batch_real", iteration, "train",
                  network_name(kind), std::nullopt, static_cast<double>(end - begin));
        if (phase == 0)
          ++stats.pseudo_batches;
        else
          ++stats.real_batches;
      }
    }
    stats.mean_loss = batches > 0 ? loss_sum / batches : 0.0;
    return stats;
  }

  /// Mean MAE of the network's predictions over the validation set.
  double validation_mae(NetworkKind kind) {
    double acc = 0.0;
    const int bs = cfg_.optimizer.batch_size;
    for (std::size_t begin = 0; begin < val_.size(); begin += bs) {
      std::size_t end = std::min(val_.size(), begin + bs);
      std::vector<Map> preds = predict_batch(kind, begin, end);
      for (std::size_t i = begin; i < end; ++i) {
        Map pred = resize_bilinear(preds[i - begin], val_[i].image.h, val_[i].image.w);
        clamp_map(pred);
        acc += mae(pred, binarize(*val_[i].label));
      }
    }
    return acc / static_cast<double>(val_.size());
  }

private:
  static const char* network_name(NetworkKind kind) {
    return kind == NetworkKind::rnet ? "rnet" : "snet";
  }

  Schedule make_schedule() {
    Schedule s = build_schedule(cfg_.num_groups, static_cast<int>(group_ids_.empty()
                                                                      ? cfg_.num_real
                                                                      : group_ids_[0].size()));
    if (cfg_.ablation_mode == AblationMode::no4) {
      for (auto& plan : s.plans) {
        plan.real_count = s.group1_size;
        plan.contaminated_count = 0;
      }
    }
    if (cfg_.ablation_mode == AblationMode::no3 && !s.plans.empty()) {
      auto& last = s.plans.back();
      last.snet_train_groups.clear();
      for (int g = 1; g <= cfg_.num_groups; ++g) last.snet_train_groups.push_back(g);
    }
    return s;
  }

  void load_dataset() {
    fs::path train_root(cfg_.train_dir);
    if (!fs::exists(dataset_manifest_path(train_root)))
      prepare_dataset(train_root, cfg_.num_groups, cfg_.num_real, cfg_.seed);
    DatasetManifest manifest = DatasetManifest::load(dataset_manifest_path(train_root));
    if (manifest.num_groups != cfg_.num_groups)
      throw ConfigError("dataset manifest was prepared with num_groups=" +
                        std::to_string(manifest.num_groups));
    group_ids_.assign(cfg_.num_groups, {});
    for (const auto& entry : manifest.entries) {
      samples_[entry.id] = load_sample(train_root, entry);
      if (!samples_[entry.id].coarse) throw DataError("sample " + entry.id + " lacks a coarse map");
      group_ids_[entry.group - 1].push_back(entry.id);
    }
    for (auto& ids : group_ids_) std::sort(ids.begin(), ids.end());
    if (static_cast<int>(group_ids_[0].size()) != cfg_.num_real)
      throw ConfigError("manifest group 1 does not hold num_real samples");

    fs::path val_root(cfg_.val_dir);
    auto val_ids = prepare_validation(val_root);
    for (const auto& id : val_ids) {
      DatasetEntry entry{id, LabelKind::real, 1};
      val_.push_back(load_sample(val_root, entry));
    }
    if (val_.empty()) throw ConfigError("validation set is empty");

    // Rebuild the schedule now that the true group-1 size is known.
    schedule_ = Schedule{};
  }

  // -- training ------------------------------------------------------------

  /// Assembles the epoch batch sets for `groups` (group 1 split into real and
  /// contaminated supervision per the plan) and trains for the configured
  /// number of epochs.
  void train_network(NetworkKind kind, const std::vector<int>& groups, const IterationPlan& plan) {
    const int iteration = plan.index;
    log_.emit("train_start", iteration, "train", network_name(kind));
    std::vector<int> sorted_groups = groups;
    std::sort(sorted_groups.begin(), sorted_groups.end());
    for (int g : sorted_groups)
      log_.emit("train_group", iteration, "train", network_name(kind), g);

    std::vector<const Sample*> phase_pseudo;
    std::vector<const Sample*> phase_real;
    contaminated_.clear();
    for (int g : sorted_groups) {
      if (g == 1) {
        auto split = split_group1(plan);
        for (const auto& id : split.first) phase_real.push_back(&samples_.at(id));
        ContaminationSpec spec = cfg_.contamination;
        spec.seed = seed_for(cfg_.seed, "contam", iteration);
        contaminated_.reserve(split.second.size());
        for (const auto& id : split.second)
          contaminated_.push_back(contaminate(samples_.at(id), spec));
        for (const auto& s : contaminated_) phase_pseudo.push_back(&s);
        log_.emit("train_split_real", iteration, "train", network_name(kind), 1,
                  static_cast<double>(split.first.size()));
        log_.emit("train_split_contaminated", iteration, "train", network_name(kind), 1,
                  static_cast<double>(split.second.size()));
      } else {
        for (const auto& id : group_ids_[g - 1]) {
          const Sample& s = samples_.at(id);
          if (s.kind != LabelKind::pseudo || !s.label)
            throw DataError("group " + std::to_string(g) + " sample " + id +
                            " has no pseudo label yet");
          phase_pseudo.push_back(&s);
        }
      }
    }

    run_epochs(kind, phase_pseudo, phase_real, iteration);
  }

  void run_epochs(NetworkKind kind, const std::vector<const Sample*>& phase_pseudo,
                  const std::vector<const Sample*>& phase_real, int iteration) {
    net_reset_optimizer(kind);
    int step = 0;
    double last_mean = 0.0;
    for (int epoch = 1; epoch <= cfg_.optimizer.epochs_per_net; ++epoch)
      last_mean = epoch_loop(kind, phase_pseudo, phase_real, iteration, epoch, step).mean_loss;
    log_.emit("train_end", iteration, "train", network_name(kind), std::nullopt, last_mean);
  }

  /// Deterministic real/contaminated split of group 1 for this iteration.
  std::pair<std::vector<std::string>, std::vector<std::string>> split_group1(
      const IterationPlan& plan) {
    std::vector<std::string> ids = group_ids_[0];
    Rng rng(seed_for(cfg_.seed, "realsplit", plan.index));
    rng.shuffle(ids);
    if (plan.real_count + plan.contaminated_count != static_cast<int>(ids.size()))
      throw ConfigError("plan split does not cover group 1");
    std::vector<std::string> real(ids.begin(), ids.begin() + plan.real_count);
    std::vector<std::string> contaminated(ids.begin() + plan.real_count, ids.end());
    return {std::move(real), std::move(contaminated)};
  }

  double train_batch(NetworkKind kind, const std::vector<const Sample*>& batch, int iteration,
                     int epoch, double lr) {
    const int kind_idx = kind == NetworkKind::rnet ? 0 : 1;
    const int size = kind == NetworkKind::rnet ? cfg_.rnet_input_size : cfg_.snet_input_size;
    std::vector<Image> images;
    std::vector<Map> coarse;
    std::vector<Map> labels;
    for (const Sample* s : batch) {
      Sample prepared = resize_sample(*s, size);
      if (cfg_.augment)
        prepared = augment(prepared, seed_for(cfg_.seed, "aug", kind_idx, iteration, epoch,
                                              fnv1a(s->id)));
      if (!prepared.label) throw DataError("sample " + s->id + " has no supervision label");
      images.push_back(std::move(prepared.image));
      if (kind == NetworkKind::rnet) {
        if (!prepared.coarse) throw DataError("sample " + s->id + " has no coarse map");
        coarse.push_back(std::move(*prepared.coarse));
      }
      labels.push_back(std::move(*prepared.label));
    }
    return kind == NetworkKind::rnet ? rnet_.train_step(images, coarse, labels, lr)
                                     : snet_.train_step(images, labels, lr);
  }

  // -- gating and pseudo-label generation ------------------------------------

  void gate_and_predict(NetworkKind kind, int iteration, std::optional<int> predict_group) {
    CredibilityEntry& entry = kind == NetworkKind::rnet ? cred_.rnet : cred_.snet;
    bool use_best_params = false;
    if (cfg_.ablation_mode != AblationMode::no2) {
      double candidate = validation_mae(kind);
      bool accept = !entry.has_best || gate_accepts(iteration, candidate, entry.best_mae);
      std::string decision;
      if (accept) {
        decision = entry.has_best && iteration > 1 ? "accept" : "init";
        entry.best_mae = candidate;
        entry.best_params = net_serialize(kind);
        entry.has_best = true;
      } else {
        decision = "reject";
        use_best_params = true;
      }
      cred_.decisions.push_back({iteration, network_name(kind), decision, candidate,
                                 entry.best_mae});
      log_.emit("gate_" + decision, iteration, "gate", network_name(kind), std::nullopt,
                candidate);
    }

    if (!predict_group) return;
    if (use_best_params) {
      // Pseudo labels must come from the stored best model; the freshly
      // trained weights stay in place for the next iteration.
      std::string current = net_serialize(kind);
      net_deserialize(kind, entry.best_params);
      predict_group_now(kind, iteration, *predict_group);
      net_deserialize(kind, current);
    } else {
      predict_group_now(kind, iteration, *predict_group);
    }
  }

  void predict_group_now(NetworkKind kind, int iteration, int group) {
    const auto& ids = group_ids_[group - 1];
    const int bs = cfg_.optimizer.batch_size;
    for (std::size_t begin = 0; begin < ids.size(); begin += bs) {
      std::size_t end = std::min(ids.size(), begin + bs);
      std::vector<Map> preds = predict_samples(kind, ids, begin, end);
      for (std::size_t i = begin; i < end; ++i) {
        Sample& s = samples_.at(ids[i]);
        Map label = resize_bilinear(preds[i - begin], s.image.h, s.image.w);
        clamp_map(label);
        label = quantize_map(label);  // match the on-disk 8-bit precision
        store_.write_pseudo(group, s.id, label);
        s.label = std::move(label);
        s.kind = LabelKind::pseudo;
      }
    }
    pseudo_groups_[group] = {network_name(kind), iteration};
    log_.emit("predict_group", iteration, "predict", network_name(kind), group,
              static_cast<double>(ids.size()));
  }

  std::vector<Map> predict_samples(NetworkKind kind, const std::vector<std::string>& ids,
                                   std::size_t begin, std::size_t end) {
    const int size = kind == NetworkKind::rnet ? cfg_.rnet_input_size : cfg_.snet_input_size;
    std::vector<Image> images;
    std::vector<Map> coarse;
    for (std::size_t i = begin; i < end; ++i) {
      Sample prepared = resize_sample(samples_.at(ids[i]), size);
      images.push_back(std::move(prepared.image));
      if (kind == NetworkKind::rnet) coarse.push_back(std::move(*prepared.coarse));
    }
    return kind == NetworkKind::rnet ? rnet_.predict(images, coarse) : snet_.predict(images);
  }

  std::vector<Map> predict_batch(NetworkKind kind, std::size_t begin, std::size_t end) {
    const int size = kind == NetworkKind::rnet ? cfg_.rnet_input_size : cfg_.snet_input_size;
    std::vector<Image> images;
    std::vector<Map> coarse;
    for (std::size_t i = begin; i < end; ++i) {
      Sample prepared = resize_sample(val_[i], size);
      images.push_back(std::move(prepared.image));
      if (kind == NetworkKind::rnet) {
        if (!prepared.coarse) throw DataError("validation sample lacks a coarse map");
        coarse.push_back(std::move(*prepared.coarse));
      }
    }
    return kind == NetworkKind::rnet ? rnet_.predict(images, coarse) : snet_.predict(images);
  }

  // -- ablation variants -----------------------------------------------------

  /// M1: train on coarse supervision for groups 2..G, then fine-tune on the
  /// real labels of group 1. The fine-tune stage continues the same optimizer
  /// session and decay schedule rather than restarting at the base rate.
  void run_m1() {
    refuse_partial_resume();
    coarse_supervised_.clear();
    std::vector<const Sample*> coarse_phase;
    log_.emit("train_start", 1, "train", "snet");
    for (int g = 2; g <= cfg_.num_groups; ++g) {
      log_.emit("train_group", 1, "train", "snet", g);
      for (const auto& id : group_ids_[g - 1]) {
        Sample copy = samples_.at(id);
        copy.label = copy.coarse;
        coarse_supervised_.push_back(std::move(copy));
      }
    }
    for (const auto& s : coarse_supervised_) coarse_phase.push_back(&s);

    const int epochs = cfg_.optimizer.epochs_per_net;
    net_reset_optimizer(NetworkKind::snet);
    int step = 0;
    double last_mean = 0.0;
    for (int epoch = 1; epoch <= epochs; ++epoch)
      last_mean = epoch_loop(NetworkKind::snet, coarse_phase, {}, 1, epoch, step).mean_loss;
    log_.emit("train_end", 1, "train", "snet", std::nullopt, last_mean);

    log_.emit("train_start", 2, "train", "snet");
    log_.emit("train_group", 2, "train", "snet", 1);
    std::vector<const Sample*> real_phase;
    for (const auto& id : group_ids_[0]) real_phase.push_back(&samples_.at(id));
    for (int epoch = epochs + 1; epoch <= 2 * epochs; ++epoch)
      last_mean = epoch_loop(NetworkKind::snet, {}, real_phase, 2, epoch, step).mean_loss;
    log_.emit("train_end", 2, "train", "snet", std::nullopt, last_mean);
    completed_iterations_ = 2;
  }

  /// M2: real labels only.
  void run_m2() {
    refuse_partial_resume();
    log_.emit("train_start", 1, "train", "snet");
    log_.emit("train_group", 1, "train", "snet", 1);
    std::vector<const Sample*> real_phase;
    for (const auto& id : group_ids_[0]) real_phase.push_back(&samples_.at(id));
    run_epochs_only(NetworkKind::snet, {}, real_phase, 1);
    completed_iterations_ = 1;
  }

  /// M3: train on real labels, refresh every coarse group with predictions,
  /// retrain on the refreshed labels plus the real ones.
  void run_m3() {
    refuse_partial_resume();
    log_.emit("train_start", 1, "train", "snet");
    log_.emit("train_group", 1, "train", "snet", 1);
    std::vector<const Sample*> real_phase;
    for (const auto& id : group_ids_[0]) real_phase.push_back(&samples_.at(id));
    run_epochs_only(NetworkKind::snet, {}, real_phase, 1);

    for (int g = 2; g <= cfg_.num_groups; ++g) predict_group_now(NetworkKind::snet, 1, g);

    log_.emit("train_start", 2, "train", "snet");
    std::vector<const Sample*> pseudo_phase;
    for (int g = 1; g <= cfg_.num_groups; ++g) log_.emit("train_group", 2, "train", "snet", g);
    for (int g = 2; g <= cfg_.num_groups; ++g)
      for (const auto& id : group_ids_[g - 1]) pseudo_phase.push_back(&samples_.at(id));
    run_epochs_only(NetworkKind::snet, pseudo_phase, real_phase, 2);
    completed_iterations_ = 2;
  }

  /// No1: no alternation. The refiner trains once on the real labels, labels
  /// everything, and the saliency net trains once on the result.
  void run_no1() {
    refuse_partial_resume();
    log_.emit("train_start", 1, "train", "rnet");
    log_.emit("train_group", 1, "train", "rnet", 1);
    std::vector<const Sample*> real_phase;
    for (const auto& id : group_ids_[0]) real_phase.push_back(&samples_.at(id));
    run_epochs_only(NetworkKind::rnet, {}, real_phase, 1);

    for (int g = 2; g <= cfg_.num_groups; ++g) predict_group_now(NetworkKind::rnet, 1, g);

    log_.emit("train_start", 2, "train", "snet");
    std::vector<const Sample*> pseudo_phase;
    for (int g = 1; g <= cfg_.num_groups; ++g) log_.emit("train_group", 2, "train", "snet", g);
    for (int g = 2; g <= cfg_.num_groups; ++g)
      for (const auto& id : group_ids_[g - 1]) pseudo_phase.push_back(&samples_.at(id));
    run_epochs_only(NetworkKind::snet, pseudo_phase, real_phase, 2);
    completed_iterations_ = 2;
  }

  void run_epochs_only(NetworkKind kind, const std::vector<const Sample*>& pseudo,
                       const std::vector<const Sample*>& real, int iteration) {
    run_epochs(kind, pseudo, real, iteration);
  }

  void refuse_partial_resume() {
    if (completed_iterations_ > 0)
      throw ConfigError("ablation-mode runs are single-pass and cannot resume; "
                        "remove the run directory to restart");
  }

  // -- persistence -----------------------------------------------------------

  void persist_iteration() {
    store_.save_checkpoint("rnet_current", rnet_);
    store_.save_checkpoint("snet_current", snet_);
    if (cred_.rnet.has_best) write_raw(store_.checkpoint_path("rnet_best"), cred_.rnet.best_params);
    if (cred_.snet.has_best) write_raw(store_.checkpoint_path("snet_best"), cred_.snet.best_params);
    write_manifest(false);
  }

  static void write_raw(const fs::path& path, const std::string& bytes) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    fs::rename(tmp, path);
  }

  static std::string read_raw(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  }

  void write_manifest(bool finalized) {
    json gate{{"rnet", cred_.rnet.has_best ? json(cred_.rnet.best_mae) : json(nullptr)},
              {"snet", cred_.snet.has_best ? json(cred_.snet.best_mae) : json(nullptr)}};
    json decisions = json::array();
    for (const auto& d : cred_.decisions) decisions.push_back(d.to_json());
    json pseudo = json::object();
    for (const auto& [group, info] : pseudo_groups_)
      pseudo[std::to_string(group)] = {{"by", info.first}, {"iteration", info.second}};
    json manifest{{"version", 1},
                  {"seed", cfg_.seed},
                  {"config", cfg_.to_json()},
                  {"schedule", schedule_.plans.empty() ? json(nullptr) : schedule_.to_json()},
                  {"completed_iterations", completed_iterations_},
                  {"finalized", finalized},
                  {"gate", {{"best_mae", gate}, {"decisions", decisions}}},
                  {"checkpoints",
                   {{"rnet_current", "checkpoints/rnet_current.ckpt"},
                    {"snet_current", "checkpoints/snet_current.ckpt"},
                    {"rnet_best", "checkpoints/rnet_best.ckpt"},
                    {"snet_best", "checkpoints/snet_best.ckpt"},
                    {"snet_final", "checkpoints/snet_final.ckpt"}}},
                  {"pseudo_groups", pseudo}};
    store_.write_manifest(manifest);
  }

  void resume_state(bool scheduled) {
    json manifest = store_.read_manifest();
    json stored_cfg = manifest.at("config");
    json current_cfg = cfg_.to_json();
    if (stored_cfg != current_cfg) {
      std::string diff;
      for (const auto& [key, value] : current_cfg.items())
        if (!stored_cfg.contains(key) || stored_cfg.at(key) != value)
          diff += "\n  " + key + ": manifest=" +
                  (stored_cfg.contains(key) ? stored_cfg.at(key).dump() : "<absent>") +
                  " requested=" + value.dump();
      throw ConfigError("run directory was created with a different config; refusing to resume." +
                        diff);
    }
    finalized_ = manifest.value("finalized", false);
    completed_iterations_ = manifest.value("completed_iterations", 0);
    if (finalized_) return;
    if (!scheduled && completed_iterations_ > 0) refuse_partial_resume();

    if (completed_iterations_ > 0) {
      store_.load_checkpoint("rnet_current", rnet_);
      store_.load_checkpoint("snet_current", snet_);
      const json& best = manifest.at("gate").at("best_mae");
      if (!best.at("rnet").is_null()) {
        cred_.rnet.has_best = true;
        cred_.rnet.best_mae = best.at("rnet").get<double>();
        cred_.rnet.best_params = read_raw(store_.checkpoint_path("rnet_best"));
      }
      if (!best.at("snet").is_null()) {
        cred_.snet.has_best = true;
        cred_.snet.best_mae = best.at("snet").get<double>();
        cred_.snet.best_params = read_raw(store_.checkpoint_path("snet_best"));
      }
      for (const auto& d : manifest.at("gate").at("decisions")) {
        GateRecord r;
        r.iteration = d.at("iteration").get<int>();
        r.network = d.at("network").get<std::string>();
        r.decision = d.at("decision").get<std::string>();
        r.candidate_mae = d.at("candidate_mae").get<double>();
        r.best_mae_after = d.at("best_mae_after").get<double>();
        cred_.decisions.push_back(std::move(r));
      }
      for (const auto& [group_str, info] : manifest.at("pseudo_groups").items()) {
        int group = std::stoi(group_str);
        pseudo_groups_[group] = {info.at("by").get<std::string>(),
                                 info.at("iteration").get<int>()};
        for (const auto& id : group_ids_[group - 1]) {
          Sample& s = samples_.at(id);
          s.label = store_.read_pseudo(group, id);
          s.kind = LabelKind::pseudo;
        }
      }
    }
    log_ = EventLog::resume(store_.events_path(), completed_iterations_);
    log_.run_start();
  }

  std::string net_serialize(NetworkKind kind) {
    return kind == NetworkKind::rnet ? serialize_net(rnet_) : serialize_net(snet_);
  }

  void net_deserialize(NetworkKind kind, const std::string& bytes) {
    if (kind == NetworkKind::rnet)
      deserialize_net(rnet_, bytes);
    else
      deserialize_net(snet_, bytes);
  }

  void net_reset_optimizer(NetworkKind kind) {
    if (kind == NetworkKind::rnet)
      rnet_.reset_optimizer();
    else
      snet_.reset_optimizer();
  }

  RunConfig cfg_;
  RefinerNetwork& rnet_;
  SaliencyNetwork& snet_;
  RunStore store_;
  LockFile lock_;
  EventLog log_;
  Schedule schedule_;
  CredibilityState cred_;
  std::map<std::string, Sample> samples_;
  std::vector<std::vector<std::string>> group_ids_;
  std::vector<Sample> val_;
  std::vector<Sample> contaminated_;
  std::vector<Sample> coarse_supervised_;
  std::map<int, std::pair<std::string, int>> pseudo_groups_;
  int completed_iterations_ = 0;
  bool finalized_ = false;
};

}  // namespace hysod

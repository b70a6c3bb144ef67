// hysod command-line interface: prepare | schedule | train | predict | eval.
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime abort.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "hysod/config.hpp"
#include "hysod/metrics.hpp"
#include "hysod/orchestrator.hpp"
#include "hysod/schedule.hpp"
#include "hysod/synthetic.hpp"

namespace fs = std::filesystem;
using hysod::json;

namespace {

struct CommonFlags {
  std::string config_file;
  json overrides = json::object();
};

hysod::RunConfig load_config(const CommonFlags& flags) {
  if (!flags.config_file.empty()) return hysod::RunConfig::load(flags.config_file, flags.overrides);
  json j = flags.overrides;
  return hysod::RunConfig::from_json(j);
}

void add_override_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_file, "JSON config file (flags override file keys)");
  auto set = [&flags](const std::string& key) {
    return [&flags, key](const std::string& v) { flags.overrides[key] = v; };
  };
  auto set_int = [&flags](const std::string& key) {
    return [&flags, key](const std::string& v) { flags.overrides[key] = std::stoll(v); };
  };
  cmd->add_option_function<std::string>("--train-dir", set("train_dir"), "training dataset root");
  cmd->add_option_function<std::string>("--val-dir", set("val_dir"), "validation dataset root");
  cmd->add_option_function<std::string>("--out-dir", set("out_dir"), "run output directory");
  cmd->add_option_function<std::string>("--num-groups", set_int("num_groups"), "group count");
  cmd->add_option_function<std::string>("--num-real", set_int("num_real"), "real-labeled count");
  cmd->add_option_function<std::string>("--seed", set_int("seed"), "master seed");
  cmd->add_option_function<std::string>("--ablation-mode", set("ablation_mode"),
                                        "full|M1|M2|M3|No1|No2|No3|No4");
  cmd->add_option_function<std::string>(
      "--epochs",
      [&flags](const std::string& v) { flags.overrides["optimizer"]["epochs_per_net"] = std::stoll(v); },
      "epochs per network per iteration");
  cmd->add_option_function<std::string>(
      "--batch-size",
      [&flags](const std::string& v) { flags.overrides["optimizer"]["batch_size"] = std::stoll(v); },
      "mini-batch size");
  cmd->add_option_function<std::string>(
      "--lr",
      [&flags](const std::string& v) { flags.overrides["optimizer"]["learning_rate"] = std::stod(v); },
      "initial learning rate");
}

int cmd_prepare(const CommonFlags& flags) {
  hysod::RunConfig cfg = load_config(flags);
  if (cfg.train_dir.empty()) throw hysod::ConfigError("prepare: train_dir is required");
  hysod::DatasetManifest manifest =
      hysod::prepare_dataset(cfg.train_dir, cfg.num_groups, cfg.num_real, cfg.seed);
  std::cout << "prepared " << manifest.entries.size() << " samples in " << cfg.num_groups
            << " groups; manifest: " << hysod::dataset_manifest_path(cfg.train_dir).string()
            << "\n";
  if (!cfg.val_dir.empty()) {
    auto ids = hysod::prepare_validation(cfg.val_dir);
    std::cout << "validation set ready: " << ids.size() << " images\n";
  }
  return 0;
}

int cmd_schedule(const CommonFlags& flags, int groups_flag, int group1_flag,
                 const std::string& json_out) {
  int groups = groups_flag;
  int group1 = group1_flag;
  if (groups == 0 || group1 == 0) {
    hysod::RunConfig cfg = load_config(flags);
    if (groups == 0) groups = cfg.num_groups;
    if (group1 == 0) group1 = cfg.num_real;
  }
  hysod::Schedule schedule = hysod::build_schedule(groups, group1);
  std::cout << schedule.plans.size() << " iterations for " << groups << " groups\n"
            << schedule.table();
  if (!json_out.empty()) {
    std::ofstream out(json_out, std::ios::trunc);
    if (!out) throw hysod::DataError("cannot write " + json_out);
    out << schedule.to_json().dump(2) << "\n";
  }
  return 0;
}

int cmd_train(const CommonFlags& flags) {
  hysod::RunConfig cfg = load_config(flags);
  if (cfg.train_dir.empty() || cfg.val_dir.empty())
    throw hysod::ConfigError("train: train_dir and val_dir are required");

  hysod::RNetConfig rnet_cfg;
  std::copy(cfg.rnet_channels.begin(), cfg.rnet_channels.end(), rnet_cfg.encoder_channels.begin());
  rnet_cfg.input_size = cfg.rnet_input_size;
  rnet_cfg.momentum = cfg.optimizer.momentum;
  rnet_cfg.weight_decay = cfg.optimizer.weight_decay;
  hysod::RNet rnet(rnet_cfg, cfg.seed);

  hysod::SNetConfig snet_cfg;
  std::copy(cfg.snet_channels.begin(), cfg.snet_channels.end(), snet_cfg.encoder_channels.begin());
  snet_cfg.input_size = cfg.snet_input_size;
  snet_cfg.momentum = cfg.optimizer.momentum;
  snet_cfg.weight_decay = cfg.optimizer.weight_decay;
  hysod::ReferenceSNet snet(snet_cfg, cfg.seed);

  hysod::Trainer trainer(cfg, rnet, snet);
  trainer.run();
  std::cout << "run complete; artifacts in " << cfg.resolved_out_dir().string() << "\n";
  return 0;
}

int cmd_predict(const std::string& checkpoint, const std::string& image_dir,
                const std::string& out_dir) {
  std::ifstream in(checkpoint, std::ios::binary);
  if (!in) throw hysod::DataError("cannot open checkpoint " + checkpoint);
  hysod::ReferenceSNet net = hysod::ReferenceSNet::from_checkpoint(in);

  auto ids = hysod::list_png_ids(image_dir);
  fs::create_directories(out_dir);
  for (const auto& id : ids) {
    hysod::Image img = hysod::load_image_png(fs::path(image_dir) / (id + ".png"));
    std::vector<hysod::Map> pred =
        net.predict({hysod::resize_bilinear(img, net.input_size(), net.input_size())});
    hysod::Map full = hysod::resize_bilinear(pred[0], img.h, img.w);
    hysod::clamp_map(full);
    hysod::save_map_png(fs::path(out_dir) / (id + ".png"), full);
  }
  std::cout << "wrote " << ids.size() << " saliency maps to " << out_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir, const std::string& report_path,
             const std::string& csv_path, const std::string& name, bool per_image) {
  std::vector<std::string> warnings;
  hysod::MetricsReport report =
      hysod::evaluate_corpus(pred_dir, gt_dir, name, per_image, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  std::cout << report.table();
  if (!report_path.empty()) {
    std::ofstream out(report_path, std::ios::trunc);
    if (!out) throw hysod::DataError("cannot write " + report_path);
    out << report.to_json().dump(2) << "\n";
  }
  if (!csv_path.empty()) {
    std::ofstream out(csv_path, std::ios::trunc);
    if (!out) throw hysod::DataError("cannot write " + csv_path);
    report.write_pr_csv(out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid-label salient object detection pipeline"};
  app.require_subcommand(1);

  CommonFlags prepare_flags;
  CLI::App* prepare = app.add_subcommand("prepare", "validate a dataset and build its group manifest");
  add_override_flags(prepare, prepare_flags);

  CommonFlags schedule_flags;
  int sched_groups = 0, sched_group1 = 0;
  std::string sched_json;
  CLI::App* schedule = app.add_subcommand("schedule", "print the iteration plan");
  add_override_flags(schedule, schedule_flags);
  schedule->add_option("--groups", sched_groups, "group count (overrides config)");
  schedule->add_option("--group1-size", sched_group1, "size of the real-labeled group");
  schedule->add_option("--json", sched_json, "also write the schedule as JSON");

  CommonFlags train_flags;
  CLI::App* train = app.add_subcommand("train", "run the alternate-iteration pipeline");
  add_override_flags(train, train_flags);

  std::string pred_ckpt, pred_images, pred_out;
  CLI::App* predict = app.add_subcommand("predict", "saliency inference from a checkpoint");
  predict->add_option("--checkpoint", pred_ckpt, "saliency network checkpoint")->required();
  predict->add_option("--images", pred_images, "input image directory")->required();
  predict->add_option("--out", pred_out, "output directory")->required();

  std::string eval_pred, eval_gt, eval_report, eval_csv, eval_name;
  bool eval_per_image = false;
  CLI::App* eval = app.add_subcommand("eval", "score predictions against ground truth");
  eval->add_option("--pred", eval_pred, "prediction directory")->required();
  eval->add_option("--gt", eval_gt, "ground-truth directory")->required();
  eval->add_option("--report", eval_report, "write report JSON here");
  eval->add_option("--csv", eval_csv, "write the PR curve as CSV");
  eval->add_option("--name", eval_name, "dataset name in the report");
  eval->add_flag("--per-image", eval_per_image, "keep per-image metrics in the report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (prepare->parsed()) return cmd_prepare(prepare_flags);
    if (schedule->parsed()) return cmd_schedule(schedule_flags, sched_groups, sched_group1, sched_json);
    if (train->parsed()) return cmd_train(train_flags);
    if (predict->parsed()) return cmd_predict(pred_ckpt, pred_images, pred_out);
    if (eval->parsed()) return cmd_eval(eval_pred, eval_gt, eval_report, eval_csv, eval_name,
                                        eval_per_image);
  } catch (const hysod::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const hysod::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const hysod::RuntimeAbort& e) {
    std::cerr << "aborted: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}

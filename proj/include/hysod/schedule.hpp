#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hysod/common.hpp"

namespace hysod {

using nlohmann::json;

/// One alternate-training round: which groups each network trains on, which
/// group it then labels, and how GROUP 1 splits into real vs contaminated
/// supervision.
struct IterationPlan {
  int index = 1;  // 1-based
  std::vector<int> rnet_train_groups;
  std::optional<int> rnet_predict_group;
  std::vector<int> snet_train_groups;
  std::optional<int> snet_predict_group;
  int real_count = 0;
  int contaminated_count = 0;

  json to_json() const {
    json j{{"index", index},
           {"rnet_train_groups", rnet_train_groups},
           {"snet_train_groups", snet_train_groups},
           {"real_count", real_count},
           {"contaminated_count", contaminated_count}};
    j["rnet_predict_group"] = rnet_predict_group ? json(*rnet_predict_group) : json(nullptr);
    j["snet_predict_group"] = snet_predict_group ? json(*snet_predict_group) : json(nullptr);
    return j;
  }
};

struct Schedule {
  int num_groups = 0;
  int group1_size = 0;
  std::vector<IterationPlan> plans;

  json to_json() const {
    json plans_json = json::array();
    for (const auto& p : plans) plans_json.push_back(p.to_json());
    return json{{"num_groups", num_groups}, {"group1_size", group1_size}, {"plans", plans_json}};
  }

  std::string table() const {
    std::ostringstream os;
    os << "iteration | refiner trains -> labels | saliency trains -> labels | real/contaminated\n";
    for (const auto& p : plans) {
      auto group_list = [](const std::vector<int>& g) {
        std::string s = "{";
        for (std::size_t i = 0; i < g.size(); ++i) s += (i ? "," : "") + std::to_string(g[i]);
        return s + "}";
      };
      os << "    " << p.index << "     | " << group_list(p.rnet_train_groups) << " -> "
         << (p.rnet_predict_group ? std::to_string(*p.rnet_predict_group) : std::string("-"))
         << " | " << group_list(p.snet_train_groups) << " -> "
         << (p.snet_predict_group ? std::to_string(*p.snet_predict_group) : std::string("-"))
         << " | " << p.real_count << "/" << p.contaminated_count << "\n";
    }
    return os.str();
  }
};

/// Incremental group schedule. Round 1: the refiner trains on GROUP 1 and
/// labels group 2; the saliency net trains on groups {1, 2} and labels group
/// 3. From round t >= 2 the refiner trains on GROUP 1 plus the group the
/// saliency net labeled last, and the saliency net trains on GROUP 1 plus
/// every refiner-labeled group so far; each labels the next untouched group
/// while any remain. ceil(G / 2) rounds traverse the whole set; a final
/// train-only round absorbs the last labeled group. GROUP 1 starts half real
/// / half contaminated and shifts 10% of its size to real each round.
inline Schedule build_schedule(int num_groups, int group1_size) {
  if (num_groups < 2) throw ConfigError("schedule: need at least two groups");
  if (group1_size < 1) throw ConfigError("schedule: group 1 must be nonempty");

  Schedule schedule;
  schedule.num_groups = num_groups;
  schedule.group1_size = group1_size;

  const int total_plans = (num_groups + 1) / 2;
  const int real_step = static_cast<int>(std::llround(0.1 * group1_size));
  int next_group = 2;
  int last_snet_labeled = 0;
  std::vector<int> refiner_labeled;

  for (int t = 1; t <= total_plans; ++t) {
    IterationPlan plan;
    plan.index = t;
    plan.rnet_train_groups = {1};
    if (t > 1 && last_snet_labeled != 0) plan.rnet_train_groups.push_back(last_snet_labeled);
    if (next_group <= num_groups) {
      plan.rnet_predict_group = next_group++;
      refiner_labeled.push_back(*plan.rnet_predict_group);
    }
    plan.snet_train_groups = {1};
    plan.snet_train_groups.insert(plan.snet_train_groups.end(), refiner_labeled.begin(),
                                  refiner_labeled.end());
    if (next_group <= num_groups) {
      plan.snet_predict_group = next_group++;
      last_snet_labeled = *plan.snet_predict_group;
    } else {
      last_snet_labeled = 0;
    }

    int real = (group1_size + 1) / 2 + (t - 1) * real_step;
    plan.real_count = std::min(real, group1_size);
    plan.contaminated_count = group1_size - plan.real_count;
    schedule.plans.push_back(std::move(plan));
  }
  return schedule;
}

}  // namespace hysod

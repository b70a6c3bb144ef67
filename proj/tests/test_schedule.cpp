#include "doctest.h"

#include <set>

#include "hysod/schedule.hpp"

using namespace hysod;

TEST_CASE("schedule golden trace for 10 groups") {
  Schedule s = build_schedule(10, 1000);
  REQUIRE(s.plans.size() == 5);

  // Refiner labels the even groups, the saliency net the odd ones.
  std::vector<int> r_pred, s_pred;
  for (const auto& p : s.plans) {
    if (p.rnet_predict_group) r_pred.push_back(*p.rnet_predict_group);
    if (p.snet_predict_group) s_pred.push_back(*p.snet_predict_group);
  }
  CHECK(r_pred == std::vector<int>{2, 4, 6, 8, 10});
  CHECK(s_pred == std::vector<int>{3, 5, 7, 9});

  CHECK(s.plans[0].rnet_train_groups == std::vector<int>{1});
  CHECK(s.plans[0].snet_train_groups == std::vector<int>{1, 2});
  CHECK(s.plans[1].rnet_train_groups == std::vector<int>{1, 3});
  CHECK(s.plans[1].snet_train_groups == std::vector<int>{1, 2, 4});
  CHECK(s.plans[4].rnet_train_groups == std::vector<int>{1, 9});
  CHECK(s.plans[4].snet_train_groups == std::vector<int>{1, 2, 4, 6, 8, 10});
  CHECK_FALSE(s.plans[4].snet_predict_group.has_value());

  // Contamination progression (500,500) -> (900,100).
  std::vector<std::pair<int, int>> split;
  for (const auto& p : s.plans) split.emplace_back(p.real_count, p.contaminated_count);
  CHECK(split == std::vector<std::pair<int, int>>{{500, 500}, {600, 400}, {700, 300},
                                                  {800, 200}, {900, 100}});
}

TEST_CASE("schedule plan counts for the reference group settings") {
  CHECK(build_schedule(5, 1000).plans.size() == 3);
  CHECK(build_schedule(15, 1000).plans.size() == 8);
  CHECK(build_schedule(10, 1000).plans.size() == 5);
  CHECK(build_schedule(2, 10).plans.size() == 1);
}

TEST_CASE("schedule: 5 groups walks out of data with a train-only round") {
  Schedule s = build_schedule(5, 100);
  REQUIRE(s.plans.size() == 3);
  CHECK(s.plans[2].rnet_train_groups == std::vector<int>{1, 5});
  CHECK_FALSE(s.plans[2].rnet_predict_group.has_value());
  CHECK_FALSE(s.plans[2].snet_predict_group.has_value());
}

TEST_CASE("schedule: 15 groups caps the real split at the full group") {
  Schedule s = build_schedule(15, 1000);
  REQUIRE(s.plans.size() == 8);
  CHECK(s.plans[5].real_count == 1000);
  CHECK(s.plans[5].contaminated_count == 0);
  CHECK(s.plans[7].real_count == 1000);
}

TEST_CASE("every group is consumed exactly once across any schedule") {
  for (int g = 2; g <= 24; ++g) {
    Schedule s = build_schedule(g, 40);
    CHECK(s.plans.size() == static_cast<std::size_t>((g + 1) / 2));
    std::set<int> predicted;
    int count = 0;
    for (const auto& p : s.plans) {
      CHECK(p.real_count + p.contaminated_count == 40);
      CHECK(std::find(p.rnet_train_groups.begin(), p.rnet_train_groups.end(), 1) !=
            p.rnet_train_groups.end());
      CHECK(std::find(p.snet_train_groups.begin(), p.snet_train_groups.end(), 1) !=
            p.snet_train_groups.end());
      for (auto pg : {p.rnet_predict_group, p.snet_predict_group})
        if (pg) {
          CHECK(predicted.insert(*pg).second);  // never consumed twice
          ++count;
        }
    }
    CHECK(count == g - 1);
    // Every labeled group later appears in some training set.
    std::set<int> trained;
    for (const auto& p : s.plans) {
      trained.insert(p.rnet_train_groups.begin(), p.rnet_train_groups.end());
      trained.insert(p.snet_train_groups.begin(), p.snet_train_groups.end());
    }
    for (int grp = 1; grp <= g; ++grp) CHECK(trained.count(grp) == 1);
  }
}

TEST_CASE("schedule rejects degenerate inputs") {
  CHECK_THROWS_AS(build_schedule(1, 100), ConfigError);
  CHECK_THROWS_AS(build_schedule(10, 0), ConfigError);
}

TEST_CASE("schedule json and table render") {
  Schedule s = build_schedule(4, 20);
  json j = s.to_json();
  CHECK(j.at("plans").size() == 2);
  CHECK(j.at("plans")[0].at("rnet_predict_group").get<int>() == 2);
  CHECK(j.at("plans")[1].at("snet_predict_group").is_null());
  std::string table = s.table();
  CHECK(table.find("{1,2,4}") != std::string::npos);
}

#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "hysod/common.hpp"

namespace hysod {

namespace fs = std::filesystem;
using nlohmann::json;

/// One line of the append-only run log. `time` is a logical counter, not wall
/// clock, so identical runs produce identical logs.
struct Event {
  std::uint64_t time = 0;
  int iteration = 0;  // 0 for run-level records
  std::string phase;  // setup | train | gate | predict
  std::string network;  // rnet | snet | -
  std::optional<int> group;
  std::string action;
  std::optional<double> metric;

  json to_json() const {
    json j{{"time", time},
           {"iteration", iteration},
           {"phase", phase},
           {"network", network},
           {"action", action}};
    j["group"] = group ? json(*group) : json(nullptr);
    if (metric) j["metric"] = *metric;
    return j;
  }

  static Event from_json(const json& j) {
    Event e;
    e.time = j.at("time").get<std::uint64_t>();
    e.iteration = j.at("iteration").get<int>();
    e.phase = j.at("phase").get<std::string>();
    e.network = j.at("network").get<std::string>();
    e.action = j.at("action").get<std::string>();
    if (!j.at("group").is_null()) e.group = j.at("group").get<int>();
    if (j.contains("metric")) e.metric = j.at("metric").get<double>();
    return e;
  }
};

/// Line-delimited JSON event log, kept in memory and optionally mirrored to a
/// file. On resume the file is truncated back to the last completed
/// iteration so the final log matches an uninterrupted run (modulo the extra
/// run_start header).
class EventLog {
public:
  EventLog() = default;

  explicit EventLog(fs::path file) : path_(std::move(file)) {
    out_.open(path_, std::ios::trunc);
    if (!out_) throw DataError("cannot open event log " + path_.string());
  }

  /// Reopens an existing log, dropping every record after the
  /// `completed_iterations`-th iteration_end.
  static EventLog resume(const fs::path& file, int completed_iterations) {
    EventLog log;
    log.path_ = file;
    std::vector<Event> kept;
    if (completed_iterations > 0) {
      std::ifstream in(file);
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        Event e = Event::from_json(json::parse(line));
        kept.push_back(e);
        if (e.action == "iteration_end" && e.iteration == completed_iterations) break;
      }
    }
    log.out_.open(file, std::ios::trunc);
    if (!log.out_) throw DataError("cannot reopen event log " + file.string());
    for (const auto& e : kept) {
      log.out_ << e.to_json().dump() << "\n";
      log.events_.push_back(e);
      log.next_time_ = std::max(log.next_time_, e.time + 1);
    }
    log.out_.flush();
    return log;
  }

  /// Header record; does not advance the logical clock, so a resumed log
  /// differs from an uninterrupted one only by the duplicated header line.
  void run_start() {
    Event e;
    e.time = next_time_;
    e.iteration = 0;
    e.phase = "setup";
    e.network = "-";
    e.action = "run_start";
    write(e);
  }

  void emit(const std::string& action, int iteration, const std::string& phase,
            const std::string& network, std::optional<int> group = std::nullopt,
            std::optional<double> metric = std::nullopt) {
    Event e;
    e.time = next_time_++;
    e.iteration = iteration;
    e.phase = phase;
    e.network = network;
    e.group = group;
    e.action = action;
    e.metric = metric;
    write(e);
  }

  const std::vector<Event>& events() const { return events_; }

  /// Events filtered to an action name, test convenience.
  std::vector<Event> with_action(const std::string& action) const {
    std::vector<Event> out;
    for (const auto& e : events_)
      if (e.action == action) out.push_back(e);
    return out;
  }

private:
  void write(const Event& e) {
    events_.push_back(e);
    if (out_.is_open()) {
      out_ << e.to_json().dump() << "\n";
      out_.flush();
    }
  }

  fs::path path_;
  std::ofstream out_;
  std::vector<Event> events_;
  std::uint64_t next_time_ = 0;
};

}  // namespace hysod

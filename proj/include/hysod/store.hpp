#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "hysod/config.hpp"
#include "hysod/png_io.hpp"

namespace hysod {

/// Exclusive-create lock file guarding a run directory against concurrent
/// writers. Released on destruction; a crash leaves the file behind and the
/// next run refuses to start until it is removed.
class LockFile {
public:
  LockFile() = default;

  explicit LockFile(const fs::path& path) : path_(path) {
    int fd = ::open(path.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0)
      throw DataError("run directory is locked (" + path.string() +
                      " exists); remove it if no other process is running");
    ::close(fd);
    held_ = true;
  }

  LockFile(LockFile&& other) noexcept : path_(std::move(other.path_)), held_(other.held_) {
    other.held_ = false;
  }

  LockFile& operator=(LockFile&& other) noexcept {
    release();
    path_ = std::move(other.path_);
    held_ = other.held_;
    other.held_ = false;
    return *this;
  }

  LockFile(const LockFile&) = delete;
  LockFile& operator=(const LockFile&) = delete;

  ~LockFile() { release(); }

  void release() {
    if (held_) {
      std::error_code ec;
      fs::remove(path_, ec);
      held_ = false;
    }
  }

private:
  fs::path path_;
  bool held_ = false;
};

/// Run-directory layout: manifest.json, events.jsonl, checkpoints/*.ckpt,
/// pseudo/group_<g>/<id>.png. Self-describing: a run can be resumed or
/// re-evaluated from the directory alone.
class RunStore {
public:
  RunStore() = default;

  explicit RunStore(fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
    fs::create_directories(dir_ / "checkpoints");
    fs::create_directories(dir_ / "pseudo");
  }

  const fs::path& dir() const { return dir_; }
  fs::path manifest_path() const { return dir_ / "manifest.json"; }
  fs::path events_path() const { return dir_ / "events.jsonl"; }
  fs::path lock_path() const { return dir_ / "lock"; }
  fs::path checkpoint_path(const std::string& name) const {
    return dir_ / "checkpoints" / (name + ".ckpt");
  }
  fs::path pseudo_dir(int group) const { return dir_ / "pseudo" / ("group_" + std::to_string(group)); }
  fs::path pseudo_path(int group, const std::string& id) const {
    return pseudo_dir(group) / (id + ".png");
  }

  bool has_manifest() const { return fs::exists(manifest_path()); }

  json read_manifest() const {
    std::ifstream in(manifest_path());
    if (!in) throw DataError("cannot open run manifest " + manifest_path().string());
    json j;
    in >> j;
    return j;
  }

  void write_manifest(const json& j) const {
    fs::path tmp = manifest_path();
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      if (!out) throw DataError("cannot write run manifest " + tmp.string());
      out << j.dump(2) << "\n";
    }
    fs::rename(tmp, manifest_path());
  }

  void write_pseudo(int group, const std::string& id, const Map& label) const {
    fs::create_directories(pseudo_dir(group));
    save_map_png(pseudo_path(group, id), label);
  }

  Map read_pseudo(int group, const std::string& id) const {
    return load_map_png(pseudo_path(group, id));
  }

  bool has_pseudo(int group, const std::string& id) const {
    return fs::exists(pseudo_path(group, id));
  }

  template <typename Net>
  void save_checkpoint(const std::string& name, const Net& net) const {
    fs::path path = checkpoint_path(name);
    fs::path tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw DataError("cannot write checkpoint " + tmp.string());
      net.save(out);
    }
    fs::rename(tmp, path);
  }

  template <typename Net>
  void load_checkpoint(const std::string& name, Net& net) const {
    std::ifstream in(checkpoint_path(name), std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + checkpoint_path(name).string());
    net.load(in);
  }

private:
  fs::path dir_;
};

template <typename Net>
std::string serialize_net(const Net& net) {
  std::ostringstream os(std::ios::binary);
  net.save(os);
  return os.str();
}

template <typename Net>
void deserialize_net(Net& net, const std::string& bytes) {
  std::istringstream is(bytes, std::ios::binary);
  net.load(is);
}

}  // namespace hysod

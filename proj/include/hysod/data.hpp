#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hysod/mbd.hpp"
#include "hysod/png_io.hpp"

namespace hysod {

namespace fs = std::filesystem;
using nlohmann::json;

enum class LabelKind { real, coarse, pseudo, contaminated, none };

inline const char* to_string(LabelKind k) {
  switch (k) {
    case LabelKind::real: return "real";
    case LabelKind::coarse: return "coarse";
    case LabelKind::pseudo: return "pseudo";
    case LabelKind::contaminated: return "contaminated";
    default: return "none";
  }
}

inline LabelKind label_kind_from_string(const std::string& s) {
  if (s == "real") return LabelKind::real;
  if (s == "coarse") return LabelKind::coarse;
  if (s == "pseudo") return LabelKind::pseudo;
  if (s == "contaminated") return LabelKind::contaminated;
  if (s == "none") return LabelKind::none;
  throw DataError("unknown label kind: " + s);
}

/// One training/eval item. `coarse` is the unsupervised map used only as
/// refinement input; `label` is the supervision map whose provenance `kind`
/// tracks.
struct Sample {
  std::string id;
  Image image;
  std::optional<Map> coarse;
  std::optional<Map> label;
  LabelKind kind = LabelKind::none;
  int source_group = 1;
};

struct GroupPartition {
  std::vector<std::vector<std::string>> groups;  // groups[0] is GROUP 1
  int real_group_index = 1;
};

/// Geometric label-perturbation ranges. All crop/occlusion fractions must be
/// valid fractions of the map area; ranges are inclusive.
struct ContaminationSpec {
  double rotation_min_deg = -15.0;
  double rotation_max_deg = 15.0;
  double crop_min = 0.10;
  double crop_max = 0.20;
  double occlusion_min = 0.0;
  double occlusion_max = 0.25;
  std::uint64_t seed = 0;

  void validate() const {
    if (rotation_min_deg > rotation_max_deg) throw ConfigError("contamination: empty rotation range");
    if (crop_min > crop_max || crop_min < 0.0 || crop_max >= 1.0)
      throw ConfigError("contamination: crop fraction range must lie in [0, 1)");
    if (occlusion_min > occlusion_max || occlusion_min < 0.0 || occlusion_max >= 1.0)
      throw ConfigError("contamination: occlusion fraction range must lie in [0, 1)");
  }
};

/// Splits ids into groups: GROUP 1 holds every real-labeled sample, the
/// remaining groups share the coarse-labeled samples as evenly as possible
/// (sizes differ by at most one; earlier groups take the extras). The coarse
/// ids are shuffled deterministically by `seed`.
inline GroupPartition partition_ids(const std::vector<std::pair<std::string, LabelKind>>& ids,
                                    int num_groups, int num_real, std::uint64_t seed) {
  if (num_groups < 2) throw ConfigError("partition: num_groups must be at least 2");
  if (num_groups > static_cast<int>(ids.size()))
    throw ConfigError("partition: num_groups exceeds sample count");
  std::vector<std::string> real_ids, coarse_ids;
  for (const auto& [id, kind] : ids) {
    if (kind == LabelKind::real)
      real_ids.push_back(id);
    else
      coarse_ids.push_back(id);
  }
  if (static_cast<int>(real_ids.size()) < num_real)
    throw ConfigError("partition: expected " + std::to_string(num_real) +
                      " real-labeled samples, found " + std::to_string(real_ids.size()));
  if (static_cast<int>(real_ids.size()) > num_real)
    throw ConfigError("partition: more real-labeled samples (" +
                      std::to_string(real_ids.size()) + ") than num_real " +
                      std::to_string(num_real));

  Rng rng(seed);
  rng.shuffle(coarse_ids);

  GroupPartition part;
  part.groups.resize(num_groups);
  part.groups[0] = real_ids;
  int rest = num_groups - 1;
  std::size_t total = coarse_ids.size();
  std::size_t base = total / rest;
  std::size_t extra = total % rest;
  std::size_t cursor = 0;
  for (int g = 0; g < rest; ++g) {
    std::size_t size = base + (static_cast<std::size_t>(g) < extra ? 1 : 0);
    part.groups[g + 1].assign(coarse_ids.begin() + cursor, coarse_ids.begin() + cursor + size);
    cursor += size;
  }
  return part;
}

inline GroupPartition partition(const std::vector<Sample>& samples, int num_groups, int num_real,
                                std::uint64_t seed) {
  std::vector<std::pair<std::string, LabelKind>> ids;
  ids.reserve(samples.size());
  for (const auto& s : samples) ids.emplace_back(s.id, s.kind);
  return partition_ids(ids, num_groups, num_real, seed);
}

/// Degrades a real label geometrically (rotate, crop-and-resize, rectangular
/// occlusion); the image is left untouched. Deterministic in (spec.seed, id).
inline Sample contaminate(const Sample& sample, const ContaminationSpec& spec) {
  if (sample.kind != LabelKind::real)
    throw std::invalid_argument("contaminate: sample must carry a real label");
  if (!sample.label) throw std::invalid_argument("contaminate: sample has no label");
  spec.validate();

  Rng rng(splitmix64(spec.seed ^ fnv1a(sample.id)));
  double deg = rng.uniform(spec.rotation_min_deg, spec.rotation_max_deg);
  double crop = rng.uniform(spec.crop_min, spec.crop_max);
  double occ = rng.uniform(spec.occlusion_min, spec.occlusion_max);

  Map label = rotate_nearest(*sample.label, deg);

  int ch = std::max(1, static_cast<int>(std::lround((1.0 - crop) * label.h)));
  int cw = std::max(1, static_cast<int>(std::lround((1.0 - crop) * label.w)));
  int off_y = label.h - ch > 0 ? rng.uniform_int(label.h - ch + 1) : 0;
  int off_x = label.w - cw > 0 ? rng.uniform_int(label.w - cw + 1) : 0;
  label = crop_resize(label, crop, off_y, off_x);

  int rh = static_cast<int>(std::lround(std::sqrt(occ) * label.h));
  int rw = static_cast<int>(std::lround(std::sqrt(occ) * label.w));
  if (rh > 0 && rw > 0) {
    int oy = label.h - rh > 0 ? rng.uniform_int(label.h - rh + 1) : 0;
    int ox = label.w - rw > 0 ? rng.uniform_int(label.w - rw + 1) : 0;
    occlude(label, oy, ox, rh, rw);
  }
  clamp_map(label);

  Sample out = sample;
  out.label = std::move(label);
  out.kind = LabelKind::contaminated;
  return out;
}

/// Coarse saliency map from the raster-scan minimum barrier distance
/// transform, min-max normalized. Fallback path when no external coarse maps
/// are supplied.
inline Map generate_coarse_label(const Image& image) {
  return normalize_minmax(mbd_transform(to_gray(image), 3));
}

/// Applies a horizontal flip and/or right-angle rotation to image, coarse map,
/// and label consistently.
inline Sample augment_with(const Sample& sample, bool flip, int quarter_turns) {
  Sample out = sample;
  if (flip) {
    out.image = hflip(out.image);
    if (out.coarse) out.coarse = hflip(*out.coarse);
    if (out.label) out.label = hflip(*out.label);
  }
  if (quarter_turns % 4 != 0) {
    out.image = rot90(out.image, quarter_turns);
    if (out.coarse) out.coarse = rot90(*out.coarse, quarter_turns);
    if (out.label) out.label = rot90(*out.label, quarter_turns);
  }
  return out;
}

/// Random horizontal flip + random right-angle rotation, deterministic per
/// seed.
inline Sample augment(const Sample& sample, std::uint64_t seed) {
  Rng rng(seed);
  bool flip = rng.uniform() < 0.5;
  int quarter_turns = rng.uniform_int(4);
  return augment_with(sample, flip, quarter_turns);
}

enum class NetworkKind { rnet, snet };

struct InputSizes {
  int rnet = 288;
  int snet = 320;
};

/// Resizes image (bilinear) and maps (bilinear, clamped) to a square side.
inline Sample resize_sample(const Sample& sample, int size) {
  Sample out = sample;
  out.image = resize_bilinear(sample.image, size, size);
  if (sample.coarse) {
    out.coarse = resize_bilinear(*sample.coarse, size, size);
    clamp_map(*out.coarse);
  }
  if (sample.label) {
    out.label = resize_bilinear(*sample.label, size, size);
    clamp_map(*out.label);
  }
  return out;
}

inline Sample resize_for(NetworkKind network, const Sample& sample, const InputSizes& sizes) {
  return resize_sample(sample, network == NetworkKind::rnet ? sizes.rnet : sizes.snet);
}

// ---------------------------------------------------------------------------
// Dataset directory layout:
//   <root>/images/<id>.png        RGB inputs
//   <root>/labels_real/<id>.png   pixel-accurate masks (8-bit grayscale)
//   <root>/labels_coarse/<id>.png unsupervised maps (8-bit grayscale)
//   <root>/manifest.json          ids, kinds, group assignments
// ---------------------------------------------------------------------------

struct DatasetEntry {
  std::string id;
  LabelKind kind = LabelKind::coarse;
  int group = 1;
};

struct DatasetManifest {
  std::uint64_t seed = 0;
  int num_groups = 0;
  int num_real = 0;
  std::vector<DatasetEntry> entries;

  json to_json() const {
    json ids = json::array();
    for (const auto& e : entries)
      ids.push_back({{"id", e.id}, {"kind", to_string(e.kind)}, {"group", e.group}});
    return json{{"version", 1},
                {"seed", seed},
                {"num_groups", num_groups},
                {"num_real", num_real},
                {"ids", std::move(ids)}};
  }

  static DatasetManifest from_json(const json& j) {
    DatasetManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.num_groups = j.at("num_groups").get<int>();
    m.num_real = j.at("num_real").get<int>();
    for (const auto& e : j.at("ids")) {
      DatasetEntry entry;
      entry.id = e.at("id").get<std::string>();
      entry.kind = label_kind_from_string(e.at("kind").get<std::string>());
      entry.group = e.at("group").get<int>();
      m.entries.push_back(std::move(entry));
    }
    return m;
  }

  void save(const fs::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write manifest " + path.string());
    out << to_json().dump(2) << "\n";
  }

  static DatasetManifest load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest " + path.string());
    json j;
    in >> j;
    return from_json(j);
  }
};

inline fs::path images_dir(const fs::path& root) { return root / "images"; }
inline fs::path labels_real_dir(const fs::path& root) { return root / "labels_real"; }
inline fs::path labels_coarse_dir(const fs::path& root) { return root / "labels_coarse"; }
inline fs::path dataset_manifest_path(const fs::path& root) { return root / "manifest.json"; }

inline std::vector<std::string> list_png_ids(const fs::path& dir) {
  std::vector<std::string> ids;
  if (!fs::is_directory(dir)) return ids;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".png")
      ids.push_back(entry.path().stem().string());
  std::sort(ids.begin(), ids.end());
  return ids;
}

/// Validates a dataset directory, designates the lexicographically first
/// `num_real` ids as real-labeled, generates any missing coarse maps, builds
/// the group partition, and writes the manifest. Deterministic per seed.
inline DatasetManifest prepare_dataset(const fs::path& root, int num_groups, int num_real,
                                       std::uint64_t seed, bool generate_missing_coarse = true) {
  auto ids = list_png_ids(images_dir(root));
  if (ids.empty()) throw DataError("no images found under " + images_dir(root).string());
  if (num_real < 1 || num_real >= static_cast<int>(ids.size()))
    throw ConfigError("num_real must be in [1, sample count)");

  std::vector<std::string> missing_real;
  for (int i = 0; i < num_real; ++i)
    if (!fs::exists(labels_real_dir(root) / (ids[i] + ".png"))) missing_real.push_back(ids[i]);
  if (!missing_real.empty()) {
    std::string msg = "missing real labels for:";
    for (const auto& id : missing_real) msg += " " + id;
    throw DataError(msg);
  }

  fs::create_directories(labels_coarse_dir(root));
  for (const auto& id : ids) {
    fs::path coarse_path = labels_coarse_dir(root) / (id + ".png");
    if (fs::exists(coarse_path)) continue;
    if (!generate_missing_coarse) throw DataError("missing coarse label for " + id);
    save_map_png(coarse_path, generate_coarse_label(load_image_png(images_dir(root) / (id + ".png"))));
  }

  std::vector<std::pair<std::string, LabelKind>> kinds;
  kinds.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i)
    kinds.emplace_back(ids[i], i < static_cast<std::size_t>(num_real) ? LabelKind::real
                                                                      : LabelKind::coarse);
  GroupPartition part = partition_ids(kinds, num_groups, num_real, seed);

  DatasetManifest manifest;
  manifest.seed = seed;
  manifest.num_groups = num_groups;
  manifest.num_real = num_real;
  std::map<std::string, int> group_of;
  for (int g = 0; g < static_cast<int>(part.groups.size()); ++g)
    for (const auto& id : part.groups[g]) group_of[id] = g + 1;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    DatasetEntry e;
    e.id = ids[i];
    e.kind = kinds[i].second;
    e.group = group_of.at(ids[i]);
    manifest.entries.push_back(std::move(e));
  }
  manifest.save(dataset_manifest_path(root));
  return manifest;
}

/// Validation directories carry a real label per image; coarse maps are
/// generated when missing (the refiner needs them as input).
inline std::vector<std::string> prepare_validation(const fs::path& root,
                                                   bool generate_missing_coarse = true) {
  auto ids = list_png_ids(images_dir(root));
  if (ids.empty()) throw ConfigError("validation set is empty: " + root.string());
  std::vector<std::string> missing;
  for (const auto& id : ids)
    if (!fs::exists(labels_real_dir(root) / (id + ".png"))) missing.push_back(id);
  if (!missing.empty()) {
    std::string msg = "validation set missing real labels for:";
    for (const auto& id : missing) msg += " " + id;
    throw DataError(msg);
  }
  fs::create_directories(labels_coarse_dir(root));
  for (const auto& id : ids) {
    fs::path coarse_path = labels_coarse_dir(root) / (id + ".png");
    if (fs::exists(coarse_path)) continue;
    if (!generate_missing_coarse) throw DataError("missing coarse label for " + id);
    save_map_png(coarse_path, generate_coarse_label(load_image_png(images_dir(root) / (id + ".png"))));
  }
  return ids;
}

/// Loads one sample; the real label is attached only for real-kind entries.
inline Sample load_sample(const fs::path& root, const DatasetEntry& entry) {
  Sample s;
  s.id = entry.id;
  s.kind = entry.kind;
  s.source_group = entry.group;
  s.image = load_image_png(images_dir(root) / (entry.id + ".png"));
  fs::path coarse_path = labels_coarse_dir(root) / (entry.id + ".png");
  if (fs::exists(coarse_path)) s.coarse = load_map_png(coarse_path);
  if (entry.kind == LabelKind::real) {
    s.label = load_map_png(labels_real_dir(root) / (entry.id + ".png"));
    if (s.label->h != s.image.h || s.label->w != s.image.w)
      throw DataError("label size mismatch for " + entry.id);
  }
  return s;
}

}  // namespace hysod

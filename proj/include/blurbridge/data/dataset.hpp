#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "blurbridge/blur/domain.hpp"
#include "blurbridge/blur/kernel_transfer.hpp"
#include "blurbridge/data/known_set.hpp"
#include "blurbridge/data/scenes.hpp"
#include "blurbridge/data/split.hpp"
#include "blurbridge/imaging/png_io.hpp"

namespace blurbridge::data {

namespace fs = std::filesystem;

/// Everything needed to regenerate the synthetic benchmark bit-for-bit.
struct SynthConfig {
  std::uint64_t seed = 1;
  int scenes = 60;            // scene groups shared between B and S
  double ratio = 0.6;         // share of scene groups assigned to B
  int frames_per_scene = 8;
  int test_scenes = 25;
  int test_frames_per_scene = 4;
  int canvas = 96;
  int frame = 64;
  int known_pairs = 32;       // size of the known-domain pair pool that K borrows kernels from
  TransferMode transfer = TransferMode::exact;
  KernelEstimateOptions estimate{15, 1e-6};
  BlurDomainSpec unknown = BlurDomainSpec::unknown_default();
  BlurDomainSpec known = BlurDomainSpec::known_default();

  void validate() const {
    if (scenes < 2) throw InvalidRangeError("synth.scenes must be >= 2");
    if (frames_per_scene < 1 || test_frames_per_scene < 1 || test_scenes < 0 || known_pairs < 1)
      throw InvalidRangeError("synth counts must be positive");
    if (frame < Image::min_side || canvas < frame) throw InvalidRangeError("synth needs 8 <= frame <= canvas");
    blurry_scene_count(scenes, ratio);
    unknown.validate();
    known.validate();
  }
};

inline void to_json(Json& j, const SynthConfig& c) {
  j = Json{{"seed", c.seed},
           {"scenes", c.scenes},
           {"ratio", c.ratio},
           {"frames_per_scene", c.frames_per_scene},
           {"test_scenes", c.test_scenes},
           {"test_frames_per_scene", c.test_frames_per_scene},
           {"canvas", c.canvas},
           {"frame", c.frame},
           {"known_pairs", c.known_pairs},
           {"transfer", to_string(c.transfer)},
           {"estimate_support", c.estimate.support},
           {"estimate_ridge", c.estimate.ridge},
           {"unknown", c.unknown},
           {"known", c.known}};
}

inline SynthConfig synth_config_from_json(const Json& j, const std::string& where) {
  reject_unknown_keys(j,
                      {"seed", "scenes", "ratio", "frames_per_scene", "test_scenes", "test_frames_per_scene", "canvas",
                       "frame", "known_pairs", "transfer", "estimate_support", "estimate_ridge", "unknown", "known"},
                      where);
  SynthConfig c;
  read_opt(j, "seed", c.seed, where);
  read_opt(j, "scenes", c.scenes, where);
  read_opt(j, "ratio", c.ratio, where);
  read_opt(j, "frames_per_scene", c.frames_per_scene, where);
  read_opt(j, "test_scenes", c.test_scenes, where);
  read_opt(j, "test_frames_per_scene", c.test_frames_per_scene, where);
  read_opt(j, "canvas", c.canvas, where);
  read_opt(j, "frame", c.frame, where);
  read_opt(j, "known_pairs", c.known_pairs, where);
  std::string mode = to_string(c.transfer);
  read_opt(j, "transfer", mode, where);
  c.transfer = parse_transfer_mode(mode);
  read_opt(j, "estimate_support", c.estimate.support, where);
  read_opt(j, "estimate_ridge", c.estimate.ridge, where);
  if (auto it = j.find("unknown"); it != j.end()) c.unknown = domain_from_json(*it, where + ".unknown", c.unknown);
  if (auto it = j.find("known"); it != j.end()) c.known = domain_from_json(*it, where + ".known", c.known);
  c.validate();
  return c;
}

struct NamedImage {
  std::string id;  // "<scene>_<frame>"
  Image image;
};

struct TestItem {
  std::string id;
  BlurPair pair;
};

struct KnownRecord {
  std::string image;  // id in known/
  KnownProvenance provenance;
};

/// In-memory form of the dataset tree.
struct Bundle {
  std::vector<NamedImage> blurry;  // B
  std::vector<NamedImage> sharp;   // S
  std::vector<NamedImage> known;   // K, same ids as S
  std::vector<KnownRecord> known_provenance;
  std::vector<TestItem> test;
  SceneSplit split;
  std::vector<std::string> test_scenes;
  SynthConfig config;
};

/// Records every file a loader touches, so tests can audit what an operation read.
struct AccessLog {
  std::vector<std::string> reads;  // paths relative to the dataset root
  bool touched(const std::string& prefix) const {
    return std::any_of(reads.begin(), reads.end(), [&](const std::string& r) { return r.rfind(prefix, 0) == 0; });
  }
};

// Seed streams, one tag per purpose.
enum : std::uint64_t {
  tag_scene = 0x5CE7E,
  tag_test_scene = 0x7E57,
  tag_split = 0x5B117,
  tag_blur = 0xB1B1,
  tag_known = 0x4B0E,
  tag_known_pairs = 0x4BA1,
  tag_test_blur = 0x7EB1,
};

inline std::string scene_id(char prefix, int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%c%04d", prefix, i);
  return buf;
}
inline std::string frame_id(const std::string& scene, int f) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_%02d", f);
  return scene + buf;
}
inline std::string scene_of(const std::string& frame) { return frame.substr(0, frame.rfind('_')); }

inline int scene_index(const std::string& id) { return std::stoi(id.substr(1)); }

/// The known-domain pair pool: separate scenes, blurred with kernels sampled from the known
/// domain, ground truth kept. Regenerated from the seed whenever K is (re)built.
inline std::vector<BlurPair> known_domain_pairs(const SynthConfig& c, std::vector<std::string>* ids = nullptr) {
  std::vector<BlurPair> pairs;
  const std::uint64_t base = Rng::derive(c.seed, tag_known_pairs);
  for (int i = 0; i < c.known_pairs; ++i) {
    const auto seed = Rng::derive(base, static_cast<std::uint64_t>(i));
    const Image sharp = quantize_8bit(render_scene(seed, c.frame));
    const BlurKernel k = sample_kernel(c.known, Rng::derive(seed, 1));
    pairs.push_back({quantize_8bit(apply_blur(sharp, k, c.known.noise_sigma, Rng::derive(seed, 2))), sharp, k});
    if (ids) ids->push_back(scene_id('k', i));
  }
  return pairs;
}

inline KnownSet build_known_for(const SynthConfig& c, const std::vector<NamedImage>& sharp) {
  std::vector<std::string> kernel_ids;
  const auto pairs = known_domain_pairs(c, &kernel_ids);
  std::vector<Image> s;
  for (const auto& n : sharp) s.push_back(n.image);
  KnownSet k = build_known_set(s, pairs, kernel_ids, c.transfer, c.known.noise_sigma,
                               Rng::derive(c.seed, tag_known), c.estimate);
  for (auto& img : k.images) img = quantize_8bit(img);
  return k;
}

/// Generates the whole benchmark in memory. Every image is quantised to 8 bits so the
/// in-memory bundle equals what a write/read round trip produces.
inline Bundle synthesize_bundle(const SynthConfig& c) {
  c.validate();
  Bundle b;
  b.config = c;
  std::vector<std::string> ids;
  for (int i = 0; i < c.scenes; ++i) ids.push_back(scene_id('s', i));
  b.split = split_scenes(ids, c.ratio, Rng::derive(c.seed, tag_split));
  const std::uint64_t scene_base = Rng::derive(c.seed, tag_scene);
  const std::uint64_t blur_base = Rng::derive(c.seed, tag_blur);
  for (const auto& sid : b.split.blurry) {
    const auto frames = scene_frames(Rng::derive(scene_base, scene_index(sid)), c.canvas, c.frame, c.frames_per_scene);
    for (int f = 0; f < c.frames_per_scene; ++f) {
      const auto id = frame_id(sid, f);
      const auto seed = Rng::derive(blur_base, static_cast<std::uint64_t>(scene_index(sid) * 1000 + f));
      const BlurKernel k = sample_kernel(c.unknown, seed);
      b.blurry.push_back({id, quantize_8bit(apply_blur(quantize_8bit(frames[f]), k, c.unknown.noise_sigma,
                                                       Rng::derive(seed, 1)))});
    }
  }
  for (const auto& sid : b.split.sharp) {
    const auto frames = scene_frames(Rng::derive(scene_base, scene_index(sid)), c.canvas, c.frame, c.frames_per_scene);
    for (int f = 0; f < c.frames_per_scene; ++f) b.sharp.push_back({frame_id(sid, f), quantize_8bit(frames[f])});
  }
  const KnownSet k = build_known_for(c, b.sharp);
  for (std::size_t i = 0; i < b.sharp.size(); ++i) {
    b.known.push_back({b.sharp[i].id, k.images[i]});
    b.known_provenance.push_back({b.sharp[i].id, k.provenance[i]});
  }
  const std::uint64_t test_base = Rng::derive(c.seed, tag_test_scene);
  const std::uint64_t test_blur = Rng::derive(c.seed, tag_test_blur);
  for (int i = 0; i < c.test_scenes; ++i) {
    const auto sid = scene_id('t', i);
    b.test_scenes.push_back(sid);
    const auto frames = scene_frames(Rng::derive(test_base, i), c.canvas, c.frame, c.test_frames_per_scene);
    for (int f = 0; f < c.test_frames_per_scene; ++f) {
      const auto seed = Rng::derive(test_blur, static_cast<std::uint64_t>(i * 1000 + f));
      const BlurKernel kern = sample_kernel(c.unknown, seed);
      const Image sharp = quantize_8bit(frames[f]);
      b.test.push_back({frame_id(sid, f),
                        {quantize_8bit(apply_blur(sharp, kern, c.unknown.noise_sigma, Rng::derive(seed, 1))), sharp, kern}});
    }
  }
  return b;
}

// ---------------------------------------------------------------------------------------
// Tree IO

inline void write_kernel_text(const fs::path& path, const BlurKernel& k) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << k.size() << '\n';
  char buf[32];
  for (int y = 0; y < k.size(); ++y) {
    for (int x = 0; x < k.size(); ++x) {
      std::snprintf(buf, sizeof buf, "%.17g", k(y, x));
      os << (x ? " " : "") << buf;
    }
    os << '\n';
  }
}

inline BlurKernel read_kernel_text(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read kernel " + path.string());
  int size = 0;
  if (!(is >> size) || size < 1 || size % 2 == 0) throw DataError(path.string() + ": bad kernel size");
  std::vector<double> w(static_cast<std::size_t>(size) * size);
  for (double& v : w)
    if (!(is >> v)) throw DataError(path.string() + ": truncated kernel");
  return BlurKernel(size, std::move(w));
}

inline Json manifest_json(const Bundle& b) {
  Json scenes = Json::array();
  for (const auto& s : b.split.blurry) scenes.push_back({{"id", s}, {"split", "B"}});
  for (const auto& s : b.split.sharp) scenes.push_back({{"id", s}, {"split", "S"}});
  for (const auto& s : b.test_scenes) scenes.push_back({{"id", s}, {"split", "test"}});
  Json known = Json::array();
  for (const auto& r : b.known_provenance)
    known.push_back({{"image", r.image}, {"source_pair", r.provenance.source_pair}, {"kernel_id", r.provenance.kernel_id}});
  const Json cfg = b.config;
  const std::uint64_t s = b.config.seed;
  return Json{{"format", "blurbridge-dataset"},
              {"version", 1},
              {"config", cfg},
              {"config_hash", config_hash(cfg)},
              {"seeds",
               {{"master", s},
                {"split", Rng::derive(s, tag_split)},
                {"scenes", Rng::derive(s, tag_scene)},
                {"blur", Rng::derive(s, tag_blur)},
                {"known", Rng::derive(s, tag_known)},
                {"known_pairs", Rng::derive(s, tag_known_pairs)},
                {"test_scenes", Rng::derive(s, tag_test_scene)},
                {"test_blur", Rng::derive(s, tag_test_blur)}}},
              {"counts",
               {{"B", b.blurry.size()}, {"S", b.sharp.size()}, {"K", b.known.size()}, {"test", b.test.size()}}},
              {"known_mode", to_string(b.config.transfer)},
              {"scenes", scenes},
              {"known", known}};
}

inline void write_json(const fs::path& path, const Json& j) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

inline Json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read " + path.string());
  try {
    return Json::parse(is);
  } catch (const Json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

/// Fails on a non-empty target unless `overwrite`, in which case the old tree is removed.
inline void prepare_output_dir(const fs::path& root, bool overwrite) {
  if (fs::exists(root) && !fs::is_directory(root)) throw DataError(root.string() + " exists and is not a directory");
  if (fs::exists(root) && !fs::is_empty(root)) {
    if (!overwrite) throw DataError(root.string() + " is not empty (pass --overwrite to replace it)");
    fs::remove_all(root);
  }
  fs::create_directories(root);
}

inline void write_image_dir(const fs::path& dir, const std::vector<NamedImage>& images) {
  fs::create_directories(dir);
  for (const auto& n : images) write_png(dir / (n.id + ".png"), n.image);
}

inline void write_bundle(const fs::path& root, const Bundle& b, bool overwrite) {
  prepare_output_dir(root, overwrite);
  write_image_dir(root / "blur", b.blurry);
  write_image_dir(root / "sharp", b.sharp);
  write_image_dir(root / "known", b.known);
  fs::create_directories(root / "test" / "blur");
  fs::create_directories(root / "test" / "sharp");
  fs::create_directories(root / "test" / "kernels");
  for (const auto& t : b.test) {
    write_png(root / "test" / "blur" / (t.id + ".png"), t.pair.blurry);
    write_png(root / "test" / "sharp" / (t.id + ".png"), t.pair.sharp);
    write_kernel_text(root / "test" / "kernels" / (t.id + ".txt"), *t.pair.kernel);
  }
  write_json(root / "manifest.json", manifest_json(b));
}

/// Sorted *.png ids of a directory.
inline std::vector<std::string> list_png_ids(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("missing directory " + dir.string());
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") ids.push_back(e.path().stem().string());
  std::sort(ids.begin(), ids.end());
  return ids;
}

inline std::vector<NamedImage> read_image_dir(const fs::path& root, const std::string& rel, AccessLog* log = nullptr) {
  std::vector<NamedImage> out;
  for (const auto& id : list_png_ids(root / rel)) {
    const std::string path = rel + "/" + id + ".png";
    if (log) log->reads.push_back(path);
    out.push_back({id, read_png(root / path)});
  }
  return out;
}

inline SynthConfig read_manifest_config(const fs::path& root, AccessLog* log = nullptr) {
  if (log) log->reads.push_back("manifest.json");
  const Json m = read_json(root / "manifest.json");
  if (m.value("format", "") != "blurbridge-dataset") throw DataError(root.string() + ": not a dataset manifest");
  try {
    return synth_config_from_json(m.at("config"), "manifest.config");
  } catch (const UsageError& e) {
    throw DataError(std::string("corrupt manifest: ") + e.what());
  }
}

/// B and K only; the training path never opens sharp/ or test/.
struct TrainingData {
  std::vector<NamedImage> blurry;
  std::vector<NamedImage> known;
};

inline TrainingData load_training_data(const fs::path& root, AccessLog* log = nullptr) {
  TrainingData d{read_image_dir(root, "blur", log), read_image_dir(root, "known", log)};
  if (d.blurry.empty()) throw EmptySetError(root.string() + "/blur holds no images");
  if (d.known.empty()) throw EmptySetError(root.string() + "/known holds no images");
  return d;
}

inline std::vector<TestItem> load_test_set(const fs::path& root, AccessLog* log = nullptr) {
  std::vector<TestItem> items;
  for (const auto& id : list_png_ids(root / "test" / "blur")) {
    TestItem t{id, {}};
    for (const char* rel : {"test/blur/", "test/sharp/"}) {
      const std::string path = std::string(rel) + id + ".png";
      if (log) log->reads.push_back(path);
      if (!fs::exists(root / path)) throw DataError("missing " + (root / path).string());
    }
    t.pair.blurry = read_png(root / "test" / "blur" / (id + ".png"));
    t.pair.sharp = read_png(root / "test" / "sharp" / (id + ".png"));
    require_same_shape(t.pair.blurry, t.pair.sharp, "test pair");
    const auto kpath = root / "test" / "kernels" / (id + ".txt");
    if (fs::exists(kpath)) {
      if (log) log->reads.push_back("test/kernels/" + id + ".txt");
      t.pair.kernel = read_kernel_text(kpath);
    }
    items.push_back(std::move(t));
  }
  if (items.empty()) throw EmptySetError((root / "test" / "blur").string() + " holds no test images");
  return items;
}

/// Rebuilds known/ from sharp/ and the regenerated known-domain pairs, and refreshes the
/// manifest's provenance. Reads only the manifest and sharp/.
inline KnownSet rebuild_known(const fs::path& root, TransferMode mode, AccessLog* log = nullptr) {
  SynthConfig c = read_manifest_config(root, log);
  c.transfer = mode;
  const auto sharp = read_image_dir(root, "sharp", log);
  if (sharp.empty()) throw EmptySetError(root.string() + "/sharp holds no images");
  KnownSet k = build_known_for(c, sharp);
  fs::remove_all(root / "known");
  fs::create_directories(root / "known");
  Json known = Json::array();
  for (std::size_t i = 0; i < sharp.size(); ++i) {
    write_png(root / "known" / (sharp[i].id + ".png"), k.images[i]);
    known.push_back({{"image", sharp[i].id},
                     {"source_pair", k.provenance[i].source_pair},
                     {"kernel_id", k.provenance[i].kernel_id}});
  }
  Json m = read_json(root / "manifest.json");
  m["known"] = known;
  m["known_mode"] = to_string(mode);
  m["config"]["transfer"] = to_string(mode);
  m["config_hash"] = config_hash(m["config"]);
  m["counts"]["K"] = sharp.size();
  write_json(root / "manifest.json", m);
  return k;
}

}  // namespace blurbridge::data

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "blurbridge/json_util.hpp"
#include "blurbridge/nn/parameter.hpp"

namespace blurbridge::nn {

/// Raised when an archive is unreadable, truncated, or does not match the model it is loaded into.
struct ArchiveError : DataError {
  using DataError::DataError;
};

struct ArchiveTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<double> data;
};

/// Versioned container: 8-byte magic, u32 version, u64 header length, JSON header, then every
/// tensor as little-endian float64 in header order. The header carries the architecture
/// manifest, a hash of the producing config, free-form metadata and the tensor table.
struct Archive {
  static constexpr char magic[9] = "BBARCHV1";
  static constexpr std::uint32_t version = 1;

  std::string kind;  // what the archive holds, e.g. "generator" or "checkpoint"
  Json architecture = Json::object();
  std::string config_hash;
  Json meta = Json::object();
  std::vector<ArchiveTensor> tensors;

  const ArchiveTensor* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }
  const ArchiveTensor& at(const std::string& name) const {
    if (const auto* t = find(name)) return *t;
    throw ArchiveError("archive has no tensor '" + name + "'");
  }
};

namespace detail {

inline std::size_t shape_size(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ArchiveError("negative tensor dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

template <typename U>
void write_pod(std::ostream& os, U v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename U>
U read_pod(std::istream& is, const std::string& what) {
  U v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw ArchiveError("truncated archive: " + what);
  return v;
}

}  // namespace detail

inline void write_archive(const std::filesystem::path& path, const Archive& a) {
  static_assert(std::endian::native == std::endian::little, "archives are little-endian");
  Json header{{"kind", a.kind}, {"architecture", a.architecture}, {"config_hash", a.config_hash},
              {"meta", a.meta}, {"tensors", Json::array()}};
  for (const auto& t : a.tensors) {
    if (detail::shape_size(t.shape) != t.data.size()) throw ArchiveError("tensor '" + t.name + "' size/shape mismatch");
    header["tensors"].push_back({{"name", t.name}, {"shape", t.shape}});
  }
  const std::string text = header.dump();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Write beside the target and rename so a crash never leaves a half-written archive.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write " + path.string());
    os.write(Archive::magic, 8);
    detail::write_pod(os, Archive::version);
    detail::write_pod(os, static_cast<std::uint64_t>(text.size()));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : a.tensors)
      os.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!os) throw DataError("write failed for " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Archive read_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArchiveError("cannot open archive " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, Archive::magic, 8) != 0)
    throw ArchiveError(path.string() + " is not a parameter archive");
  const auto version = detail::read_pod<std::uint32_t>(is, "version");
  if (version != Archive::version)
    throw ArchiveError(path.string() + ": unsupported archive version " + std::to_string(version));
  const auto len = detail::read_pod<std::uint64_t>(is, "header length");
  if (len > (1ULL << 30)) throw ArchiveError(path.string() + ": implausible header length");
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len))) throw ArchiveError("truncated archive header");
  Archive a;
  try {
    const Json h = Json::parse(text);
    a.kind = h.at("kind").get<std::string>();
    a.architecture = h.at("architecture");
    a.config_hash = h.at("config_hash").get<std::string>();
    a.meta = h.at("meta");
    for (const auto& t : h.at("tensors")) {
      a.tensors.push_back({t.at("name").get<std::string>(), t.at("shape").get<std::vector<int>>(), {}});
    }
  } catch (const Json::exception& e) {
    throw ArchiveError(path.string() + ": malformed archive header: " + e.what());
  }
  for (auto& t : a.tensors) {
    t.data.resize(detail::shape_size(t.shape));
    if (!is.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(double))))
      throw ArchiveError(path.string() + ": truncated data for tensor '" + t.name + "'");
  }
  if (is.peek() != std::char_traits<char>::eof()) throw ArchiveError(path.string() + ": trailing bytes");
  return a;
}

/// Appends parameter values under `prefix` + name.
template <typename T>
void store_params(Archive& a, const ParamRefs<T>& ps, const std::string& prefix = "") {
  for (const auto* p : ps) a.tensors.push_back({prefix + p->name, p->shape, {p->value.begin(), p->value.end()}});
}

/// Loads every parameter by name; a missing tensor or a shape difference is a manifest mismatch.
template <typename T>
void load_params(const Archive& a, const ParamRefs<T>& ps, const std::string& prefix = "") {
  for (auto* p : ps) {
    const auto* t = a.find(prefix + p->name);
    if (!t) throw ArchiveError("manifest mismatch: archive lacks '" + prefix + p->name + "'");
    if (t->shape != p->shape) throw ArchiveError("manifest mismatch: shape of '" + prefix + p->name + "' differs");
    for (std::size_t i = 0; i < p->size(); ++i) p->value[i] = static_cast<T>(t->data[i]);
  }
}

/// Checks kind and architecture before any tensor is touched.
inline void require_manifest(const Archive& a, const std::string& kind, const Json& architecture) {
  if (a.kind != kind) throw ArchiveError("archive holds '" + a.kind + "', expected '" + kind + "'");
  if (a.architecture != architecture) {
    throw ArchiveError("manifest mismatch for " + kind + ": archive " + a.architecture.dump() + " vs model " +
                       architecture.dump());
  }
}

}  // namespace blurbridge::nn

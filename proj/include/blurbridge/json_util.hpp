#pragma once

#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <string>

#include "json.hpp"
#include "blurbridge/error.hpp"

namespace blurbridge {

using Json = nlohmann::json;

/// Rejects keys outside `allowed`; `where` names the config section in the message.
inline void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed,
                                const std::string& where) {
  if (!j.is_object()) throw UsageError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw UsageError(where + ": unknown key '" + key + "'");
  }
}

/// Reads `key` into `out` when present, converting type errors into UsageError.
template <typename T>
void read_opt(const Json& j, const char* key, T& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<T>();
  } catch (const Json::exception& e) {
    throw UsageError(where + "." + key + ": " + e.what());
  }
}

/// FNV-1a over the canonical (key-sorted, compact) dump, as 16 hex digits.
inline std::string config_hash(const Json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace blurbridge

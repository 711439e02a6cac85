#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "blurbridge/error.hpp"
#include "blurbridge/rng.hpp"

namespace blurbridge::data {

struct SceneSplit {
  std::vector<std::string> blurry;  // scenes whose frames go to B
  std::vector<std::string> sharp;   // scenes whose frames go to S
};

/// Number of B scenes for `n` groups at `ratio`: nearest integer, kept inside [1, n-1].
inline int blurry_scene_count(int n, double ratio) {
  if (n < 2) throw EmptySetError("need at least 2 scene groups to split, got " + std::to_string(n));
  if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidRangeError("split ratio must lie in (0,1)");
  const int nb = static_cast<int>(std::lround(ratio * n));
  return std::clamp(nb, 1, n - 1);
}

/// Seeded shuffle of the scene groups, then the first share goes to B and the rest to S.
inline SceneSplit split_scenes(std::vector<std::string> scenes, double ratio, std::uint64_t seed) {
  const int nb = blurry_scene_count(static_cast<int>(scenes.size()), ratio);
  Rng rng(seed);
  for (std::size_t i = scenes.size(); i > 1; --i) std::swap(scenes[i - 1], scenes[rng.below(i)]);
  SceneSplit s;
  s.blurry.assign(scenes.begin(), scenes.begin() + nb);
  s.sharp.assign(scenes.begin() + nb, scenes.end());
  std::sort(s.blurry.begin(), s.blurry.end());
  std::sort(s.sharp.begin(), s.sharp.end());
  return s;
}

}  // namespace blurbridge::data

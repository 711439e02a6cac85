#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "blurbridge/json_util.hpp"
#include "blurbridge/rng.hpp"

namespace blurbridge::data {

struct PoolTooSmallError : DataError {
  using DataError::DataError;
};

/// Fraction of B eligible for sampling at iteration t: start_fraction until ramp_start, then a
/// linear ramp reaching 1 at ramp_end.
struct CurriculumSchedule {
  double start_fraction = 0.5;
  long ramp_start = 4000;
  long ramp_end = 10000;

  void validate() const {
    if (!(start_fraction > 0.0 && start_fraction <= 1.0)) throw InvalidRangeError("curriculum start_fraction must lie in (0,1]");
    if (ramp_start < 0 || ramp_end < ramp_start) throw InvalidRangeError("curriculum needs 0 <= ramp_start <= ramp_end");
  }

  double fraction(long t) const {
    if (t >= ramp_end) return 1.0;
    if (t < ramp_start) return start_fraction;
    return start_fraction + (1.0 - start_fraction) * static_cast<double>(t - ramp_start) /
                                static_cast<double>(ramp_end - ramp_start);
  }

  /// Ramp placed at 20% and 50% of the run.
  static CurriculumSchedule scaled_to(long total_iters) { return {0.5, total_iters / 5, total_iters / 2}; }

  friend bool operator==(const CurriculumSchedule&, const CurriculumSchedule&) = default;
};

inline void to_json(Json& j, const CurriculumSchedule& s) {
  j = Json{{"start_fraction", s.start_fraction}, {"ramp_start", s.ramp_start}, {"ramp_end", s.ramp_end}};
}

/// Sharpest-first pool restriction over B.
class CurriculumSampler {
 public:
  explicit CurriculumSampler(const std::vector<double>& sharpness) : order_(sharpness.size()) {
    if (sharpness.empty()) throw EmptySetError("curriculum over an empty set");
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    // descending sharpness; ties keep index order so the pool is reproducible
    std::stable_sort(order_.begin(), order_.end(),
                     [&](std::size_t a, std::size_t b) { return sharpness[a] > sharpness[b]; });
  }

  std::size_t size() const noexcept { return order_.size(); }
  const std::vector<std::size_t>& order() const noexcept { return order_; }

  std::size_t pool_size(double fraction) const {
    const double n = std::ceil(fraction * static_cast<double>(order_.size()) - 1e-9);
    return std::clamp<std::size_t>(static_cast<std::size_t>(n), 1, order_.size());
  }

  std::vector<std::size_t> pool(double fraction) const {
    return {order_.begin(), order_.begin() + static_cast<std::ptrdiff_t>(pool_size(fraction))};
  }

  /// `batch` distinct indices drawn uniformly from the pool at iteration t.
  std::vector<std::size_t> sample(const CurriculumSchedule& s, long t, std::size_t batch, std::uint64_t seed) const {
    const std::size_t n = pool_size(s.fraction(t));
    if (batch > n) {
      throw PoolTooSmallError("curriculum pool of " + std::to_string(n) + " images cannot fill a batch of " +
                              std::to_string(batch));
    }
    // partial Fisher-Yates over the pool
    std::vector<std::size_t> idx(order_.begin(), order_.begin() + static_cast<std::ptrdiff_t>(n));
    Rng rng(seed);
    for (std::size_t i = 0; i < batch; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
    idx.resize(batch);
    return idx;
  }

 private:
  std::vector<std::size_t> order_;
};

}  // namespace blurbridge::data

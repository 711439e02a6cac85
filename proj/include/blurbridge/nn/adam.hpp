#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "blurbridge/nn/parameter.hpp"

namespace blurbridge::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

/// Adam with bias correction. Moment buffers follow the order of the ParamRefs passed to
/// step(), which must stay the same for the optimiser's lifetime.
template <typename T>
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  void step(const ParamRefs<T>& params, double lr) {
    if (first_.empty()) {
      for (const auto* p : params) {
        first_.emplace_back(p->size(), T(0));
        second_.emplace_back(p->size(), T(0));
      }
    }
    if (first_.size() != params.size()) throw ShapeMismatchError("adam: parameter list changed");
    ++steps_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T step_size = static_cast<T>(lr / c1);
    const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(c2));
    const T eps = static_cast<T>(cfg_.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = *params[i];
      auto& m = first_[i];
      auto& v = second_[i];
      for (std::size_t j = 0; j < p.size(); ++j) {
        const T g = p.grad[j];
        m[j] = b1 * m[j] + (T(1) - b1) * g;
        v[j] = b2 * v[j] + (T(1) - b2) * g * g;
        p.value[j] -= step_size * m[j] / (std::sqrt(v[j]) * inv_sqrt_c2 + eps);
      }
    }
  }

  const AdamConfig& config() const noexcept { return cfg_; }
  std::uint64_t steps() const noexcept { return steps_; }
  std::vector<std::vector<T>>& first_moments() noexcept { return first_; }
  std::vector<std::vector<T>>& second_moments() noexcept { return second_; }
  const std::vector<std::vector<T>>& first_moments() const noexcept { return first_; }
  const std::vector<std::vector<T>>& second_moments() const noexcept { return second_; }
  void set_steps(std::uint64_t s) noexcept { steps_ = s; }

 private:
  AdamConfig cfg_;
  std::uint64_t steps_ = 0;
  std::vector<std::vector<T>> first_;
  std::vector<std::vector<T>> second_;
};

}  // namespace blurbridge::nn

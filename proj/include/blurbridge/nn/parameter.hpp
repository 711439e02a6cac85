#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "blurbridge/rng.hpp"

namespace blurbridge::nn {

/// Named trainable tensor with its gradient accumulator.
template <typename T>
struct Parameter {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;

  Parameter() = default;
  Parameter(std::string name_, std::vector<int> shape_) : name(std::move(name_)), shape(std::move(shape_)) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    value.assign(n, T(0));
    grad.assign(n, T(0));
  }

  std::size_t size() const noexcept { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

template <typename T>
using ParamRefs = std::vector<Parameter<T>*>;

template <typename T>
std::size_t parameter_count(const ParamRefs<T>& ps) {
  std::size_t n = 0;
  for (const auto* p : ps) n += p->size();
  return n;
}

template <typename T>
void zero_grads(const ParamRefs<T>& ps) {
  for (auto* p : ps) p->zero_grad();
}

/// He-normal init for a weight with `fan_in` inputs per output.
template <typename T>
void init_he_normal(Parameter<T>& p, int fan_in, Rng& rng, double gain = std::sqrt(2.0)) {
  const double stddev = gain / std::sqrt(static_cast<double>(fan_in));
  for (T& v : p.value) v = static_cast<T>(stddev * rng.normal());
}

/// Copies parameter values between models of possibly different scalar types.
template <typename Dst, typename Src>
void copy_values(const ParamRefs<Dst>& dst, const ParamRefs<Src>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i)
    for (std::size_t j = 0; j < dst[i]->size(); ++j)
      dst[i]->value[j] = static_cast<Dst>(src[i]->value[j]);
}

}  // namespace blurbridge::nn

#pragma once

#include <string>
#include <vector>

#include "blurbridge/json_util.hpp"
#include "blurbridge/nn/conv.hpp"
#include "blurbridge/nn/ops.hpp"

namespace blurbridge::nn {

struct ConvSpec {
  int in = 3;
  int out = 16;
  int kernel = 3;
  int stride = 1;

  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

inline void to_json(Json& j, const ConvSpec& s) { j = Json::array({s.in, s.out, s.kernel, s.stride}); }
inline void from_json(const Json& j, ConvSpec& s) {
  if (!j.is_array() || j.size() != 4) throw UsageError("conv spec must be [in, out, kernel, stride]");
  s = {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

enum class Activation { leaky_relu, relu };

/// Plain feed-forward chain of convolutions. The activation follows every layer except,
/// when `linear_head` is set, the last one.
template <typename T>
class ConvStack {
 public:
  struct Cache {
    std::vector<Tensor<T>> inputs;  // input of layer l
    std::vector<Tensor<T>> pre;     // pre-activation output of layer l
    Tensor<T> output;
  };

  ConvStack() = default;
  ConvStack(const std::string& prefix, std::vector<ConvSpec> specs, Activation act,
            bool linear_head)
      : specs_(std::move(specs)), act_(act), linear_head_(linear_head) {
    for (std::size_t l = 0; l < specs_.size(); ++l) {
      const auto& s = specs_[l];
      layers_.emplace_back(prefix + std::to_string(l), s.in, s.out, s.kernel, s.stride);
    }
  }

  const std::vector<ConvSpec>& specs() const noexcept { return specs_; }
  std::size_t depth() const noexcept { return layers_.size(); }
  Conv2d<T>& layer(std::size_t l) { return layers_[l]; }
  const Conv2d<T>& layer(std::size_t l) const { return layers_[l]; }
  bool activated(std::size_t l) const noexcept { return !(linear_head_ && l + 1 == layers_.size()); }

  void init(Rng& rng) {
    const double gain = act_ == Activation::leaky_relu
                            ? std::sqrt(2.0 / (1.0 + leaky_slope * leaky_slope))
                            : std::sqrt(2.0);
    for (std::size_t l = 0; l < layers_.size(); ++l) layers_[l].init(rng, activated(l) ? gain : 1.0);
  }

  void collect(ParamRefs<T>& out) {
    for (auto& l : layers_) l.collect(out);
  }

  Tensor<T> activate(const Tensor<T>& z) const {
    return act_ == Activation::leaky_relu ? leaky_relu(z) : relu(z);
  }
  Tensor<T> activate_backward(const Tensor<T>& z, Tensor<T> g) const {
    return act_ == Activation::leaky_relu ? leaky_relu_backward(z, std::move(g))
                                          : relu_backward(z, std::move(g));
  }

  Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr) const {
    if (cache) {
      cache->inputs.clear();
      cache->pre.clear();
    }
    Tensor<T> a = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Tensor<T> z = layers_[l].forward(a);
      if (cache) {
        cache->inputs.push_back(std::move(a));
        cache->pre.push_back(z);
      }
      a = activated(l) ? activate(z) : std::move(z);
    }
    if (cache) cache->output = a;
    return a;
  }

  /// Backpropagates `g_out` (gradient w.r.t. the stack output). Parameter gradients are
  /// accumulated when `accumulate_params`; returns the gradient w.r.t. the stack input when
  /// `want_input_grad`.
  Tensor<T> backward(const Cache& cache, Tensor<T> g_out, bool accumulate_params,
                     bool want_input_grad) {
    Tensor<T> g = std::move(g_out);
    for (std::size_t l = layers_.size(); l-- > 0;) {
      if (activated(l)) g = activate_backward(cache.pre[l], std::move(g));
      const bool need_input = l > 0 || want_input_grad;
      g = layers_[l].backward(cache.inputs[l], g, need_input, accumulate_params);
    }
    return g;
  }

  /// Backward from gradients on every layer's post-activation output (feature pyramids).
  Tensor<T> backward_all(const Cache& cache, std::vector<Tensor<T>> g_outs, bool accumulate_params) {
    Tensor<T> g;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      if (g.size() == 0) g = std::move(g_outs[l]);
      else if (g_outs[l].size() != 0) g += g_outs[l];
      if (activated(l)) g = activate_backward(cache.pre[l], std::move(g));
      g = layers_[l].backward(cache.inputs[l], g, true, accumulate_params);
    }
    return g;
  }

 private:
  std::vector<ConvSpec> specs_;
  Activation act_ = Activation::leaky_relu;
  bool linear_head_ = true;
  std::vector<Conv2d<T>> layers_;
};

}  // namespace blurbridge::nn

#pragma once

#include <cmath>
#include <vector>

#include "blurbridge/nn/conv_stack.hpp"

namespace blurbridge::models {

using nn::ConvSpec;
using nn::Tensor;

struct DiscriminatorConfig {
  std::vector<int> channels{16, 32, 64};  // body layer widths
  std::vector<int> strides{2, 2, 2};      // one per body layer
  double logit_clamp = 15.0;
  int min_input = 16;
  double highpass_gain = 10.0;  // fixed input stage gain * (x - box(x)); 0 feeds raw pixels
  int highpass_radius = 2;      // box half-width of that stage

  friend bool operator==(const DiscriminatorConfig&, const DiscriminatorConfig&) = default;
};

inline void to_json(Json& j, const DiscriminatorConfig& c) {
  j = Json{{"channels", c.channels},       {"strides", c.strides},
           {"logit_clamp", c.logit_clamp}, {"min_input", c.min_input},
           {"highpass_gain", c.highpass_gain}, {"highpass_radius", c.highpass_radius}};
}
inline DiscriminatorConfig discriminator_config_from_json(const Json& j, const std::string& where) {
  reject_unknown_keys(j, {"channels", "strides", "logit_clamp", "min_input", "highpass_gain", "highpass_radius"},
                      where);
  DiscriminatorConfig c;
  read_opt(j, "channels", c.channels, where);
  read_opt(j, "strides", c.strides, where);
  if (c.strides.size() != c.channels.size()) throw InvalidRangeError(where + ": one stride per channel entry");
  read_opt(j, "logit_clamp", c.logit_clamp, where);
  read_opt(j, "min_input", c.min_input, where);
  read_opt(j, "highpass_gain", c.highpass_gain, where);
  read_opt(j, "highpass_radius", c.highpass_radius, where);
  if (!(c.highpass_gain >= 0) || c.highpass_radius < 1) throw InvalidRangeError(where + ": invalid high-pass stage");
  if (c.channels.empty() || !(c.logit_clamp > 0) || c.min_input < 1)
    throw InvalidRangeError(where + ": invalid discriminator shape");
  return c;
}

/// Strided patch discriminator: a fixed high-pass input stage, leaky-ReLU convolutions, then
/// a stride-1 conv to a single logit per patch. Scores are the logistic of the clamped logits.
/// The high-pass stage strips flat colour so the convolutions see edge profiles, which is
/// where two blur types differ; without it the blur cue is buried under scene content.
template <typename T>
class Discriminator {
 public:
  using Cache = typename nn::ConvStack<T>::Cache;

  Discriminator() : Discriminator(DiscriminatorConfig{}) {}
  explicit Discriminator(const DiscriminatorConfig& cfg) : cfg_(cfg), net_("disc.", specs(cfg), nn::Activation::leaky_relu, true) {}

  static std::vector<ConvSpec> specs(const DiscriminatorConfig& cfg) {
    std::vector<ConvSpec> s;
    int in = 3;
    if (cfg.strides.size() != cfg.channels.size()) throw InvalidRangeError("discriminator: one stride per layer");
    for (std::size_t l = 0; l < cfg.channels.size(); ++l) {
      s.push_back({in, cfg.channels[l], 3, cfg.strides[l]});
      in = cfg.channels[l];
    }
    s.push_back({in, 1, 3, 1});
    return s;
  }

  const DiscriminatorConfig& config() const noexcept { return cfg_; }
  Json architecture() const { return cfg_; }
  nn::ConvStack<T>& net() noexcept { return net_; }

  void init(Rng& rng) { net_.init(rng); }
  /// Zeroes the patch head so every score is exactly 0.5.
  void zero_head() { net_.layer(net_.depth() - 1).zero_init(); }

  nn::ParamRefs<T> params() {
    nn::ParamRefs<T> p;
    net_.collect(p);
    return p;
  }

  void check_input(const Tensor<T>& x) const {
    if (x.h < cfg_.min_input || x.w < cfg_.min_input) {
      throw TooSmallError("discriminator input " + std::to_string(x.h) + "x" + std::to_string(x.w) +
                          " is below the receptive field minimum " + std::to_string(cfg_.min_input));
    }
  }

  Tensor<T> logits(const Tensor<T>& x, Cache* cache = nullptr) const {
    check_input(x);
    return net_.forward(prefilter(x), cache);
  }

  /// Per-patch scores in (0,1).
  Tensor<T> scores(const Tensor<T>& x, Cache* cache = nullptr) const {
    Tensor<T> z = logits(x, cache);
    for (T& v : z.data) v = nn::clamped_sigmoid(v, limit());
    return z;
  }

  /// Derivative of the score w.r.t. the logit, zero where the clamp is active.
  T score_slope(T logit) const {
    if (std::abs(logit) >= limit()) return T(0);
    const T s = nn::clamped_sigmoid(logit, limit());
    return s * (T(1) - s);
  }

  /// Backpropagates a gradient w.r.t. the scores.
  Tensor<T> backward_scores(const Cache& cache, const Tensor<T>& g_scores, bool accumulate_params,
                            bool want_input_grad) {
    Tensor<T> g = g_scores;
    const Tensor<T>& z = cache.output;
    for (std::size_t i = 0; i < g.size(); ++i) g.data[i] *= score_slope(z.data[i]);
    Tensor<T> gu = net_.backward(cache, std::move(g), accumulate_params, want_input_grad);
    return want_input_grad ? prefilter_adjoint(gu) : gu;
  }

  /// Gradient of each sample's mean patch score w.r.t. its input pixels.
  Tensor<T> input_gradient(const Tensor<T>& x, Cache* cache_out = nullptr) {
    Cache cache;
    logits(x, &cache);
    const Tensor<T>& z = cache.output;
    Tensor<T> g = z.zeros_like();
    const T inv_patches = T(1) / static_cast<T>(z.plane());
    for (std::size_t i = 0; i < g.size(); ++i) g.data[i] = score_slope(z.data[i]) * inv_patches;
    Tensor<T> gx = prefilter_adjoint(net_.backward(cache, std::move(g), false, true));
    if (cache_out) *cache_out = std::move(cache);
    return gx;
  }

  struct PenaltyResult {
    T value = T(0);               // batch mean of (||grad||-1)^2
    std::vector<T> grad_norms;    // per sample
  };

  /// Gradient penalty on interpolates `x_hat`. When `param_weight` is nonzero, adds
  /// param_weight * d(penalty)/d(theta) to the parameter gradients. That mixed second
  /// derivative is computed exactly by pushing a tangent through the forward pass and
  /// differentiating the resulting directional derivative in reverse mode.
  PenaltyResult gradient_penalty(const Tensor<T>& x_hat, T param_weight) {
    Cache cache;
    const Tensor<T> g = input_gradient(x_hat, &cache);
    const int batch = x_hat.n;
    PenaltyResult res;
    res.grad_norms.resize(batch);
    std::vector<T> weights(batch, T(0));
    for (int b = 0; b < batch; ++b) {
      double s = 0.0;
      for (T v : g.sample(b)) s += static_cast<double>(v) * v;
      const T norm = static_cast<T>(std::sqrt(s));
      res.grad_norms[b] = norm;
      res.value += (norm - T(1)) * (norm - T(1));
      if (norm > T(0)) weights[b] = T(2) * (norm - T(1)) / (norm * static_cast<T>(batch));
    }
    res.value /= static_cast<T>(batch);
    if (param_weight == T(0)) return res;

    // Tangent direction in the convolution input space: v_b = param_weight * w_b * P g_b,
    // where P is the high-pass stage and g = P^T (gradient at the convolution input).
    Tensor<T> dir = prefilter(g);
    for (int b = 0; b < batch; ++b)
      for (T& v : dir.sample(b)) v *= param_weight * weights[b];

    const std::size_t depth = net_.depth();
    std::vector<Tensor<T>> tangent_in(depth);  // tangent of each layer's input
    Tensor<T> t = std::move(dir);
    for (std::size_t l = 0; l < depth; ++l) {
      Tensor<T> zt = net_.layer(l).forward(t, /*with_bias=*/false);
      tangent_in[l] = std::move(t);
      if (net_.activated(l)) {
        const Tensor<T>& z = cache.pre[l];
        for (std::size_t i = 0; i < zt.size(); ++i)
          if (!(z.data[i] > T(0))) zt.data[i] *= static_cast<T>(nn::leaky_slope);
      }
      t = std::move(zt);
    }

    // Reverse sweep of s_dot = sum sigma'(z_L)/P * z_dot_L.
    const Tensor<T>& zl = cache.output;
    const T inv_patches = T(1) / static_cast<T>(zl.plane());
    Tensor<T> q = zl.zeros_like();  // adjoint of primal pre-activations
    Tensor<T> p = zl.zeros_like();  // adjoint of tangent pre-activations
    for (std::size_t i = 0; i < zl.size(); ++i) {
      if (std::abs(zl.data[i]) >= limit()) continue;
      const T s = nn::clamped_sigmoid(zl.data[i], limit());
      const T d1 = s * (T(1) - s);
      p.data[i] = d1 * inv_patches;
      q.data[i] = d1 * (T(1) - T(2) * s) * inv_patches * t.data[i];
    }
    for (std::size_t l = depth; l-- > 0;) {
      const bool need_input = l > 0;
      Tensor<T> q_in = net_.layer(l).backward(cache.inputs[l], q, need_input, true, true);
      Tensor<T> p_in = net_.layer(l).backward(tangent_in[l], p, need_input, true, false);
      if (!need_input) break;
      const Tensor<T>& z_prev = cache.pre[l - 1];
      q = nn::leaky_relu_backward(z_prev, std::move(q_in));
      p = nn::leaky_relu_backward(z_prev, std::move(p_in));
    }
    return res;
  }

 private:
  T limit() const noexcept { return static_cast<T>(cfg_.logit_clamp); }
  Tensor<T> prefilter(const Tensor<T>& x) const {
    if (cfg_.highpass_gain == 0.0) return x;
    return nn::highpass(x, static_cast<T>(cfg_.highpass_gain), cfg_.highpass_radius);
  }
  Tensor<T> prefilter_adjoint(const Tensor<T>& g) const {
    if (cfg_.highpass_gain == 0.0 || g.size() == 0) return g;
    return nn::highpass_adjoint(g, static_cast<T>(cfg_.highpass_gain), cfg_.highpass_radius);
  }

  DiscriminatorConfig cfg_;
  nn::ConvStack<T> net_;
};

}  // namespace blurbridge::models

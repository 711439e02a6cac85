#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "blurbridge/imaging/pyramid.hpp"
#include "blurbridge/json_util.hpp"
#include "blurbridge/nn/conv.hpp"
#include "blurbridge/nn/ops.hpp"

namespace blurbridge::models {

using nn::Conv2d;
using nn::Tensor;

struct GeneratorConfig {
  std::vector<int> channels{8, 16, 32};  // feature width per pyramid level, fine to coarse
  int coarse_blocks = 2;                 // body convs at the coarsest level (others use 1)
  double residual_scale = 0.5;           // output = clamp(input + scale * tanh(residual))

  int levels() const noexcept { return static_cast<int>(channels.size()); }
  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

inline void to_json(Json& j, const GeneratorConfig& c) {
  j = Json{{"channels", c.channels}, {"coarse_blocks", c.coarse_blocks}, {"residual_scale", c.residual_scale}};
}
inline GeneratorConfig generator_config_from_json(const Json& j, const std::string& where) {
  reject_unknown_keys(j, {"channels", "coarse_blocks", "residual_scale"}, where);
  GeneratorConfig c;
  read_opt(j, "channels", c.channels, where);
  read_opt(j, "coarse_blocks", c.coarse_blocks, where);
  read_opt(j, "residual_scale", c.residual_scale, where);
  if (c.channels.empty() || c.coarse_blocks < 0 || !(c.residual_scale > 0))
    throw InvalidRangeError(where + ": invalid generator shape");
  for (int ch : c.channels)
    if (ch < 1) throw InvalidRangeError(where + ": channel widths must be positive");
  return c;
}

/// Multi-scale translation network over an image pyramid.
///
/// A shared encoder walks the pyramid from fine to coarse: each level merges a stride-2
/// projection of the finer features with a projection of that level's input image. A
/// decoder walks back up with nearest upsampling and skip additions, and every level emits
/// a bounded residual on its own input. With the residual heads zeroed the network is the
/// identity on every level.
template <typename T>
class Generator {
 public:
  /// Pyramid as a list of N x 3 x h x w batches, finest first.
  using Pyramid = std::vector<Tensor<T>>;

  struct Cache {
    Pyramid inputs;
    std::vector<Tensor<T>> merge_pre;                 // encoder merge pre-activation
    std::vector<std::vector<Tensor<T>>> body_in;      // input of each body conv
    std::vector<std::vector<Tensor<T>>> body_pre;     // pre-activation of each body conv
    std::vector<Tensor<T>> enc;                       // encoder output per level
    std::vector<Tensor<T>> up;                        // upsampled coarse features (levels < M-1)
    std::vector<Tensor<T>> up_pre;                    // skip-sum pre-activation
    std::vector<Tensor<T>> skip_act;                  // activated skip sum
    std::vector<Tensor<T>> dec_pre;                   // decoder conv pre-activation
    std::vector<Tensor<T>> dec;                       // decoder output per level
    std::vector<Tensor<T>> tanh_out;                  // tanh(residual)
    std::vector<Tensor<T>> unclamped;                 // input + scale * tanh
    Pyramid outputs;
  };

  Generator() : Generator(GeneratorConfig{}) {}
  explicit Generator(const GeneratorConfig& cfg) : cfg_(cfg) {
    const int m = cfg.levels();
    if (m < 1) throw InvalidRangeError("generator needs at least one level");
    for (int i = 0; i < m; ++i) {
      const int c = cfg.channels[i];
      const std::string lv = "gen.l" + std::to_string(i);
      enc_in_.emplace_back(lv + ".in", 3, c, 3, 1);
      if (i > 0) enc_down_.emplace_back(lv + ".down", cfg.channels[i - 1], c, 3, 2);
      const int blocks = (i == m - 1) ? cfg.coarse_blocks : 1;
      std::vector<Conv2d<T>> body;
      for (int b = 0; b < blocks; ++b) body.emplace_back(lv + ".body" + std::to_string(b), c, c, 3, 1);
      body_.push_back(std::move(body));
      if (i < m - 1) {
        up_conv_.emplace_back(lv + ".up", cfg.channels[i + 1], c, 3, 1);
        dec_conv_.emplace_back(lv + ".dec", c, c, 3, 1);
      }
      head_.emplace_back(lv + ".head", c, 3, 3, 1);
    }
  }

  const GeneratorConfig& config() const noexcept { return cfg_; }
  Json architecture() const { return cfg_; }
  int levels() const noexcept { return cfg_.levels(); }

  void init(Rng& rng) {
    const double gain = std::sqrt(2.0 / (1.0 + nn::leaky_slope * nn::leaky_slope));
    for (auto& c : enc_in_) c.init(rng, gain);
    for (auto& c : enc_down_) c.init(rng, gain);
    for (auto& level : body_)
      for (auto& c : level) c.init(rng, gain);
    for (auto& c : up_conv_) c.init(rng, gain);
    for (auto& c : dec_conv_) c.init(rng, gain);
    for (auto& c : head_) c.zero_init();
  }

  nn::ParamRefs<T> params() {
    nn::ParamRefs<T> p;
    for (int i = 0; i < levels(); ++i) {
      enc_in_[i].collect(p);
      if (i > 0) enc_down_[i - 1].collect(p);
      for (auto& c : body_[i]) c.collect(p);
      if (i < levels() - 1) {
        up_conv_[i].collect(p);
        dec_conv_[i].collect(p);
      }
      head_[i].collect(p);
    }
    return p;
  }

  void check_input(const Pyramid& in) const {
    if (static_cast<int>(in.size()) != levels()) {
      throw ShapeMismatchError("generator expects " + std::to_string(levels()) +
                               " pyramid levels, got " + std::to_string(in.size()));
    }
    for (std::size_t i = 1; i < in.size(); ++i) {
      if (in[i].n != in[0].n || in[i].h * 2 != in[i - 1].h || in[i].w * 2 != in[i - 1].w) {
        throw ShapeMismatchError("generator pyramid levels must halve exactly (level " +
                                 std::to_string(i + 1) + ")");
      }
    }
  }

  Pyramid forward(const Pyramid& in, Cache* cache = nullptr) const {
    check_input(in);
    const int m = levels();
    Cache local;
    Cache& c = cache ? *cache : local;
    c = Cache{};
    c.inputs = in;
    c.body_in.resize(m);
    c.body_pre.resize(m);
    for (int i = 0; i < m; ++i) {
      Tensor<T> z = enc_in_[i].forward(in[i]);
      if (i > 0) z += enc_down_[i - 1].forward(c.enc[i - 1]);
      Tensor<T> h = nn::leaky_relu(z);
      c.merge_pre.push_back(std::move(z));
      for (const auto& conv : body_[i]) {
        Tensor<T> zb = conv.forward(h);
        c.body_in[i].push_back(std::move(h));
        h = nn::leaky_relu(zb);
        c.body_pre[i].push_back(std::move(zb));
      }
      c.enc.push_back(std::move(h));
    }
    c.up.resize(m);
    c.up_pre.resize(m);
    c.skip_act.resize(m);
    c.dec_pre.resize(m);
    c.dec.resize(m);
    c.dec[m - 1] = c.enc[m - 1];
    for (int i = m - 2; i >= 0; --i) {
      c.up[i] = nn::upsample2x(c.dec[i + 1]);
      Tensor<T> z = up_conv_[i].forward(c.up[i]);
      z += c.enc[i];
      c.skip_act[i] = nn::leaky_relu(z);
      c.up_pre[i] = std::move(z);
      c.dec_pre[i] = dec_conv_[i].forward(c.skip_act[i]);
      c.dec[i] = nn::leaky_relu(c.dec_pre[i]);
    }
    const T scale = static_cast<T>(cfg_.residual_scale);
    for (int i = 0; i < m; ++i) {
      Tensor<T> r = head_[i].forward(c.dec[i]);
      for (T& v : r.data) v = std::tanh(v);
      Tensor<T> u = in[i];
      for (std::size_t j = 0; j < u.size(); ++j) u.data[j] += scale * r.data[j];
      Tensor<T> o = u;
      for (T& v : o.data) v = std::clamp(v, T(0), T(1));
      c.tanh_out.push_back(std::move(r));
      c.unclamped.push_back(std::move(u));
      c.outputs.push_back(std::move(o));
    }
    return c.outputs;
  }

  /// Accumulates parameter gradients from per-level output gradients (empty tensors allowed).
  void backward(const Cache& c, const std::vector<Tensor<T>>& g_out) {
    const int m = levels();
    if (static_cast<int>(g_out.size()) != m) throw ShapeMismatchError("generator backward: level count");
    const T scale = static_cast<T>(cfg_.residual_scale);
    std::vector<Tensor<T>> g_dec(m), g_enc(m);
    for (int i = 0; i < m; ++i) {
      g_enc[i] = c.enc[i].zeros_like();
      if (g_out[i].size() == 0) {
        g_dec[i] = c.dec[i].zeros_like();
        continue;
      }
      Tensor<T> g = g_out[i];
      for (std::size_t j = 0; j < g.size(); ++j) {
        const T u = c.unclamped[i].data[j];
        const T t = c.tanh_out[i].data[j];
        g.data[j] = (u >= T(0) && u <= T(1)) ? g.data[j] * scale * (T(1) - t * t) : T(0);
      }
      g_dec[i] = head_[i].backward(c.dec[i], g);
    }
    for (int i = 0; i < m - 1; ++i) {
      Tensor<T> g = nn::leaky_relu_backward(c.dec_pre[i], std::move(g_dec[i]));
      g = dec_conv_[i].backward(c.skip_act[i], g);
      g = nn::leaky_relu_backward(c.up_pre[i], std::move(g));
      g_enc[i] += g;
      Tensor<T> g_up = up_conv_[i].backward(c.up[i], g);
      g_dec[i + 1] += nn::upsample2x_backward(g_up);
    }
    g_enc[m - 1] += g_dec[m - 1];
    for (int i = m - 1; i >= 0; --i) {
      Tensor<T> g = std::move(g_enc[i]);
      for (std::size_t b = body_[i].size(); b-- > 0;) {
        g = nn::leaky_relu_backward(c.body_pre[i][b], std::move(g));
        g = body_[i][b].backward(c.body_in[i][b], g);
      }
      g = nn::leaky_relu_backward(c.merge_pre[i], std::move(g));
      enc_in_[i].backward(c.inputs[i], g, false);
      if (i > 0) g_enc[i - 1] += enc_down_[i - 1].backward(c.enc[i - 1], g);
    }
  }

 private:
  GeneratorConfig cfg_;
  std::vector<Conv2d<T>> enc_in_, enc_down_, up_conv_, dec_conv_, head_;
  std::vector<std::vector<Conv2d<T>>> body_;
};

/// Converts image pyramids of a batch into per-level tensors.
template <typename T>
std::vector<Tensor<T>> pyramid_batch(const std::vector<ImagePyramid>& pyrs) {
  if (pyrs.empty()) throw EmptySetError("pyramid_batch: empty batch");
  std::vector<Tensor<T>> out;
  for (int l = 0; l < pyrs.front().size(); ++l) {
    std::vector<Image> level;
    for (const auto& p : pyrs) level.push_back(p[l]);
    out.push_back(nn::to_tensor<T>(std::span<const Image>(level)));
  }
  return out;
}

}  // namespace blurbridge::models

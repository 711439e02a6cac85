#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blurbridge/nn/archive.hpp"
#include "blurbridge/nn/conv_stack.hpp"

namespace blurbridge::models {

struct FeatureExtractorConfig {
  std::vector<nn::ConvSpec> layers{{3, 16, 3, 1}, {16, 16, 3, 2}, {16, 32, 3, 2}};
  std::uint64_t seed = 0x5EEDF00DULL;  // random backend only

  friend bool operator==(const FeatureExtractorConfig&, const FeatureExtractorConfig&) = default;
};

/// Frozen convolutional feature extractor. Every ReLU layer output is one feature map.
/// The default backend is a seeded random stack; pretrained weights can replace it through
/// a parameter archive whose manifest matches `layers`.
template <typename T>
class FeatureExtractor {
 public:
  using Cache = typename nn::ConvStack<T>::Cache;
  using Features = std::vector<nn::Tensor<T>>;

  FeatureExtractor() : FeatureExtractor(FeatureExtractorConfig{}) {}
  explicit FeatureExtractor(const FeatureExtractorConfig& cfg)
      : cfg_(cfg), net_("phi.", cfg.layers, nn::Activation::relu, false) {
    for (std::size_t l = 1; l < cfg.layers.size(); ++l) {
      if (cfg.layers[l].in != cfg.layers[l - 1].out) {
        throw UsageError("feature extractor layer " + std::to_string(l) + " input width mismatch");
      }
    }
    Rng rng(cfg.seed);
    net_.init(rng);
  }

  /// Pretrained backend: the archive must hold a "feature-extractor" whose layer manifest
  /// matches `cfg.layers`; anything else is an ArchiveError.
  static FeatureExtractor from_archive(const nn::Archive& a, const FeatureExtractorConfig& cfg) {
    FeatureExtractor phi(cfg);
    nn::require_manifest(a, "feature-extractor", phi.architecture());
    nn::load_params(a, phi.params());
    return phi;
  }

  Json architecture() const { return Json{{"layers", cfg_.layers}}; }
  const FeatureExtractorConfig& config() const noexcept { return cfg_; }
  std::size_t map_count() const noexcept { return net_.depth(); }

  /// Expected (channels, height, width) of every map for an h x w input.
  std::vector<std::array<int, 3>> manifest(int h, int w) const {
    std::vector<std::array<int, 3>> m;
    for (std::size_t l = 0; l < net_.depth(); ++l) {
      h = net_.layer(l).out_size(h);
      w = net_.layer(l).out_size(w);
      m.push_back({cfg_.layers[l].out, h, w});
    }
    return m;
  }

  nn::ParamRefs<T> params() {
    nn::ParamRefs<T> p;
    net_.collect(p);
    return p;
  }

  Features forward(const nn::Tensor<T>& x, Cache* cache = nullptr) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    net_.forward(x, &c);
    Features f;
    for (const auto& z : c.pre) f.push_back(net_.activate(z));
    return f;
  }

  /// Gradient w.r.t. the input given gradients on every feature map.
  nn::Tensor<T> backward_input(const Cache& cache, Features g_maps) {
    return net_.backward_all(cache, std::move(g_maps), /*accumulate_params=*/false);
  }

 private:
  FeatureExtractorConfig cfg_;
  nn::ConvStack<T> net_;
};

}  // namespace blurbridge::models

#pragma once

#include <cmath>
#include <vector>

#include "blurbridge/imaging/image.hpp"
#include "blurbridge/nn/adam.hpp"
#include "blurbridge/nn/conv_stack.hpp"

namespace blurbridge::models {

struct ClassifierConfig {
  std::vector<int> channels{16, 32, 64};  // stride-2 conv widths before the 1-channel head
  double learning_rate = 1e-3;
  int iterations = 1500;
  int batch = 16;
  std::uint64_t seed = 11;
  double highpass_gain = 10.0;  // fixed input stage, as in the discriminator
  int highpass_radius = 2;
};

struct LabeledImage {
  Image image;
  bool known = false;  // true: known-domain blur
};

/// Binary known-vs-unknown blur classifier: fixed high-pass input stage, four convolutions,
/// global mean of the logit map, logistic output. Trained independently of the translation GAN.
class KernelClassifier {
 public:
  explicit KernelClassifier(const ClassifierConfig& cfg = {}) : cfg_(cfg), net_("cls.", specs(cfg), nn::Activation::leaky_relu, true) {
    Rng rng(cfg.seed);
    net_.init(rng);
  }

  static std::vector<nn::ConvSpec> specs(const ClassifierConfig& cfg) {
    std::vector<nn::ConvSpec> s;
    int in = 3;
    for (int c : cfg.channels) {
      s.push_back({in, c, 3, 2});
      in = c;
    }
    s.push_back({in, 1, 3, 1});
    return s;
  }

  bool trained() const noexcept { return trained_; }

  /// Probability that each image carries known-domain blur.
  std::vector<double> predict(std::span<const Image> images) const {
    std::vector<double> out;
    for (std::size_t start = 0; start < images.size(); start += 32) {
      const std::size_t n = std::min<std::size_t>(32, images.size() - start);
      const auto x = prefilter(nn::to_tensor<float>(images.subspan(start, n)));
      const auto z = net_.forward(x);
      for (int b = 0; b < z.n; ++b) {
        double m = 0.0;
        for (float v : z.sample(b)) m += v;
        m /= static_cast<double>(z.sample_size());
        out.push_back(1.0 / (1.0 + std::exp(-m)));
      }
    }
    return out;
  }

  bool is_known(const Image& img) const { return predict(std::span<const Image>(&img, 1))[0] > 0.5; }

  /// Binary cross-entropy training with balanced batches. Returns final-batch accuracy.
  double train(const std::vector<LabeledImage>& data) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < data.size(); ++i) (data[i].known ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty()) throw EmptySetError("classifier needs both known and unknown examples");
    Rng rng(Rng::derive(cfg_.seed, 0xC1A55));
    nn::Adam<float> opt;
    nn::ParamRefs<float> ps;
    net_.collect(ps);
    double acc = 0.0;
    for (int it = 0; it < cfg_.iterations; ++it) {
      std::vector<Image> imgs;
      std::vector<float> labels;
      for (int b = 0; b < cfg_.batch; ++b) {
        const bool known = b % 2 == 0;
        const auto& pool = known ? pos : neg;
        const auto& s = data[pool[rng.below(pool.size())]];
        Image img = s.image;
        if (rng.bernoulli(0.5)) img = flip_horizontal(img);
        imgs.push_back(std::move(img));
        labels.push_back(known ? 1.0f : 0.0f);
      }
      const auto x = prefilter(nn::to_tensor<float>(std::span<const Image>(imgs)));
      nn::ConvStack<float>::Cache cache;
      const auto z = net_.forward(x, &cache);
      nn::Tensor<float> g = z.zeros_like();
      int correct = 0;
      for (int b = 0; b < z.n; ++b) {
        double m = 0.0;
        for (float v : z.sample(b)) m += v;
        m /= static_cast<double>(z.sample_size());
        const double p = 1.0 / (1.0 + std::exp(-m));
        correct += (p > 0.5) == (labels[b] > 0.5f);
        const float dm = static_cast<float>((p - labels[b]) / (z.n * static_cast<double>(z.sample_size())));
        for (float& v : g.sample(b)) v = dm;
      }
      acc = static_cast<double>(correct) / z.n;
      nn::zero_grads(ps);
      net_.backward(cache, std::move(g), true, false);
      opt.step(ps, cfg_.learning_rate);
    }
    trained_ = true;
    return acc;
  }

  static Image flip_horizontal(const Image& img) {
    Image out(img.height(), img.width());
    for (int c = 0; c < Image::channels; ++c)
      for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) out(c, y, x) = img(c, y, img.width() - 1 - x);
    return out;
  }

 private:
  nn::Tensor<float> prefilter(const nn::Tensor<float>& x) const {
    if (cfg_.highpass_gain == 0.0) return x;
    return nn::highpass(x, static_cast<float>(cfg_.highpass_gain), cfg_.highpass_radius);
  }

  ClassifierConfig cfg_;
  nn::ConvStack<float> net_;
  bool trained_ = false;
};

}  // namespace blurbridge::models

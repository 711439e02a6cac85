#pragma once

#include <complex>
#include <variant>
#include <vector>

#include "blurbridge/blur/kernel.hpp"
#include "blurbridge/blur/synthesis.hpp"
#include "blurbridge/fft.hpp"
#include "blurbridge/imaging/metrics.hpp"
#include "blurbridge/nn/adam.hpp"
#include "blurbridge/nn/conv_stack.hpp"

namespace blurbridge::models {

/// Frequency-domain Wiener deconvolution with a fixed kernel and noise-to-signal ratio.
///
/// The input is mirror-extended (reflect-101) to a periodic image, so for a centrally
/// symmetric kernel the circular model is exactly the reflect-padded blur used by
/// apply_blur.
class WienerDeblurrer {
 public:
  WienerDeblurrer(BlurKernel kernel, double nsr) : kernel_(std::move(kernel)), nsr_(nsr) {
    if (!(nsr >= 0.0)) throw InvalidRangeError("wiener nsr must be >= 0");
  }

  const BlurKernel& kernel() const noexcept { return kernel_; }
  double nsr() const noexcept { return nsr_; }

  /// Deconvolved estimate before clamping; linear in the input.
  Image deblur_unclamped(const Image& y) const {
    const int h = y.height(), w = y.width();
    const int rows = 2 * h - 2, cols = 2 * w - 2;
    RealFft2d fft(rows, cols);
    const auto k_hat = fft.forward(kernel_to_grid(kernel_, rows, cols));
    std::vector<std::complex<double>> filter(k_hat.size());
    for (std::size_t i = 0; i < k_hat.size(); ++i) {
      const double mag2 = std::norm(k_hat[i]);
      const double denom = mag2 + nsr_;
      filter[i] = denom > 0.0 ? std::conj(k_hat[i]) / denom : std::complex<double>(0.0);
    }
    Image out(h, w);
    std::vector<double> ext(static_cast<std::size_t>(rows) * cols);
    for (int c = 0; c < Image::channels; ++c) {
      for (int py = 0; py < rows; ++py)
        for (int px = 0; px < cols; ++px)
          ext[py * cols + px] = y(c, reflect_index(py, h), reflect_index(px, w));
      auto spec = fft.forward(ext);
      for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= filter[i];
      const auto res = fft.inverse(spec);
      for (int py = 0; py < h; ++py)
        for (int px = 0; px < w; ++px) out(c, py, px) = res[py * cols + px];
    }
    return out;
  }

  Image deblur(const Image& y) const {
    Image out = deblur_unclamped(y);
    return out.clamp();
  }

 private:
  BlurKernel kernel_;
  double nsr_;
};

struct DeblurNetConfig {
  int width = 24;
  int depth = 7;  // convolutions including the residual head
  double learning_rate = 2e-3;
  int iterations = 2000;
  int batch = 16;
  int crop = 32;  // training patch side; 0 trains on whole images
  std::uint64_t seed = 7;
};

/// Small residual CNN trained with supervision on known-domain pairs:
/// x_hat = clamp(y + f(y)).
class NetworkDeblurrer {
 public:
  explicit NetworkDeblurrer(const DeblurNetConfig& cfg = {}) : cfg_(cfg), net_("deblur.", specs(cfg), nn::Activation::leaky_relu, true) {
    Rng rng(cfg.seed);
    net_.init(rng);
    net_.layer(net_.depth() - 1).zero_init();
  }

  static std::vector<nn::ConvSpec> specs(const DeblurNetConfig& cfg) {
    if (cfg.depth < 2) throw InvalidRangeError("deblur net depth must be >= 2");
    std::vector<nn::ConvSpec> s{{3, cfg.width, 3, 1}};
    for (int i = 0; i < cfg.depth - 2; ++i) s.push_back({cfg.width, cfg.width, 3, 1});
    s.push_back({cfg.width, 3, 3, 1});
    return s;
  }

  const DeblurNetConfig& config() const noexcept { return cfg_; }
  Json architecture() const { return Json{{"layers", specs(cfg_)}}; }
  nn::ConvStack<float>& net() noexcept { return net_; }
  nn::ParamRefs<float> params() {
    nn::ParamRefs<float> p;
    net_.collect(p);
    return p;
  }

  nn::Tensor<float> forward(const nn::Tensor<float>& y, nn::ConvStack<float>::Cache* cache = nullptr) const {
    nn::Tensor<float> r = net_.forward(y, cache);
    for (std::size_t i = 0; i < r.size(); ++i) r.data[i] += y.data[i];
    return r;
  }

  Image deblur(const Image& y) const { return nn::to_image(forward(nn::to_tensor<float>(y)), 0); }

  /// Supervised MSE training on (blurry, sharp) pairs; returns the final batch loss.
  double train(const std::vector<BlurPair>& pairs) {
    if (pairs.empty()) throw EmptySetError("deblurrer training needs pairs");
    Rng rng(Rng::derive(cfg_.seed, 0xDEB1));
    nn::Adam<float> opt;
    auto ps = params();
    double last = 0.0;
    for (int it = 0; it < cfg_.iterations; ++it) {
      std::vector<Image> ys, xs;
      for (int b = 0; b < cfg_.batch; ++b) {
        const auto& p = pairs[rng.below(pairs.size())];
        const int h = p.blurry.height(), w = p.blurry.width();
        if (cfg_.crop == 0 || (cfg_.crop >= h && cfg_.crop >= w)) {
          ys.push_back(p.blurry);
          xs.push_back(p.sharp);
          continue;
        }
        const int side = std::min({cfg_.crop, h, w});
        const int oy = static_cast<int>(rng.below(static_cast<std::uint64_t>(h - side + 1)));
        const int ox = static_cast<int>(rng.below(static_cast<std::uint64_t>(w - side + 1)));
        ys.push_back(patch(p.blurry, oy, ox, side));
        xs.push_back(patch(p.sharp, oy, ox, side));
      }
      const auto y = nn::to_tensor<float>(std::span<const Image>(ys));
      const auto x = nn::to_tensor<float>(std::span<const Image>(xs));
      nn::ConvStack<float>::Cache cache;
      const auto out = forward(y, &cache);
      nn::Tensor<float> g = out.zeros_like();
      double loss = 0.0;
      const float scale = 2.0f / static_cast<float>(out.size());
      for (std::size_t i = 0; i < out.size(); ++i) {
        const float d = out.data[i] - x.data[i];
        loss += static_cast<double>(d) * d;
        g.data[i] = scale * d;
      }
      last = loss / static_cast<double>(out.size());
      nn::zero_grads(ps);
      net_.backward(cache, std::move(g), true, false);
      const double lr = cfg_.learning_rate * (it < cfg_.iterations / 2 ? 1.0 : 2.0 * (cfg_.iterations - it) / cfg_.iterations);
      opt.step(ps, lr);
    }
    return last;
  }

 private:
  static Image patch(const Image& img, int oy, int ox, int side) {
    Image out(side, side);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) out(c, y, x) = img(c, oy + y, ox + x);
    return out;
  }

  DeblurNetConfig cfg_;
  nn::ConvStack<float> net_;
};

/// The pretrained known-domain deblurrer: a Wiener oracle or a trained network.
class KnownDeblurrer {
 public:
  KnownDeblurrer() = default;
  KnownDeblurrer(WienerDeblurrer w) : impl_(std::move(w)) {}
  KnownDeblurrer(NetworkDeblurrer n) : impl_(std::move(n)) {}

  bool configured() const noexcept { return !std::holds_alternative<std::monostate>(impl_); }

  Image deblur(const Image& y) const {
    return std::visit(
        [&](const auto& m) -> Image {
          if constexpr (std::is_same_v<std::decay_t<decltype(m)>, std::monostate>) {
            throw UsageError("known-domain deblurrer is not configured");
          } else {
            return m.deblur(y);
          }
        },
        impl_);
  }

  const WienerDeblurrer* wiener() const noexcept { return std::get_if<WienerDeblurrer>(&impl_); }
  NetworkDeblurrer* network() noexcept { return std::get_if<NetworkDeblurrer>(&impl_); }

 private:
  std::variant<std::monostate, WienerDeblurrer, NetworkDeblurrer> impl_;
};

}  // namespace blurbridge::models

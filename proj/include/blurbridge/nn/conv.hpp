#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "blurbridge/nn/parameter.hpp"
#include "blurbridge/nn/tensor.hpp"

namespace blurbridge::nn {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstRowMap = Eigen::Map<const RowMatrix<T>>;

/// Square-kernel 2-D convolution (cross-correlation), zero padding k/2, optional stride.
/// Implemented as im2col over the whole batch followed by one GEMM.
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride = 1,
         bool bias = true)
      : in_(in_channels), out_(out_channels), k_(kernel), stride_(stride), has_bias_(bias),
        weight(name + ".weight", {out_channels, in_channels, kernel, kernel}),
        bias(name + ".bias", {bias ? out_channels : 0}) {}

  int in_channels() const noexcept { return in_; }
  int out_channels() const noexcept { return out_; }
  int kernel() const noexcept { return k_; }
  int stride() const noexcept { return stride_; }
  int out_size(int s) const noexcept { return (s + 2 * (k_ / 2) - k_) / stride_ + 1; }

  void init(Rng& rng, double gain = std::sqrt(2.0)) {
    init_he_normal(weight, in_ * k_ * k_, rng, gain);
    std::fill(bias.value.begin(), bias.value.end(), T(0));
  }
  void zero_init() {
    std::fill(weight.value.begin(), weight.value.end(), T(0));
    std::fill(bias.value.begin(), bias.value.end(), T(0));
  }

  void collect(ParamRefs<T>& out) {
    out.push_back(&weight);
    if (has_bias_) out.push_back(&bias);
  }

  /// y = W * x (+ b when `with_bias`). The bias-free form is the layer's linear part,
  /// used when propagating tangents.
  Tensor<T> forward(const Tensor<T>& x, bool with_bias = true) const {
    check_input(x);
    const int oh = out_size(x.h), ow = out_size(x.w);
    const std::size_t cols = static_cast<std::size_t>(x.n) * oh * ow;
    std::vector<T> col_buf = im2col(x, oh, ow);
    ConstRowMap<T> cm(col_buf.data(), in_ * k_ * k_, cols);
    ConstRowMap<T> wm(weight.value.data(), out_, in_ * k_ * k_);
    RowMatrix<T> ym = wm * cm;
    Tensor<T> y(x.n, out_, oh, ow);
    const std::size_t plane = static_cast<std::size_t>(oh) * ow;
    for (int i = 0; i < x.n; ++i)
      for (int co = 0; co < out_; ++co) {
        const T b = (has_bias_ && with_bias) ? bias.value[co] : T(0);
        const T* src = ym.data() + co * cols + i * plane;
        T* dst = y.data.data() + (static_cast<std::size_t>(i) * out_ + co) * plane;
        for (std::size_t j = 0; j < plane; ++j) dst[j] = src[j] + b;
      }
    return y;
  }

  /// Given input x and upstream gradient gy, accumulates weight (and optionally bias)
  /// gradients and returns the input gradient when `want_input_grad`.
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& gy, bool want_input_grad = true,
                     bool accumulate_params = true, bool include_bias = true) {
    const int oh = out_size(x.h), ow = out_size(x.w);
    if (gy.n != x.n || gy.c != out_ || gy.h != oh || gy.w != ow) {
      throw ShapeMismatchError("conv backward: gradient shape " + gy.shape_string());
    }
    const std::size_t cols = static_cast<std::size_t>(x.n) * oh * ow;
    const std::size_t plane = static_cast<std::size_t>(oh) * ow;
    RowMatrix<T> gm(out_, cols);
    for (int i = 0; i < x.n; ++i)
      for (int co = 0; co < out_; ++co) {
        const T* src = gy.data.data() + (static_cast<std::size_t>(i) * out_ + co) * plane;
        T* dst = gm.data() + co * cols + i * plane;
        std::copy(src, src + plane, dst);
      }
    if (accumulate_params) {
      std::vector<T> col_buf = im2col(x, oh, ow);
      ConstRowMap<T> cm(col_buf.data(), in_ * k_ * k_, cols);
      RowMap<T> gw(weight.grad.data(), out_, in_ * k_ * k_);
      gw.noalias() += gm * cm.transpose();
      if (has_bias_ && include_bias) {
        for (int co = 0; co < out_; ++co) bias.grad[co] += gm.row(co).sum();
      }
    }
    if (!want_input_grad) return {};
    ConstRowMap<T> wm(weight.value.data(), out_, in_ * k_ * k_);
    RowMatrix<T> gcols = wm.transpose() * gm;
    Tensor<T> gx(x.n, x.c, x.h, x.w);
    col2im(gcols.data(), oh, ow, gx);
    return gx;
  }

  Parameter<T> weight;
  Parameter<T> bias;

 private:
  void check_input(const Tensor<T>& x) const {
    if (x.c != in_) {
      throw ShapeMismatchError(weight.name + ": expected " + std::to_string(in_) +
                               " input channels, got " + std::to_string(x.c));
    }
  }

  // Row index (ci, ky, kx), column index (sample, oy, ox).
  std::vector<T> im2col(const Tensor<T>& x, int oh, int ow) const {
    const int pad = k_ / 2;
    const std::size_t cols = static_cast<std::size_t>(x.n) * oh * ow;
    std::vector<T> buf(static_cast<std::size_t>(in_) * k_ * k_ * cols);
    for (int ci = 0; ci < in_; ++ci)
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx) {
          T* row = buf.data() + ((static_cast<std::size_t>(ci) * k_ + ky) * k_ + kx) * cols;
          for (int i = 0; i < x.n; ++i) {
            const T* src = x.data.data() + (static_cast<std::size_t>(i) * x.c + ci) * x.plane();
            T* dst = row + static_cast<std::size_t>(i) * oh * ow;
            for (int oy = 0; oy < oh; ++oy) {
              const int iy = oy * stride_ + ky - pad;
              if (iy < 0 || iy >= x.h) {
                std::fill(dst + oy * ow, dst + (oy + 1) * ow, T(0));
                continue;
              }
              const T* srow = src + static_cast<std::size_t>(iy) * x.w;
              for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * stride_ + kx - pad;
                dst[oy * ow + ox] = (ix >= 0 && ix < x.w) ? srow[ix] : T(0);
              }
            }
          }
        }
    return buf;
  }

  void col2im(const T* buf, int oh, int ow, Tensor<T>& gx) const {
    const int pad = k_ / 2;
    const std::size_t cols = static_cast<std::size_t>(gx.n) * oh * ow;
    for (int ci = 0; ci < in_; ++ci)
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx) {
          const T* row = buf + ((static_cast<std::size_t>(ci) * k_ + ky) * k_ + kx) * cols;
          for (int i = 0; i < gx.n; ++i) {
            T* dst = gx.data.data() + (static_cast<std::size_t>(i) * gx.c + ci) * gx.plane();
            const T* src = row + static_cast<std::size_t>(i) * oh * ow;
            for (int oy = 0; oy < oh; ++oy) {
              const int iy = oy * stride_ + ky - pad;
              if (iy < 0 || iy >= gx.h) continue;
              T* drow = dst + static_cast<std::size_t>(iy) * gx.w;
              for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * stride_ + kx - pad;
                if (ix >= 0 && ix < gx.w) drow[ix] += src[oy * ow + ox];
              }
            }
          }
        }
  }

  int in_ = 0, out_ = 0, k_ = 3, stride_ = 1;
  bool has_bias_ = true;
};

}  // namespace blurbridge::nn

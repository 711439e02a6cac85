#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "blurbridge/blur/synthesis.hpp"
#include "blurbridge/fft.hpp"

namespace blurbridge {

struct KernelEstimateOptions {
  int support = 15;      // odd side length of the estimated kernel
  double ridge = 1e-6;   // Tikhonov weight on ||k||^2
};

/// Ridge-regularised least-squares kernel fit between a sharp image and its blurred copy.
///
/// The data term covers every pixel of the blurry image with the sharp image
/// reflect-padded by the support radius, which is exactly the forward model used by
/// apply_blur; padding the sharp plane makes circular convolution on the padded grid
/// coincide with that model, so the normal equations are assembled with FFT
/// correlations and solved directly. The solution is clipped to be nonnegative and
/// renormalised to unit mass.
inline BlurKernel estimate_kernel(const BlurPair& pair, const KernelEstimateOptions& opt = {}) {
  const Image& x = pair.sharp;
  const Image& y = pair.blurry;
  require_same_shape(x, y, "estimate_kernel");
  const int h = x.height(), w = x.width();
  if (opt.support < 1 || opt.support % 2 == 0) throw InvalidRangeError("support must be odd");
  if (opt.support > std::min(h, w) / 2) {
    throw InvalidRangeError("support " + std::to_string(opt.support) +
                            " exceeds half the image side");
  }
  if (!(opt.ridge >= 0.0)) throw InvalidRangeError("ridge must be >= 0");

  double max_var = 0.0;
  for (int c = 0; c < Image::channels; ++c) {
    auto p = x.plane(c);
    double m = 0.0, m2 = 0.0;
    for (double v : p) {
      m += v;
      m2 += v * v;
    }
    m /= static_cast<double>(p.size());
    max_var = std::max(max_var, m2 / static_cast<double>(p.size()) - m * m);
  }
  if (max_var < 1e-12) {
    throw DegenerateInputError("sharp image has no spectral content beyond DC; kernel is unidentifiable");
  }

  const int r = opt.support / 2;
  const int rows = h + 2 * r, cols = w + 2 * r;
  const int n = opt.support * opt.support;
  RealFft2d fft(rows, cols);

  std::vector<std::vector<double>> padded(Image::channels);
  std::vector<std::vector<std::complex<double>>> padded_hat(Image::channels);
  for (int c = 0; c < Image::channels; ++c) {
    padded[c].resize(static_cast<std::size_t>(rows) * cols);
    for (int py = 0; py < rows; ++py)
      for (int px = 0; px < cols; ++px)
        padded[c][py * cols + px] = x(c, reflect_index(py - r, h), reflect_index(px - r, w));
    padded_hat[c] = fft.forward(padded[c]);
  }

  // A^T e for a residual-shaped plane e per channel: correlation with the padded sharp image,
  // read back at the support offsets.
  std::vector<double> grid(static_cast<std::size_t>(rows) * cols);
  auto adjoint = [&](auto&& fill_plane) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (int c = 0; c < Image::channels; ++c) {
      std::fill(grid.begin(), grid.end(), 0.0);
      for (int py = 0; py < h; ++py)
        for (int px = 0; px < w; ++px) grid[(py + r) * cols + px + r] = fill_plane(c, py, px);
      auto e_hat = fft.forward(grid);
      for (std::size_t i = 0; i < e_hat.size(); ++i) e_hat[i] *= std::conj(padded_hat[c][i]);
      const auto corr = fft.inverse(e_hat);
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const int gy = (dy + rows) % rows, gx = (dx + cols) % cols;
          out((dy + r) * opt.support + dx + r) += corr[gy * cols + gx];
        }
    }
    return out;
  };

  Eigen::MatrixXd gram(n, n);
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      // Column of A for offset (dy,dx): the padded sharp image shifted by that offset.
      gram.col((dy + r) * opt.support + dx + r) = adjoint([&](int c, int py, int px) {
        return padded[c][(py + r - dy) * cols + (px + r - dx)];
      });
    }
  }
  const Eigen::VectorXd rhs = adjoint([&](int c, int py, int px) { return y(c, py, px); });
  Eigen::MatrixXd system = 0.5 * (gram + gram.transpose());
  system.diagonal().array() += opt.ridge;
  const Eigen::VectorXd k = system.ldlt().solve(rhs);
  if (!k.allFinite()) throw NumericError("kernel estimate is not finite");

  std::vector<double> weights(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) weights[i] = std::max(0.0, k(i));
  BlurKernel est(opt.support, std::move(weights));
  if (!(est.sum() > 0.0)) throw DegenerateInputError("kernel estimate has no positive mass");
  return est.normalized();
}

enum class TransferMode { exact, estimated };

inline std::string to_string(TransferMode m) { return m == TransferMode::exact ? "exact" : "estimated"; }
inline TransferMode parse_transfer_mode(const std::string& s) {
  if (s == "exact") return TransferMode::exact;
  if (s == "estimated") return TransferMode::estimated;
  throw UsageError("unknown transfer mode '" + s + "'");
}

/// The kernel that transfer_kernel would apply for this source pair.
inline BlurKernel transfer_source_kernel(const BlurPair& source, TransferMode mode,
                                         const KernelEstimateOptions& opt = {}) {
  if (mode == TransferMode::exact) {
    if (!source.kernel) throw DataError("exact transfer needs a source pair with a ground-truth kernel");
    return *source.kernel;
  }
  return estimate_kernel(source, opt);
}

/// Re-blurs `sharp` with the blur of `source`, keeping the sharp image's content.
inline Image transfer_kernel(const Image& sharp, const BlurPair& source, TransferMode mode,
                             double noise_sigma, std::uint64_t seed,
                             const KernelEstimateOptions& opt = {}) {
  return apply_blur(sharp, transfer_source_kernel(source, mode, opt), noise_sigma, seed);
}

}  // namespace blurbridge

#pragma once

#include <fftw3.h>

#include <complex>
#include <cstring>
#include <span>
#include <vector>

namespace blurbridge {

/// Real 2-D FFT of a fixed size backed by FFTW. Plans use FFTW_ESTIMATE, which keeps
/// results reproducible run to run. Not thread-safe; give each worker its own instance.
class RealFft2d {
 public:
  RealFft2d(int rows, int cols)
      : rows_(rows), cols_(cols), half_(cols / 2 + 1),
        real_(static_cast<double*>(fftw_malloc(sizeof(double) * rows * cols))),
        spec_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * rows * half_))) {
    forward_ = fftw_plan_dft_r2c_2d(rows, cols, real_, spec_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_2d(rows, cols, spec_, real_, FFTW_ESTIMATE);
  }
  RealFft2d(const RealFft2d&) = delete;
  RealFft2d& operator=(const RealFft2d&) = delete;
  ~RealFft2d() {
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
    fftw_free(real_);
    fftw_free(spec_);
  }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  std::size_t spectrum_size() const noexcept { return static_cast<std::size_t>(rows_) * half_; }

  std::vector<std::complex<double>> forward(std::span<const double> in) {
    std::memcpy(real_, in.data(), sizeof(double) * in.size());
    fftw_execute(forward_);
    std::vector<std::complex<double>> out(spectrum_size());
    std::memcpy(out.data(), spec_, sizeof(fftw_complex) * out.size());
    return out;
  }

  /// Normalised inverse (divides by rows*cols).
  std::vector<double> inverse(std::span<const std::complex<double>> in) {
    std::memcpy(spec_, in.data(), sizeof(fftw_complex) * in.size());
    fftw_execute(inverse_);
    std::vector<double> out(static_cast<std::size_t>(rows_) * cols_);
    const double scale = 1.0 / (static_cast<double>(rows_) * cols_);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = real_[i] * scale;
    return out;
  }

 private:
  int rows_, cols_, half_;
  double* real_;
  fftw_complex* spec_;
  fftw_plan forward_;
  fftw_plan inverse_;
};

/// Places a centred kernel on a rows x cols periodic grid with its centre at (0,0).
template <typename Kernel>
std::vector<double> kernel_to_grid(const Kernel& k, int rows, int cols) {
  std::vector<double> grid(static_cast<std::size_t>(rows) * cols, 0.0);
  const int r = k.radius();
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const int y = ((dy % rows) + rows) % rows, x = ((dx % cols) + cols) % cols;
      grid[static_cast<std::size_t>(y) * cols + x] += k.at_offset(dy, dx);
    }
  return grid;
}

}  // namespace blurbridge

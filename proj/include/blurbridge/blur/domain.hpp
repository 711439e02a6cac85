#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "blurbridge/blur/kernel.hpp"
#include "blurbridge/imaging/crf.hpp"
#include "blurbridge/json_util.hpp"
#include "blurbridge/rng.hpp"

namespace blurbridge {

enum class BlurFamily { linear_motion, gaussian, frame_average_trajectory };

inline std::string to_string(BlurFamily f) {
  switch (f) {
    case BlurFamily::linear_motion: return "linear-motion";
    case BlurFamily::gaussian: return "gaussian";
    case BlurFamily::frame_average_trajectory: return "frame-average-trajectory";
  }
  return "?";
}

inline BlurFamily parse_blur_family(const std::string& s) {
  if (s == "linear-motion") return BlurFamily::linear_motion;
  if (s == "gaussian") return BlurFamily::gaussian;
  if (s == "frame-average-trajectory") return BlurFamily::frame_average_trajectory;
  throw UsageError("unknown blur family '" + s + "'");
}

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  bool empty() const noexcept { return !(lo <= hi); }
  double sample(Rng& rng) const { return lo == hi ? lo : rng.uniform(lo, hi); }
  double mid() const noexcept { return 0.5 * (lo + hi); }
};

/// A parametric blur domain: kernel family with parameter ranges plus sensor noise.
struct BlurDomainSpec {
  BlurFamily family = BlurFamily::gaussian;
  Range motion_length{7.0, 15.0};   // px
  Range motion_angle{0.0, 180.0};   // degrees
  Range gaussian_sigma{1.0, 2.0};   // px
  Range trajectory_frames{8.0, 16.0};
  Range trajectory_extent{4.0, 10.0};  // px, length of the path
  double noise_sigma = 0.01;
  double crf_gamma = 1.0;

  CameraResponse crf() const { return {crf_gamma}; }

  /// Desk default for the unknown domain.
  static BlurDomainSpec unknown_default() {
    BlurDomainSpec s;
    s.family = BlurFamily::linear_motion;
    return s;
  }
  /// Desk default for the known domain.
  static BlurDomainSpec known_default() {
    BlurDomainSpec s;
    s.family = BlurFamily::gaussian;
    return s;
  }

  void validate() const {
    auto check = [](const Range& r, const char* name) {
      if (r.empty()) throw InvalidRangeError(std::string("empty parameter range: ") + name);
    };
    switch (family) {
      case BlurFamily::linear_motion:
        check(motion_length, "motion_length");
        check(motion_angle, "motion_angle");
        if (motion_length.lo < 1.0) throw InvalidRangeError("motion_length must be >= 1");
        break;
      case BlurFamily::gaussian:
        check(gaussian_sigma, "gaussian_sigma");
        if (gaussian_sigma.lo < 0.0) throw InvalidRangeError("gaussian_sigma must be >= 0");
        break;
      case BlurFamily::frame_average_trajectory:
        check(trajectory_frames, "trajectory_frames");
        check(trajectory_extent, "trajectory_extent");
        if (trajectory_frames.lo < 1.0) throw InvalidRangeError("trajectory_frames must be >= 1");
        if (trajectory_extent.lo < 0.0) throw InvalidRangeError("trajectory_extent must be >= 0");
        break;
    }
    if (!(noise_sigma >= 0.0)) throw InvalidRangeError("noise_sigma must be >= 0");
    if (!(crf_gamma > 0.0)) throw InvalidRangeError("crf_gamma must be > 0");
  }
};

namespace detail {

// Smooth random walk with momentum, rescaled to the requested path length and centred.
inline std::vector<std::pair<double, double>> sample_trajectory(int frames, double extent,
                                                                Rng& rng) {
  std::vector<std::pair<double, double>> pts(static_cast<std::size_t>(frames), {0.0, 0.0});
  if (frames == 1 || extent == 0.0) return pts;
  const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
  double vy = std::sin(heading), vx = std::cos(heading);
  double py = 0.0, px = 0.0, length = 0.0;
  for (int i = 1; i < frames; ++i) {
    vy += 0.4 * rng.normal();
    vx += 0.4 * rng.normal();
    const double n = std::hypot(vy, vx);
    if (n > 0) {
      vy /= n;
      vx /= n;
    }
    py += vy;
    px += vx;
    length += 1.0;
    pts[i] = {py, px};
  }
  double my = 0.0, mx = 0.0;
  for (auto [y, x] : pts) {
    my += y;
    mx += x;
  }
  my /= frames;
  mx /= frames;
  const double scale = extent / length;
  for (auto& [y, x] : pts) {
    y = (y - my) * scale;
    x = (x - mx) * scale;
  }
  return pts;
}

}  // namespace detail

/// Draws one kernel from the domain; deterministic in `seed`.
inline BlurKernel sample_kernel(const BlurDomainSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  switch (spec.family) {
    case BlurFamily::linear_motion: {
      const double length = spec.motion_length.sample(rng);
      const double angle = spec.motion_angle.sample(rng);
      return BlurKernel::linear_motion(length, angle);
    }
    case BlurFamily::gaussian:
      return BlurKernel::gaussian(spec.gaussian_sigma.sample(rng));
    case BlurFamily::frame_average_trajectory: {
      const int frames = static_cast<int>(std::lround(spec.trajectory_frames.sample(rng)));
      const double extent = spec.trajectory_extent.sample(rng);
      return BlurKernel::from_trajectory(detail::sample_trajectory(frames, extent, rng));
    }
  }
  throw InvalidRangeError("unknown family");
}

/// Mean pairwise L2 distance between `samples` kernels drawn from each domain.
inline double domain_distance(const BlurDomainSpec& a, const BlurDomainSpec& b, int samples,
                              std::uint64_t seed) {
  std::vector<BlurKernel> ka, kb;
  for (int i = 0; i < samples; ++i) {
    ka.push_back(sample_kernel(a, Rng::derive(seed, 2 * i)));
    kb.push_back(sample_kernel(b, Rng::derive(seed, 2 * i + 1)));
  }
  double s = 0.0;
  for (const auto& x : ka)
    for (const auto& y : kb) s += kernel_l2(x, y);
  return s / (static_cast<double>(samples) * samples);
}

/// Kernel-space mean of a gaussian domain, by midpoint quadrature over sigma.
inline BlurKernel expected_gaussian_kernel(const Range& sigma, int nodes = 64) {
  if (sigma.empty()) throw InvalidRangeError("empty sigma range");
  if (sigma.lo == sigma.hi) return BlurKernel::gaussian(sigma.lo);
  const int size = 2 * static_cast<int>(std::ceil(3.0 * sigma.hi)) + 1;
  std::vector<double> acc(static_cast<std::size_t>(size) * size, 0.0);
  for (int i = 0; i < nodes; ++i) {
    const double s = sigma.lo + (i + 0.5) * (sigma.hi - sigma.lo) / nodes;
    const BlurKernel k = BlurKernel::gaussian(s).embedded(size);
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += k.weights()[j];
  }
  return BlurKernel(size, std::move(acc)).normalized();
}

inline void to_json(Json& j, const Range& r) { j = Json::array({r.lo, r.hi}); }
inline void from_json(const Json& j, Range& r) {
  if (!j.is_array() || j.size() != 2) throw UsageError("range must be a two-element array");
  r.lo = j[0].get<double>();
  r.hi = j[1].get<double>();
}

inline void to_json(Json& j, const BlurDomainSpec& s) {
  j = Json{{"family", to_string(s.family)},
           {"motion_length", s.motion_length},
           {"motion_angle", s.motion_angle},
           {"gaussian_sigma", s.gaussian_sigma},
           {"trajectory_frames", s.trajectory_frames},
           {"trajectory_extent", s.trajectory_extent},
           {"noise_sigma", s.noise_sigma},
           {"crf_gamma", s.crf_gamma}};
}

inline BlurDomainSpec domain_from_json(const Json& j, const std::string& where,
                                       BlurDomainSpec s = {}) {
  reject_unknown_keys(j,
                      {"family", "motion_length", "motion_angle", "gaussian_sigma",
                       "trajectory_frames", "trajectory_extent", "noise_sigma", "crf_gamma"},
                      where);
  if (auto it = j.find("family"); it != j.end()) s.family = parse_blur_family(it->get<std::string>());
  read_opt(j, "motion_length", s.motion_length, where);
  read_opt(j, "motion_angle", s.motion_angle, where);
  read_opt(j, "gaussian_sigma", s.gaussian_sigma, where);
  read_opt(j, "trajectory_frames", s.trajectory_frames, where);
  read_opt(j, "trajectory_extent", s.trajectory_extent, where);
  read_opt(j, "noise_sigma", s.noise_sigma, where);
  read_opt(j, "crf_gamma", s.crf_gamma, where);
  s.validate();
  return s;
}

}  // namespace blurbridge

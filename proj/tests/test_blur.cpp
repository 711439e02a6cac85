#include <gtest/gtest.h>

#include <cmath>

#include "blurbridge/blur/domain.hpp"
#include "blurbridge/blur/kernel_transfer.hpp"
#include "blurbridge/blur/synthesis.hpp"
#include "blurbridge/imaging/metrics.hpp"
#include "oracles.hpp"

using namespace blurbridge;

namespace {

BlurDomainSpec family_spec(BlurFamily f) {
  BlurDomainSpec s = BlurDomainSpec::unknown_default();
  s.family = f;
  return s;
}

double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

}  // namespace

TEST(SampleKernel, GaussianZeroSigmaIsDelta) {
  BlurDomainSpec s = BlurDomainSpec::known_default();
  s.gaussian_sigma = {0.0, 0.0};
  EXPECT_EQ(sample_kernel(s, 3).trimmed(), BlurKernel::delta());
}

TEST(SampleKernel, MotionLengthOneIsDelta) {
  BlurDomainSpec s = BlurDomainSpec::unknown_default();
  s.motion_length = {1.0, 1.0};
  for (std::uint64_t seed = 0; seed < 20; ++seed) EXPECT_EQ(sample_kernel(s, seed).trimmed(), BlurKernel::delta());
}

TEST(SampleKernel, HorizontalMotionIsBox) {
  const BlurKernel k = BlurKernel::linear_motion(5.0, 0.0);
  ASSERT_EQ(k.size(), 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) EXPECT_NEAR(k(y, x), y == 2 ? 0.2 : 0.0, 1e-12) << y << "," << x;
}

TEST(SampleKernel, VerticalMotionIsTransposedBox) {
  const BlurKernel k = BlurKernel::linear_motion(5.0, 90.0);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) EXPECT_NEAR(k(y, x), x == 2 ? 0.2 : 0.0, 1e-12);
}

TEST(SampleKernel, EmptyRangeRejected) {
  BlurDomainSpec s = BlurDomainSpec::unknown_default();
  s.motion_length = {9.0, 7.0};
  EXPECT_THROW(sample_kernel(s, 0), InvalidRangeError);
  s = BlurDomainSpec::known_default();
  s.gaussian_sigma = {2.0, 1.0};
  EXPECT_THROW(sample_kernel(s, 0), InvalidRangeError);
}

TEST(SampleKernel, DeterministicPerSeed) {
  for (auto f : {BlurFamily::linear_motion, BlurFamily::gaussian, BlurFamily::frame_average_trajectory}) {
    const auto s = family_spec(f);
    EXPECT_EQ(sample_kernel(s, 42), sample_kernel(s, 42));
    EXPECT_FALSE(sample_kernel(s, 42) == sample_kernel(s, 43));
  }
}

TEST(SampleKernel, ValidOverManySeeds) {
  for (auto f : {BlurFamily::linear_motion, BlurFamily::gaussian, BlurFamily::frame_average_trajectory}) {
    const auto s = family_spec(f);
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      const BlurKernel k = sample_kernel(s, seed);
      EXPECT_EQ(k.size() % 2, 1);
      EXPECT_NEAR(k.sum(), 1.0, 1e-8);
      for (double w : k.weights()) ASSERT_GE(w, 0.0);
    }
  }
}

TEST(DomainDistance, SelfSmallerThanCross) {
  const auto c = BlurDomainSpec::unknown_default(), k = BlurDomainSpec::known_default();
  const double ck = domain_distance(c, k, 32, 1);
  EXPECT_NEAR(ck, domain_distance(k, c, 32, 1), 0.5 * ck);
  EXPECT_LT(domain_distance(k, k, 32, 1), ck);
  BlurDomainSpec fixed = k;
  fixed.gaussian_sigma = {1.5, 1.5};
  EXPECT_NEAR(domain_distance(fixed, fixed, 8, 2), 0.0, 1e-12);
}

TEST(DomainSpec, JsonRoundTripAndUnknownKeys) {
  const auto s = BlurDomainSpec::unknown_default();
  Json j = s;
  const auto back = domain_from_json(j, "domain", BlurDomainSpec::known_default());
  EXPECT_EQ(back.family, s.family);
  EXPECT_EQ(back.motion_length.lo, 7.0);
  EXPECT_EQ(back.noise_sigma, 0.01);
  j["bogus"] = 1;
  EXPECT_THROW(domain_from_json(j, "domain", s), UsageError);
}

TEST(ApplyBlur, DeltaIsIdentity) {
  const Image x = oracle::random_texture(16, 16, 1);
  EXPECT_EQ(apply_blur(x, BlurKernel::delta(), 0.0, 0), x);
}

TEST(ApplyBlur, ConstantImagePreserved) {
  const Image x(16, 16, 0.37);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Image y = apply_blur(x, sample_kernel(BlurDomainSpec::unknown_default(), seed), 0.0, 0);
    EXPECT_LT(max_abs_diff(x, y), 1e-12);
  }
}

TEST(ApplyBlur, RampWithBoxMatchesNestedLoops) {
  Image ramp(8, 8);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) ramp(c, y, x) = (8 * y + x) / 63.0;
  const BlurKernel box(3, std::vector<double>(9, 1.0 / 9.0));
  const Image y = apply_blur(ramp, box, 0.0, 0);
  EXPECT_LT(max_abs_diff(y, oracle::convolve(ramp, box)), 1e-12);
  // interior pixel of a linear ramp is unchanged by a symmetric box
  EXPECT_NEAR(y(0, 4, 4), ramp(0, 4, 4), 1e-12);
}

TEST(ApplyBlur, AsymmetricKernelMatchesNestedLoops) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Image x = oracle::random_texture(20, 24, seed);
    const BlurKernel k = sample_kernel(BlurDomainSpec::unknown_default(), seed);
    EXPECT_LT(max_abs_diff(convolve(x, k), oracle::convolve(x, k)), 1e-12);
  }
}

TEST(ApplyBlur, KernelTooLarge) {
  EXPECT_THROW(apply_blur(Image(8, 8), BlurKernel::gaussian(2.0), 0.0, 0), TooSmallError);
}

TEST(ApplyBlur, LinearWithoutNoise) {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Image x1 = oracle::random_texture(16, 16, rng.next_u64());
    const Image x2 = oracle::random_texture(16, 16, rng.next_u64());
    const double a = rng.uniform();
    const BlurKernel k = sample_kernel(BlurDomainSpec::known_default(), rng.next_u64());
    Image mix(16, 16);
    for (std::size_t i = 0; i < mix.size(); ++i) mix.values()[i] = a * x1.values()[i] + (1 - a) * x2.values()[i];
    const Image lhs = apply_blur(mix, k, 0.0, 0);
    const Image b1 = apply_blur(x1, k, 0.0, 0), b2 = apply_blur(x2, k, 0.0, 0);
    for (std::size_t i = 0; i < mix.size(); ++i)
      EXPECT_NEAR(lhs.values()[i], a * b1.values()[i] + (1 - a) * b2.values()[i], 1e-6);
  }
}

TEST(ApplyBlur, NoiseIsSeededAndHasRequestedStd) {
  const Image x(64, 64, 0.5);
  const Image a = apply_blur(x, BlurKernel::delta(), 0.01, 9);
  EXPECT_EQ(a, apply_blur(x, BlurKernel::delta(), 0.01, 9));
  EXPECT_FALSE(a == apply_blur(x, BlurKernel::delta(), 0.01, 10));
  double s = 0.0;
  for (double v : a.values()) s += (v - 0.5) * (v - 0.5);
  EXPECT_NEAR(std::sqrt(s / a.size()), 0.01, 0.0005);
  EXPECT_TRUE(apply_blur(Image(16, 16, 1.0), BlurKernel::delta(), 0.2, 1).in_range());
}

TEST(FrameAverage, SingleAndIdenticalFrames) {
  const Image f = oracle::random_texture(16, 16, 4);
  EXPECT_LT(max_abs_diff(frame_average_blur({f}, CameraResponse{2.2}), f), 1e-6);
  EXPECT_LT(max_abs_diff(frame_average_blur({f, f, f}, CameraResponse{2.2}), f), 1e-6);
}

TEST(FrameAverage, BlackAndWhiteLinear) {
  const Image avg = frame_average_blur({Image(8, 8, 0.0), Image(8, 8, 1.0)}, CameraResponse::identity());
  for (double v : avg.values()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(FrameAverage, GammaWeightedMean) {
  const double expect = std::pow(0.5 * (std::pow(0.2, 2.2) + std::pow(0.8, 2.2)), 1.0 / 2.2);
  const Image avg = frame_average_blur({Image(8, 8, 0.2), Image(8, 8, 0.8)}, CameraResponse{2.2});
  for (double v : avg.values()) EXPECT_NEAR(v, expect, 1e-12);
}

TEST(FrameAverage, GammaOneIsArithmeticMean) {
  std::vector<Image> frames;
  for (std::uint64_t s = 0; s < 4; ++s) frames.push_back(oracle::random_texture(8, 8, s));
  const Image avg = frame_average_blur(frames, CameraResponse::identity());
  for (std::size_t i = 0; i < avg.size(); ++i) {
    double m = 0.0;
    for (const auto& f : frames) m += f.values()[i];
    EXPECT_NEAR(avg.values()[i], m / 4, 1e-15);
  }
}

TEST(FrameAverage, Errors) {
  EXPECT_THROW(frame_average_blur({}, CameraResponse::identity()), EmptySetError);
  EXPECT_THROW(frame_average_blur({Image(8, 8), Image(8, 9)}, CameraResponse::identity()), ShapeMismatchError);
}

TEST(EstimateKernel, DeltaRecovered) {
  const Image x = oracle::random_texture(32, 32, 5);
  const BlurPair pair{apply_blur(x, BlurKernel::delta(), 0.0, 0), x, std::nullopt};
  EXPECT_LT(kernel_l2(estimate_kernel(pair, {5, 1e-6}), BlurKernel::delta()), 1e-3);
}

TEST(EstimateKernel, GaussianRecovered) {
  const Image x = oracle::random_texture(32, 32, 6);
  const BlurKernel k = BlurKernel::gaussian(1.0, 5);
  const BlurPair pair{apply_blur(x, k, 0.0, 0), x, k};
  EXPECT_LT(kernel_l2(estimate_kernel(pair, {5, 1e-6}), k), 1e-3);
}

TEST(EstimateKernel, AllFamiliesRecovered) {
  for (auto f : {BlurFamily::linear_motion, BlurFamily::gaussian, BlurFamily::frame_average_trajectory}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const BlurKernel k = sample_kernel(family_spec(f), 100 + seed);
      const Image x = oracle::random_texture(48, 48, seed);
      const BlurPair pair{apply_blur(x, k, 0.0, 0), x, k};
      const int support = std::max(k.size(), 15);
      EXPECT_LT(kernel_l2(estimate_kernel(pair, {support, 1e-6}), k), 1e-3) << to_string(f) << " seed " << seed;
    }
  }
}

TEST(EstimateKernel, Errors) {
  const Image c(32, 32, 0.5);
  EXPECT_THROW(estimate_kernel({c, c, std::nullopt}, {5, 1e-6}), DegenerateInputError);
  const Image x = oracle::random_texture(32, 32, 1);
  EXPECT_THROW(estimate_kernel({x, x, std::nullopt}, {17, 1e-6}), InvalidRangeError);
  EXPECT_THROW(estimate_kernel({x, x, std::nullopt}, {4, 1e-6}), InvalidRangeError);
  EXPECT_THROW(estimate_kernel({x, Image(32, 31), std::nullopt}, {5, 1e-6}), ShapeMismatchError);
}

TEST(TransferKernel, ExactDeltaIsIdentity) {
  const Image sharp = oracle::random_texture(32, 32, 1);
  const Image other = oracle::random_texture(32, 32, 2);
  const BlurPair src{other, other, BlurKernel::delta()};
  EXPECT_EQ(transfer_kernel(sharp, src, TransferMode::exact, 0.0, 0), sharp);
}

TEST(TransferKernel, ExactGaussianMatchesDirectBlur) {
  const Image sharp = oracle::smooth_texture(32, 32, 1);
  const Image other = oracle::random_texture(32, 32, 2);
  const BlurKernel k = BlurKernel::gaussian(1.3);
  const BlurPair src{apply_blur(other, k, 0.01, 5), other, k};
  EXPECT_DOUBLE_EQ(psnr(transfer_kernel(sharp, src, TransferMode::exact, 0.01, 7), apply_blur(sharp, k, 0.01, 7)),
                   100.0);
}

TEST(TransferKernel, EstimatedCloseToExact) {
  const Image sharp = oracle::smooth_texture(48, 48, 3);
  const Image other = oracle::random_texture(48, 48, 4);
  const BlurKernel k = sample_kernel(BlurDomainSpec::known_default(), 8);
  const BlurPair src{apply_blur(other, k, 0.0, 0), other, k};
  KernelEstimateOptions opt{k.size(), 1e-6};
  const Image exact = transfer_kernel(sharp, src, TransferMode::exact, 0.0, 0, opt);
  const Image est = transfer_kernel(sharp, src, TransferMode::estimated, 0.0, 0, opt);
  EXPECT_GE(psnr(exact, est), 40.0);
}

TEST(TransferKernel, ExactNeedsGroundTruth) {
  const Image x = oracle::random_texture(32, 32, 1);
  EXPECT_THROW(transfer_kernel(x, {x, x, std::nullopt}, TransferMode::exact, 0.0, 0), DataError);
}

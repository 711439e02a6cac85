#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "blurbridge/blur/domain.hpp"
#include "blurbridge/imaging/metrics.hpp"
#include "blurbridge/losses/losses.hpp"
#include "blurbridge/models/deblurrer.hpp"
#include "blurbridge/models/discriminator.hpp"
#include "blurbridge/models/feature_extractor.hpp"
#include "blurbridge/models/generator.hpp"
#include "blurbridge/nn/adam.hpp"
#include "blurbridge/nn/archive.hpp"
#include "grad_check.hpp"
#include "oracles.hpp"

using namespace blurbridge;
using nn::Tensor;

namespace {

Tensor<double> random_tensor(int n, int c, int h, int w, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  Tensor<double> t(n, c, h, w);
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

std::vector<Tensor<double>> random_pyramid(int n, int side, int levels, std::uint64_t seed) {
  std::vector<ImagePyramid> pyrs;
  for (int i = 0; i < n; ++i) pyrs.push_back(build_pyramid(oracle::smooth_texture(side, side, seed + i), levels));
  return models::pyramid_batch<double>(pyrs);
}

void randomize(const nn::ParamRefs<double>& ps, std::uint64_t seed, double scale) {
  Rng rng(seed);
  for (auto* p : ps)
    for (double& v : p->value) v = scale * rng.normal();
}

double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

// Zero-padded strided cross-correlation by nested loops.
Tensor<double> conv_oracle(const nn::Conv2d<double>& conv, const Tensor<double>& x) {
  const int k = conv.kernel(), r = k / 2, s = conv.stride();
  const int oh = (x.h - 1) / s + 1, ow = (x.w - 1) / s + 1;
  Tensor<double> y(x.n, conv.out_channels(), oh, ow);
  for (int n = 0; n < x.n; ++n)
    for (int co = 0; co < conv.out_channels(); ++co)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = conv.bias.size() ? conv.bias.value[co] : 0.0;
          for (int ci = 0; ci < conv.in_channels(); ++ci)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy * s + ky - r, ix = ox * s + kx - r;
                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                acc += conv.weight.value[((co * conv.in_channels() + ci) * k + ky) * k + kx] * x(n, ci, iy, ix);
              }
          y(n, co, oy, ox) = acc;
        }
  return y;
}

}  // namespace

TEST(Conv2d, MatchesNestedLoops) {
  for (int stride : {1, 2}) {
    nn::Conv2d<double> conv("c", 3, 5, 3, stride);
    Rng rng(stride);
    conv.init(rng);
    for (double& b : conv.bias.value) b = rng.normal();
    const auto x = random_tensor(2, 3, 9, 10, 4, -1, 1);
    const auto y = conv.forward(x), ref = conv_oracle(conv, x);
    ASSERT_TRUE(y.same_shape(ref));
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y.data[i], ref.data[i], 1e-12);
  }
}

TEST(Conv2d, BackwardIsAdjoint) {
  // <gy, conv(x)> is bilinear, so <gy, W x> = <W^T gy, x> for the bias-free part.
  nn::Conv2d<double> conv("c", 4, 3, 3, 2);
  Rng rng(1);
  conv.init(rng);
  const auto x = random_tensor(2, 4, 8, 7, 2, -1, 1);
  const auto y = conv.forward(x, false);
  const auto gy = random_tensor(y.n, y.c, y.h, y.w, 3, -1, 1);
  const auto gx = conv.backward(x, gy, true, false);
  EXPECT_NEAR(dot(gy, y), dot(gx, x), 1e-10);
}

TEST(Generator, IdentityAtInit) {
  models::Generator<double> g;
  Rng rng(3);
  g.init(rng);
  const auto in = random_pyramid(2, 32, 3, 10);
  const auto out = g.forward(in);
  ASSERT_EQ(out.size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(out[i].data, in[i].data);
}

TEST(Generator, ShapeContractAndDeterminism) {
  models::Generator<double> g;
  Rng rng(4);
  g.init(rng);
  randomize(g.params(), 5, 0.1);
  const auto in = random_pyramid(1, 48, 3, 20);
  const auto a = g.forward(in), b = g.forward(in);
  for (int i = 0; i < 3; ++i) {
    EXPECT_TRUE(a[i].same_shape(in[i]));
    EXPECT_EQ(a[i].data, b[i].data);
    for (double v : a[i].data) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_NE(a[0].data, in[0].data);
}

TEST(Generator, LevelMismatch) {
  models::Generator<double> g;
  EXPECT_THROW(g.forward(random_pyramid(1, 32, 2, 1)), ShapeMismatchError);
}

TEST(Generator, ParameterCountExact) {
  // Count by hand from the layer layout: (3*3*in*out + out) per conv.
  auto conv = [](int in, int out) { return 9 * in * out + out; };
  const std::size_t expect = conv(3, 8) + conv(8, 8) + conv(16, 8) + conv(8, 8) + conv(8, 3) +   // level 1
                             conv(3, 16) + conv(8, 16) + conv(16, 16) + conv(32, 16) + conv(16, 16) + conv(16, 3) +
                             conv(3, 32) + conv(16, 32) + 2 * conv(32, 32) + conv(32, 3);
  models::Generator<double> g;
  EXPECT_EQ(nn::parameter_count(g.params()), expect);
}

TEST(Generator, GradientsMatchFiniteDifferences) {
  models::GeneratorConfig cfg;
  cfg.channels = {4, 6, 8};
  models::Generator<double> g(cfg);
  Rng rng(6);
  g.init(rng);
  for (auto* p : g.params())
    if (p->name.find("head") != std::string::npos)
      for (double& v : p->value) v = 0.05 * rng.normal();
  const auto in = random_pyramid(2, 32, 3, 30);
  std::vector<Tensor<double>> probe;
  for (const auto& t : in) probe.push_back(random_tensor(t.n, t.c, t.h, t.w, 31 + t.h, -1, 1));
  auto loss = [&] {
    const auto out = g.forward(in);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += dot(out[i], probe[i]);
    return s;
  };
  auto ps = g.params();
  nn::zero_grads(ps);
  models::Generator<double>::Cache cache;
  g.forward(in, &cache);
  g.backward(cache, probe);
  const auto r = gradcheck::probe(ps, loss, 100, 7);
  EXPECT_GE(r.fraction(), 0.95) << "worst " << r.worst << " at " << r.worst_name;
}

TEST(Discriminator, ZeroHeadGivesHalf) {
  models::Discriminator<double> d;
  Rng rng(1);
  d.init(rng);
  d.zero_head();
  const auto s = d.scores(random_tensor(2, 3, 64, 64, 2));
  EXPECT_EQ(s.h, 8);
  EXPECT_EQ(s.w, 8);
  for (double v : s.data) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Discriminator, DeterministicAndTooSmall) {
  models::Discriminator<double> d;
  Rng rng(2);
  d.init(rng);
  const auto x = random_tensor(1, 3, 32, 32, 3);
  EXPECT_EQ(d.scores(x).data, d.scores(x).data);
  EXPECT_THROW(d.scores(random_tensor(1, 3, 8, 32, 3)), TooSmallError);
}

TEST(Discriminator, InterpolateAtOneEqualsReal) {
  models::Discriminator<double> d;
  Rng rng(3);
  d.init(rng);
  const auto real = random_tensor(2, 3, 32, 32, 4), fake = random_tensor(2, 3, 32, 32, 5);
  const auto mixed = losses::interpolate(real, fake, {1.0, 1.0});
  EXPECT_EQ(d.scores(mixed).data, d.scores(real).data);
}

TEST(Discriminator, ScoresStrictlyInsideUnitInterval) {
  models::Discriminator<double> d;
  Rng rng(4);
  d.init(rng);
  randomize(d.params(), 9, 50.0);  // drive logits far past the clamp
  const auto s = d.scores(random_tensor(2, 3, 32, 32, 6));
  for (double v : s.data) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  const auto f = d.scores(random_tensor(2, 3, 32, 32, 6));
  EXPECT_TRUE(std::isfinite(losses::adversarial_loss(s.data, f.data)));
}

TEST(Discriminator, GradientsMatchFiniteDifferences) {
  models::DiscriminatorConfig cfg;
  cfg.channels = {4, 6, 8};
  models::Discriminator<double> d(cfg);
  Rng rng(5);
  d.init(rng);
  const auto x = random_tensor(2, 3, 16, 16, 7);
  Tensor<double> probe;
  {
    const auto s = d.scores(x);
    probe = random_tensor(s.n, s.c, s.h, s.w, 8, -1, 1);
  }
  auto loss = [&] { return dot(d.scores(x), probe); };
  auto ps = d.params();
  nn::zero_grads(ps);
  models::Discriminator<double>::Cache cache;
  d.scores(x, &cache);
  d.backward_scores(cache, probe, true, false);
  const auto r = gradcheck::probe(ps, loss, 100, 9);
  EXPECT_GE(r.fraction(), 0.95) << "worst " << r.worst << " at " << r.worst_name;
}

class DiscriminatorStage : public ::testing::TestWithParam<double> {};

TEST_P(DiscriminatorStage, InputGradientMatchesFiniteDifferences) {
  models::DiscriminatorConfig cfg;
  cfg.channels = {4, 6};
  cfg.strides = {2, 2};
  cfg.highpass_gain = GetParam();
  models::Discriminator<double> d(cfg);
  Rng rng(6);
  d.init(rng);
  auto x = random_tensor(1, 3, 16, 16, 10);
  const auto g = d.input_gradient(x);
  auto mean_score = [&] {
    const auto s = d.scores(x);
    double m = 0.0;
    for (double v : s.data) m += v;
    return m / s.size();
  };
  int agree = 0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t i = rng.below(x.size());
    const double saved = x.data[i];
    x.data[i] = saved + 1e-6;
    const double up = mean_score();
    x.data[i] = saved - 1e-6;
    const double down = mean_score();
    x.data[i] = saved;
    agree += gradcheck::relative_error(g.data[i], (up - down) / 2e-6) <= 1e-3;
  }
  EXPECT_GE(agree, 95);
}

TEST_P(DiscriminatorStage, PenaltyParameterGradientsMatchFiniteDifferences) {
  models::DiscriminatorConfig cfg;
  cfg.channels = {4, 6};
  cfg.strides = {2, 2};
  cfg.highpass_gain = GetParam();
  models::Discriminator<double> d(cfg);
  Rng rng(7);
  d.init(rng);
  const auto x = random_tensor(2, 3, 16, 16, 11);
  auto ps = d.params();
  nn::zero_grads(ps);
  const double weight = 0.7;
  d.gradient_penalty(x, weight);
  auto loss = [&] { return weight * d.gradient_penalty(x, 0.0).value; };
  const auto r = gradcheck::probe(ps, loss, 100, 12);
  EXPECT_GE(r.fraction(), 0.95) << "worst " << r.worst << " at " << r.worst_name;
}

// raw pixels and the default high-pass input stage
INSTANTIATE_TEST_SUITE_P(Gains, DiscriminatorStage, ::testing::Values(0.0, 10.0));

TEST(HighPass, MatchesDirectFormula) {
  const auto x = random_tensor(2, 3, 9, 11, 21);
  const auto y = nn::highpass(x, 3.0, 2);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 11; ++j) {
          double box = 0.0;
          for (int di = -2; di <= 2; ++di)
            for (int dj = -2; dj <= 2; ++dj) box += x(n, c, oracle::mirror(i + di, 9), oracle::mirror(j + dj, 11));
          EXPECT_NEAR(y(n, c, i, j), 3.0 * (x(n, c, i, j) - box / 25.0), 1e-12);
        }
}

TEST(HighPass, AdjointIdentity) {
  const auto x = random_tensor(1, 3, 12, 10, 22, -1, 1);
  const auto g = random_tensor(1, 3, 12, 10, 23, -1, 1);
  EXPECT_NEAR(dot(nn::highpass(x, 10.0, 2), g), dot(x, nn::highpass_adjoint(g, 10.0, 2)), 1e-10);
}

TEST(HighPass, ConstantImagesVanish) {
  Tensor<double> x(1, 3, 16, 16);
  for (double& v : x.data) v = 0.37;
  for (double v : nn::highpass(x, 10.0, 2).data) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(FeatureExtractor, DeterministicAndManifest) {
  models::FeatureExtractor<double> phi;
  const auto x = random_tensor(2, 3, 32, 24, 1);
  const auto a = phi.forward(x), b = phi.forward(x);
  const auto manifest = phi.manifest(32, 24);
  ASSERT_EQ(a.size(), manifest.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].data, b[k].data);
    EXPECT_EQ(a[k].n, 2);
    EXPECT_EQ(a[k].c, manifest[k][0]);
    EXPECT_EQ(a[k].h, manifest[k][1]);
    EXPECT_EQ(a[k].w, manifest[k][2]);
  }
  EXPECT_EQ(manifest.back()[1], 8);
  // same seed, independent instance
  models::FeatureExtractor<double> phi2;
  EXPECT_EQ(phi2.forward(x).back().data, a.back().data);
}

TEST(FeatureExtractor, ContinuousUnderTinyPerturbation) {
  models::FeatureExtractor<double> phi;
  const auto x = random_tensor(1, 3, 16, 16, 2);
  auto xd = x;
  Rng rng(3);
  for (double& v : xd.data) v += 1e-6 * rng.uniform(-1, 1);
  const auto a = phi.forward(x), b = phi.forward(xd);
  double l1 = 0.0, n = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t i = 0; i < a[k].size(); ++i, ++n) l1 += std::abs(a[k].data[i] - b[k].data[i]);
  EXPECT_LT(l1 / n, 1e-5);
}

TEST(FeatureExtractor, PretrainedBackendRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "blurbridge_phi_test";
  std::filesystem::create_directories(dir);
  models::FeatureExtractorConfig other;
  other.seed = 99;
  models::FeatureExtractor<double> src(other);
  nn::Archive a;
  a.kind = "feature-extractor";
  a.architecture = src.architecture();
  nn::store_params(a, src.params());
  nn::write_archive(dir / "phi.bba", a);

  const auto loaded = models::FeatureExtractor<double>::from_archive(nn::read_archive(dir / "phi.bba"), {});
  const auto x = random_tensor(1, 3, 16, 16, 4);
  EXPECT_EQ(loaded.forward(x).back().data, src.forward(x).back().data);

  // Wrong layer manifest.
  models::FeatureExtractorConfig wide;
  wide.layers[2].out = 48;
  EXPECT_THROW(models::FeatureExtractor<double>::from_archive(a, wide), nn::ArchiveError);
  // Truncated file.
  {
    std::ifstream is(dir / "phi.bba", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)), {});
    std::ofstream os(dir / "bad.bba", std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  EXPECT_THROW(nn::read_archive(dir / "bad.bba"), nn::ArchiveError);
  {
    std::ofstream os(dir / "junk.bba", std::ios::binary);
    os << "not an archive at all";
  }
  EXPECT_THROW(nn::read_archive(dir / "junk.bba"), nn::ArchiveError);
  std::filesystem::remove_all(dir);
}

TEST(FeatureExtractor, InputGradientMatchesFiniteDifferences) {
  models::FeatureExtractorConfig cfg;
  cfg.layers = {{3, 4, 3, 1}, {4, 5, 3, 2}};
  models::FeatureExtractor<double> phi(cfg);
  auto x = random_tensor(1, 3, 12, 12, 5, -1, 1);
  models::FeatureExtractor<double>::Cache cache;
  const auto f = phi.forward(x, &cache);
  std::vector<Tensor<double>> probes;
  for (const auto& m : f) probes.push_back(random_tensor(m.n, m.c, m.h, m.w, 6 + m.c, -1, 1));
  const auto gx = phi.backward_input(cache, probes);
  auto loss = [&] {
    const auto fm = phi.forward(x);
    double s = 0.0;
    for (std::size_t k = 0; k < fm.size(); ++k) s += dot(fm[k], probes[k]);
    return s;
  };
  int agree = 0;
  Rng rng(8);
  for (int k = 0; k < 100; ++k) {
    const std::size_t i = rng.below(x.size());
    const double saved = x.data[i];
    x.data[i] = saved + 1e-6;
    const double up = loss();
    x.data[i] = saved - 1e-6;
    const double down = loss();
    x.data[i] = saved;
    agree += gradcheck::relative_error(gx.data[i], (up - down) / 2e-6) <= 1e-3;
  }
  EXPECT_GE(agree, 95);
}

TEST(Wiener, ExactKernelNoiselessRecovery) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Image x = oracle::random_texture(32, 32, seed);
    // well-conditioned spectra: the corner response of wider kernels drops below double precision
    const BlurKernel k = BlurKernel::gaussian(0.6 + 0.1 * seed);
    const Image y = convolve(x, k);
    const models::WienerDeblurrer w(k, 1e-12);
    EXPECT_GE(psnr(w.deblur(y), x), 40.0) << "seed " << seed;
  }
}

TEST(Wiener, DeltaKernelIsIdentity) {
  const Image x = oracle::random_texture(20, 28, 1);
  const models::WienerDeblurrer w(BlurKernel::delta(), 0.0);
  const Image out = w.deblur(x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(out.values()[i], x.values()[i], 1e-5);
}

TEST(Wiener, Superposition) {
  const models::WienerDeblurrer w(expected_gaussian_kernel({1.0, 2.0}), 0.02);
  const Image a = oracle::random_texture(24, 24, 2), b = oracle::smooth_texture(24, 24, 3);
  Image mix(24, 24);
  for (std::size_t i = 0; i < mix.size(); ++i) mix.values()[i] = 0.3 * a.values()[i] + 0.7 * b.values()[i];
  const Image da = w.deblur_unclamped(a), db = w.deblur_unclamped(b), dm = w.deblur_unclamped(mix);
  for (std::size_t i = 0; i < mix.size(); ++i)
    EXPECT_NEAR(dm.values()[i], 0.3 * da.values()[i] + 0.7 * db.values()[i], 1e-5);
}

TEST(KnownDeblurrer, UnconfiguredFails) {
  models::KnownDeblurrer none;
  EXPECT_FALSE(none.configured());
  EXPECT_THROW(none.deblur(Image(16, 16)), UsageError);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  nn::Parameter<double> p("p", {3});
  p.grad = {2.0, -0.5, 0.0};
  nn::Adam<double> opt;
  opt.step({&p}, 0.1);
  // bias-corrected first step is lr * g / (|g| + eps)
  EXPECT_NEAR(p.value[0], -0.1, 1e-6);
  EXPECT_NEAR(p.value[1], 0.1, 1e-6);
  EXPECT_DOUBLE_EQ(p.value[2], 0.0);
}

TEST(Adam, MinimizesQuadratic) {
  nn::Parameter<double> p("p", {2});
  p.value = {3.0, -2.0};
  nn::Adam<double> opt;
  for (int i = 0; i < 2000; ++i) {
    for (int j = 0; j < 2; ++j) p.grad[j] = 2.0 * (p.value[j] - 1.0);
    opt.step({&p}, 0.01);
  }
  EXPECT_NEAR(p.value[0], 1.0, 1e-3);
  EXPECT_NEAR(p.value[1], 1.0, 1e-3);
}
